// compemb/training.hpp

// Copyright 2026 The compemb Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Episodic joint training of f and g with a triplet hinge and Adam.
//
// Each episode: sample speakers and mixtures, build the enrollment table on
// the graph, use every mixture as an anchor against its own table entry and
// all other entries, backpropagate through g into f, take one Adam step.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "compemb/inference.hpp"
#include "compemb/nets.hpp"
#include "compemb/rng.hpp"
#include "compemb/synth.hpp"
#include "compemb/tensor.hpp"

namespace compemb {

enum class Mining {
  kAveragedActive,  // mean over the hinge-active negatives of each anchor
  kHardest,         // the largest hinge of each anchor
};

struct TrainConfig {
  double lr = 0.0003;
  double margin = 0.1;
  int episodes_train = 20000;
  int episodes_val = 500;
  int episodes_test = 2000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int val_every = 1000;
  std::uint64_t seed = 0;
  Variant variant = Variant::kCmpEm;
  int n_speakers = 5;
  int max_card = 3;
  int examples_per_set = 2;
  Mining mining = Mining::kAveragedActive;

  void validate() const {
    auto fail = [](const std::string& m) { throw std::invalid_argument("config: " + m); };
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (!(margin > 0.0)) fail("margin must be > 0");
    if (episodes_train < 0) fail("episodes_train must be >= 0");
    if (episodes_val < 1) fail("episodes_val must be >= 1");
    if (episodes_test < 1) fail("episodes_test must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
      fail("adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) fail("adam eps must be > 0");
    if (val_every < 1) fail("val_every must be >= 1");
    if (n_speakers < 1 || max_card < 1 || max_card > n_speakers)
      fail("need 1 <= max_card <= n_speakers");
    if (examples_per_set < 1) fail("examples_per_set must be >= 1");
  }
};

// ---------------------------------------------------------------------------
// Loss

/// max(0, d(a,p) - d(a,n) + margin) on precomputed squared distances.
inline double triplet_hinge(double d_ap, double d_an, double margin) {
  return std::max(d_ap - d_an + margin, 0.0);
}

inline double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                           std::span<const double> negative, double margin) {
  if (anchor.size() != positive.size() || anchor.size() != negative.size())
    throw std::invalid_argument("triplet_loss: embedding dimension mismatch");
  return triplet_hinge(squared_distance(anchor, positive), squared_distance(anchor, negative),
                       margin);
}

inline Value triplet_loss(Graph& g, Value anchor, Value positive, Value negative,
                          double margin) {
  Value d_ap = g.squared_euclidean(anchor, positive);
  Value d_an = g.squared_euclidean(anchor, negative);
  return g.scalar_max0(g.add(g.sub(d_ap, d_an), g.scalar(margin)));
}

/// Loss of one anchor against a table: positive entry `pos`, every other
/// entry a negative. Returns a constant zero when no hinge is active.
inline Value anchor_loss(Graph& g, Value anchor, std::span<const Value> table,
                         std::size_t pos, double margin, Mining mining) {
  Value d_ap = g.squared_euclidean(anchor, table[pos]);
  Value eps = g.scalar(margin);
  std::vector<Value> active;
  Value hardest{};
  double hardest_val = 0.0;
  for (std::size_t j = 0; j < table.size(); ++j) {
    if (j == pos) continue;
    Value h = g.scalar_max0(g.add(g.sub(d_ap, g.squared_euclidean(anchor, table[j])), eps));
    const double hv = g.value(h).item();
    if (!(hv <= 0.0)) {  // NaN counts as active so it reaches the loss
      active.push_back(h);
      if (!(hv <= hardest_val) && !std::isnan(hardest_val)) {
        hardest_val = hv;
        hardest = h;
      }
    }
  }
  if (active.empty()) return g.scalar(0.0);
  if (mining == Mining::kHardest) return hardest;
  return g.mean(g.concat(active));
}

/// Mean anchor loss over the examples of one episode. `table_keys` selects
/// which subsets form the table (all of them, or singletons for SingleEm).
inline Value episode_loss(Graph& g, const BoundModel& bound, const Episode& ep,
                          const std::vector<SpeakerSet>& table_keys, double margin,
                          Mining mining) {
  std::vector<Value> singles;
  for (const Vec& x : ep.enrollments) singles.push_back(embed_f(g, bound, g.constant(x)));
  std::vector<Value> table;
  if (bound.model->g) {
    table = build_enrollment_values(g, bound, singles, table_keys);
  } else {
    for (const SpeakerSet& t : table_keys) {
      if (t.size() != 1) throw std::logic_error("episode_loss: SingleEm table must be singletons");
      table.push_back(singles[static_cast<std::size_t>(t[0])]);
    }
  }
  std::vector<Value> losses;
  for (const Example& ex : ep.examples) {
    auto it = std::lower_bound(table_keys.begin(), table_keys.end(), ex.label);
    if (it == table_keys.end() || *it != ex.label)
      throw std::logic_error("episode_loss: label " + ex.label.str() + " not in table");
    Value anchor = embed_f(g, bound, g.constant(ex.x));
    losses.push_back(anchor_loss(g, anchor, table,
                                 static_cast<std::size_t>(it - table_keys.begin()), margin,
                                 mining));
  }
  return g.mean(g.concat(losses));
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long long step = 0;
};

inline AdamState make_adam_state(std::span<Tensor* const> params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.emplace_back(p->size(), 0.0);
    s.v.emplace_back(p->size(), 0.0);
  }
  return s;
}

/// Bias-corrected Adam update of `params` in place using their `grad` buffers.
/// Parameters without a gradient buffer are treated as having zero gradient.
inline void adam_step(std::span<Tensor* const> params, AdamState& state, double lr,
                      double beta1, double beta2, double eps) {
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: optimizer state has " +
                                std::to_string(state.m.size()) + " slots for " +
                                std::to_string(params.size()) + " parameters");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (params[i]->grad && params[i]->grad->size() != params[i]->size())
      throw std::invalid_argument("adam_step: gradient shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (state.m[i].size() != params[i]->size())
      throw std::invalid_argument("adam_step: optimizer state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = p.grad ? (*p.grad)[j] : 0.0;
      m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
      v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.data[j] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

inline void adam_step(std::span<Tensor* const> params, AdamState& state,
                      const TrainConfig& cfg) {
  adam_step(params, state, cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
}

// ---------------------------------------------------------------------------
// Training loop

/// Disjoint speaker ranges of one bank.
struct SpeakerSplits {
  SpeakerPool train{0, 2000};
  SpeakerPool val{2000, 200};
  SpeakerPool test{2200, 400};
  int total() const { return test.first + test.count; }
};

struct LogRow {
  int episode = 0;
  double loss = 0.0;
  std::optional<double> val_accuracy;
};

struct TrainResult {
  CompositionalModel best;   // checkpoint with the best validation accuracy
  CompositionalModel final;  // parameters after the last episode
  std::vector<LogRow> log;
  double best_val_accuracy = -1.0;
  int best_episode = 0;
};

inline void write_log_csv(std::ostream& os, const std::vector<LogRow>& log) {
  os << "episode_index,loss,val_accuracy\n";
  char buf[96];
  for (const LogRow& r : log) {
    if (r.val_accuracy)
      std::snprintf(buf, sizeof buf, "%d,%.17g,%.6f\n", r.episode, r.loss, *r.val_accuracy);
    else
      std::snprintf(buf, sizeof buf, "%d,%.17g,\n", r.episode, r.loss);
    os << buf;
  }
}

inline std::vector<Episode> make_episodes(const SpeakerBank& bank, const SpeakerPool& pool,
                                          int count, int n_speakers, int max_card,
                                          int examples_per_set, std::uint64_t seed) {
  std::vector<Episode> eps;
  eps.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    eps.push_back(sample_episode(bank, pool, n_speakers, max_card, examples_per_set, rng));
  }
  return eps;
}

/// Overall set-identification accuracy (percent) of `model` on `episodes`.
inline double validation_accuracy(const CompositionalModel& model,
                                  std::span<const Episode> episodes) {
  std::unique_ptr<SetPredictor> p;
  if (model.g)
    p = std::make_unique<CompositionalPredictor>(model);
  else
    p = std::make_unique<SingleEmPredictor>(model);
  SetPredictor* ps[] = {p.get()};
  return evaluate_episode_batch(ps, episodes).models.front().overall.percent();
}

using ProgressFn = std::function<void(const LogRow&)>;

/// Trains `model` in place. SingleEm models (no g) see single-speaker labels
/// only. The returned `best` is the checkpoint with the highest validation
/// accuracy (the initial model counts as a candidate).
inline TrainResult train(CompositionalModel model, const SpeakerBank& bank,
                         const SpeakerSplits& splits, const TrainConfig& cfg,
                         const ProgressFn& progress = {}) {
  cfg.validate();
  const bool single = !model.g.has_value();
  const int max_card = single ? 1 : cfg.max_card;
  const std::uint64_t root = derive_seed(cfg.seed, single ? "train-single" : "train");
  const auto val_eps = make_episodes(bank, splits.val, cfg.episodes_val, cfg.n_speakers,
                                     max_card, 1, derive_seed(root, "val-episodes"));
  const auto keys = enumerate_subsets(cfg.n_speakers, max_card);
  const std::uint64_t train_seed = derive_seed(root, "train-episodes");

  TrainResult result;
  result.best = model;
  result.best_val_accuracy = validation_accuracy(model, val_eps);
  result.best_episode = 0;

  model.set_requires_grad(true);
  auto params = model.parameters();
  AdamState adam = make_adam_state(params);
  for (int e = 1; e <= cfg.episodes_train; ++e) {
    Rng rng(derive_seed(train_seed, static_cast<std::uint64_t>(e)));
    const Episode ep = sample_episode(bank, splits.train, cfg.n_speakers, max_card,
                                      cfg.examples_per_set, rng);
    model.zero_grad();
    double loss_value;
    {
      Graph g;
      auto bound = bind(g, model);
      Value loss;
      try {
        loss = episode_loss(g, bound, ep, keys, cfg.margin, cfg.mining);
        loss_value = g.value(loss).item();
      } catch (const DegenerateNormalization&) {
        loss_value = std::numeric_limits<double>::quiet_NaN();  // overflowed activations
      }
      if (!std::isfinite(loss_value))
        throw std::runtime_error("non-finite loss at training episode " + std::to_string(e));
      g.backward(loss);
    }
    adam_step(params, adam, cfg);
    LogRow row{e, loss_value, std::nullopt};
    if (e % cfg.val_every == 0 || e == cfg.episodes_train) {
      const double acc = validation_accuracy(model, val_eps);
      row.val_accuracy = acc;
      if (acc > result.best_val_accuracy) {
        result.best_val_accuracy = acc;
        result.best_episode = e;
        result.best = model;
      }
    }
    if (progress) progress(row);
    result.log.push_back(row);
  }
  model.set_requires_grad(false);
  result.best.set_requires_grad(false);
  result.final = std::move(model);
  return result;
}

/// SingleEm baseline: same embedding architecture and loop, no g, singleton
/// labels only.
inline TrainResult train_single_embedding(const SpeakerBank& bank, const SpeakerSplits& splits,
                                          TrainConfig cfg, ModelDims dims = {}) {
  cfg.variant = Variant::kSingleEm;
  return train(init_model(dims, Variant::kSingleEm, derive_seed(cfg.seed, "singleem-init")),
               bank, splits, cfg);
}

}  // namespace compemb
