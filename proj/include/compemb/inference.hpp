// compemb/inference.hpp

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

// Speaker-set inference by exhaustive search over enrollments and
// pseudo-enrollments, the single-embedding and guessing baselines, and the
// four accuracy measures used to compare them.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "compemb/nets.hpp"
#include "compemb/rng.hpp"
#include "compemb/speaker_set.hpp"
#include "compemb/synth.hpp"
#include "compemb/tensor.hpp"

namespace compemb {

// ---------------------------------------------------------------------------
// Enrollment tables

/// e_T for every subset T of the episode speakers with 1 <= |T| <= max_card,
/// keyed by positions into the episode speaker list, in canonical order.
struct EnrollmentTable {
  std::vector<SpeakerSet> keys;
  std::vector<Vec> embeddings;
  int max_card = 0;
  Variant variant = Variant::kCmpEm;

  std::size_t size() const { return keys.size(); }
  const Vec& at(const SpeakerSet& t) const {
    auto it = std::lower_bound(keys.begin(), keys.end(), t);
    if (it == keys.end() || *it != t) throw std::out_of_range("no table entry for " + t.str());
    return embeddings[static_cast<std::size_t>(it - keys.begin())];
  }
};

/// Graph form of the recursive table: singletons are f(enrollment), a larger
/// set T is g(f(x_last), e_{T without last}) with `last` its largest member.
/// Returned values are in canonical subset order.
inline std::vector<Value> build_enrollment_values(Graph& graph, const BoundModel& bound,
                                                  std::span<const Value> singles,
                                                  const std::vector<SpeakerSet>& keys) {
  std::vector<Value> out;
  out.reserve(keys.size());
  std::map<SpeakerSet, Value> done;
  for (const SpeakerSet& t : keys) {
    Value v;
    if (t.size() == 1) {
      v = singles[static_cast<std::size_t>(t[0])];
    } else {
      const int last = t.ids().back();
      v = compose_g(graph, bound, singles[static_cast<std::size_t>(last)],
                    done.at(t.without_last()));
    }
    done.emplace(t, v);
    out.push_back(v);
  }
  return out;
}

inline EnrollmentTable build_enrollment_table(const CompositionalModel& model,
                                              std::span<const Vec> enrollments,
                                              int max_card) {
  if (!model.g) throw std::logic_error("build_enrollment_table: model has no g");
  EnrollmentTable table;
  table.max_card = std::min<int>(max_card, static_cast<int>(enrollments.size()));
  table.variant = model.variant;
  table.keys = enumerate_subsets(static_cast<int>(enrollments.size()), table.max_card);
  Graph graph;
  auto bound = bind(graph, model);
  std::vector<Value> singles;
  for (const Vec& x : enrollments) singles.push_back(embed_f(graph, bound, graph.constant(x)));
  for (Value v : build_enrollment_values(graph, bound, singles, table.keys))
    table.embeddings.push_back(graph.value(v).data);
  return table;
}

inline EnrollmentTable build_enrollment_table(const CompositionalModel& model,
                                              const Episode& ep) {
  return build_enrollment_table(model, ep.enrollments, ep.max_card);
}

/// Single-embedding table: e_T is the mean of the singleton embeddings in T.
inline EnrollmentTable centroid_table(std::span<const Vec> singleton_embeddings, int max_card) {
  EnrollmentTable table;
  table.max_card = std::min<int>(max_card, static_cast<int>(singleton_embeddings.size()));
  table.variant = Variant::kSingleEm;
  table.keys = enumerate_subsets(static_cast<int>(singleton_embeddings.size()), table.max_card);
  for (const SpeakerSet& t : table.keys) {
    Vec c(singleton_embeddings[0].size(), 0.0);
    for (int s : t)
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += singleton_embeddings[s][i];
    for (double& x : c) x /= static_cast<double>(t.size());
    table.embeddings.push_back(std::move(c));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Distances and argmin

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline Vec unit(std::span<const double> v) {
  Vec out(v.begin(), v.end());
  normalize_in_place(out);
  return out;
}

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (!(aa >= 1e-24 && bb >= 1e-24)) throw std::domain_error("degenerate normalization");
  return ab / std::sqrt(aa * bb);
}

struct Prediction {
  SpeakerSet predicted_set;
  std::vector<std::pair<SpeakerSet, double>> distances;  // candidates searched
};

/// How the query and table embeddings are compared.
enum class Comparison {
  kRaw,       // squared Euclidean on the embeddings as they are
  kUnitNorm,  // squared Euclidean after scaling both sides to unit length
};

inline Comparison default_comparison(Variant v) {
  // CmpEm normalizes just before comparing; CmpEmL2 outputs are already unit
  // length; single-embedding centroids are compared as they are.
  return v == Variant::kCmpEm ? Comparison::kUnitNorm : Comparison::kRaw;
}

/// Argmin of the distance from `query` to each table entry whose cardinality
/// passes `keep`. Candidates are scanned in canonical order with a strict
/// comparison, so ties go to the smaller, then lexicographically first, set.
template <class Keep>
Prediction argmin_over_table(const EnrollmentTable& table, std::span<const double> query,
                             Comparison cmp, Keep keep) {
  Prediction p;
  Vec q(query.begin(), query.end());
  if (cmp == Comparison::kUnitNorm) normalize_in_place(q);
  double best = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> best_idx;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!keep(table.keys[i])) continue;
    const double d = cmp == Comparison::kUnitNorm
                         ? squared_distance(q, unit(table.embeddings[i]))
                         : squared_distance(q, table.embeddings[i]);
    p.distances.emplace_back(table.keys[i], d);
    if (d < best || !best_idx) {
      best = d;
      best_idx = i;
    }
  }
  if (!best_idx) throw std::invalid_argument("argmin over an empty candidate set");
  p.predicted_set = table.keys[*best_idx];
  return p;
}

inline Prediction infer_from_embedding(const EnrollmentTable& table,
                                       std::span<const double> fx, Comparison cmp) {
  return argmin_over_table(table, fx, cmp, [](const SpeakerSet&) { return true; });
}

inline Prediction infer_set(const CompositionalModel& model, const EnrollmentTable& table,
                            std::span<const double> x) {
  return infer_from_embedding(table, embed_f(model, x), default_comparison(model.variant));
}

inline void check_cardinality(int k, int max_card) {
  if (k < 1 || k > max_card)
    throw std::out_of_range("cardinality " + std::to_string(k) + " outside [1, " +
                            std::to_string(max_card) + "]");
}

inline Prediction infer_set_given_k(const CompositionalModel& model,
                                    const EnrollmentTable& table, std::span<const double> x,
                                    int k) {
  check_cardinality(k, table.max_card);
  return argmin_over_table(table, embed_f(model, x), default_comparison(model.variant),
                           [k](const SpeakerSet& t) { return static_cast<int>(t.size()) == k; });
}

/// Single-embedding search modes.
struct SearchAll {
  int max_card = 3;
};
struct TopK {
  int k = 1;
};

/// SearchAll: argmin over centroids of singleton embeddings for every subset.
/// TopK: the k singletons nearest to f(x) (ties to the lower position).
inline Prediction single_em_infer_embedding(std::span<const Vec> singleton_embeddings,
                                            std::span<const double> fx,
                                            std::variant<SearchAll, TopK> mode,
                                            Comparison cmp = Comparison::kRaw) {
  const int n = static_cast<int>(singleton_embeddings.size());
  if (auto* all = std::get_if<SearchAll>(&mode)) {
    return infer_from_embedding(centroid_table(singleton_embeddings, all->max_card), fx, cmp);
  }
  const int k = std::get<TopK>(mode).k;
  check_cardinality(k, n);
  Vec q(fx.begin(), fx.end());
  if (cmp == Comparison::kUnitNorm) normalize_in_place(q);
  Prediction p;
  std::vector<std::pair<double, int>> order;
  for (int s = 0; s < n; ++s) {
    const double d = cmp == Comparison::kUnitNorm
                         ? squared_distance(q, unit(singleton_embeddings[s]))
                         : squared_distance(q, singleton_embeddings[s]);
    order.emplace_back(d, s);
    p.distances.emplace_back(SpeakerSet{s}, d);
  }
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<int> chosen;
  for (int i = 0; i < k; ++i) chosen.push_back(order[i].second);
  p.predicted_set = SpeakerSet(std::move(chosen));
  return p;
}

inline std::vector<Vec> embed_all(const CompositionalModel& model, std::span<const Vec> xs) {
  std::vector<Vec> out;
  out.reserve(xs.size());
  for (const Vec& x : xs) out.push_back(embed_f(model, x));
  return out;
}

inline Prediction single_em_infer(const CompositionalModel& f_model,
                                  std::span<const Vec> enrollments, std::span<const double> x,
                                  std::variant<SearchAll, TopK> mode) {
  return single_em_infer_embedding(embed_all(f_model, enrollments), embed_f(f_model, x), mode);
}

// ---------------------------------------------------------------------------
// Set predictors used by the evaluation harness

class SetPredictor {
 public:
  virtual ~SetPredictor() = default;
  virtual std::string name() const = 0;
  /// Called once per episode before any prediction.
  virtual void prepare(const Episode& ep) = 0;
  virtual SpeakerSet predict(const Vec& x) = 0;
  virtual SpeakerSet predict_given_k(const Vec& x, int k) = 0;
};

class CompositionalPredictor final : public SetPredictor {
 public:
  explicit CompositionalPredictor(const CompositionalModel& m) : model_(&m) {}
  std::string name() const override {
    return model_->variant == Variant::kCmpEmL2 ? "CmpEmL2" : "CmpEm";
  }
  void prepare(const Episode& ep) override { table_ = build_enrollment_table(*model_, ep); }
  SpeakerSet predict(const Vec& x) override { return infer_set(*model_, table_, x).predicted_set; }
  SpeakerSet predict_given_k(const Vec& x, int k) override {
    return infer_set_given_k(*model_, table_, x, k).predicted_set;
  }

 private:
  const CompositionalModel* model_;
  EnrollmentTable table_;
};

class SingleEmPredictor final : public SetPredictor {
 public:
  explicit SingleEmPredictor(const CompositionalModel& m, Comparison cmp = Comparison::kRaw)
      : model_(&m), cmp_(cmp) {}
  std::string name() const override { return "SingleEm"; }
  void prepare(const Episode& ep) override {
    singles_ = embed_all(*model_, ep.enrollments);
    table_ = centroid_table(singles_, ep.max_card);
  }
  SpeakerSet predict(const Vec& x) override {
    return infer_from_embedding(table_, embed_f(*model_, x), cmp_).predicted_set;
  }
  SpeakerSet predict_given_k(const Vec& x, int k) override {
    return single_em_infer_embedding(singles_, embed_f(*model_, x), TopK{k}, cmp_).predicted_set;
  }

 private:
  const CompositionalModel* model_;
  Comparison cmp_;
  std::vector<Vec> singles_;
  EnrollmentTable table_;
};

/// Uniform draw over the valid label space of each query.
class GuessPredictor final : public SetPredictor {
 public:
  explicit GuessPredictor(std::uint64_t seed) : rng_(derive_seed(seed, "guess")) {}
  std::string name() const override { return "Guess"; }
  void prepare(const Episode& ep) override {
    all_ = enumerate_subsets(ep.num_speakers(), ep.max_card);
  }
  SpeakerSet predict(const Vec&) override { return all_[rng_.index(all_.size())]; }
  SpeakerSet predict_given_k(const Vec&, int k) override {
    std::vector<const SpeakerSet*> of_k;
    for (const auto& t : all_)
      if (static_cast<int>(t.size()) == k) of_k.push_back(&t);
    return *of_k[rng_.index(of_k.size())];
  }

 private:
  Rng rng_;
  std::vector<SpeakerSet> all_;
};

// ---------------------------------------------------------------------------
// Evaluation

struct Tally {
  long long correct = 0;
  long long total = 0;
  void add(bool ok) {
    correct += ok;
    ++total;
  }
  double percent() const {
    return total ? 100.0 * static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
};

/// Accuracies of one predictor.
struct ModelMetrics {
  std::string model;
  Tally overall;                    // set identification, |T| unknown
  std::map<int, Tally> by_card;     // same, split by the true |T|
  Tally cardinality;                // |T| estimation
  std::map<int, Tally> given_card;  // set identification with |T| given
};

struct MetricsReport {
  int max_card = 3;
  std::vector<ModelMetrics> models;

  const ModelMetrics& get(const std::string& name) const {
    for (const auto& m : models)
      if (m.model == name) return m;
    throw std::out_of_range("no metrics for model " + name);
  }
};

inline MetricsReport evaluate_episode_batch(std::span<SetPredictor* const> predictors,
                                            std::span<const Episode> episodes) {
  if (episodes.empty()) throw std::invalid_argument("evaluate: empty episode list");
  MetricsReport report;
  report.max_card = episodes.front().max_card;
  for (SetPredictor* p : predictors) {
    ModelMetrics mm;
    mm.model = p->name();
    for (const Episode& ep : episodes) {
      p->prepare(ep);
      for (const Example& ex : ep.examples) {
        const int k = static_cast<int>(ex.label.size());
        const SpeakerSet pred = p->predict(ex.x);
        const bool ok = pred == ex.label;
        mm.overall.add(ok);
        mm.by_card[k].add(ok);
        mm.cardinality.add(pred.size() == ex.label.size());
        mm.given_card[k].add(p->predict_given_k(ex.x, k) == ex.label);
      }
    }
    report.models.push_back(std::move(mm));
  }
  return report;
}

/// Layout: one row per measure and cardinality stratum, one column per model.
inline void write_report_text(std::ostream& os, const MetricsReport& r) {
  auto row = [&](const std::string& label, auto get) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-8s", label.c_str());
    os << buf;
    for (const auto& m : r.models) {
      std::snprintf(buf, sizeof buf, " %9.1f", get(m));
      os << buf;
    }
    os << '\n';
  };
  char buf[64];
  os << "#spkrs  ";
  for (const auto& m : r.models) {
    std::snprintf(buf, sizeof buf, " %9s", m.model.c_str());
    os << buf;
  }
  os << '\n';
  os << "Speaker set identification when |T| is unknown\n";
  row("<=" + std::to_string(r.max_card), [](const ModelMetrics& m) { return m.overall.percent(); });
  for (int k = 1; k <= r.max_card; ++k)
    row(std::to_string(k), [k](const ModelMetrics& m) {
      auto it = m.by_card.find(k);
      return it == m.by_card.end() ? 0.0 : it->second.percent();
    });
  os << "Speaker set size estimation\n";
  row("<=" + std::to_string(r.max_card),
      [](const ModelMetrics& m) { return m.cardinality.percent(); });
  os << "Speaker set identification when |T| is given\n";
  for (int k = 1; k <= r.max_card; ++k)
    row(std::to_string(k), [k](const ModelMetrics& m) {
      auto it = m.given_card.find(k);
      return it == m.given_card.end() ? 0.0 : it->second.percent();
    });
}

inline void write_report_csv(std::ostream& os, const MetricsReport& r) {
  os << "mode,cardinality";
  for (const auto& m : r.models) os << ',' << m.model;
  os << '\n';
  char buf[32];
  auto emit = [&](const std::string& mode, const std::string& card, auto get) {
    os << mode << ',' << card;
    for (const auto& m : r.models) {
      std::snprintf(buf, sizeof buf, ",%.4f", get(m));
      os << buf;
    }
    os << '\n';
  };
  emit("set_unknown_k", "all", [](const ModelMetrics& m) { return m.overall.percent(); });
  for (int k = 1; k <= r.max_card; ++k)
    emit("set_unknown_k", std::to_string(k), [k](const ModelMetrics& m) {
      auto it = m.by_card.find(k);
      return it == m.by_card.end() ? 0.0 : it->second.percent();
    });
  emit("set_size", "all", [](const ModelMetrics& m) { return m.cardinality.percent(); });
  for (int k = 1; k <= r.max_card; ++k)
    emit("set_given_k", std::to_string(k), [k](const ModelMetrics& m) {
      auto it = m.given_card.find(k);
      return it == m.given_card.end() ? 0.0 : it->second.percent();
    });
}

}  // namespace compemb
