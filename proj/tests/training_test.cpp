// tests/training_test.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "compemb/training.hpp"
#include "oracles.hpp"

namespace compemb {
namespace {

TEST(Triplet, HingeExamples) {
  EXPECT_DOUBLE_EQ(triplet_hinge(0.2, 0.5, 0.1), 0.0);
  EXPECT_NEAR(triplet_hinge(0.5, 0.2, 0.1), 0.4, 1e-15);
  const std::vector<double> a{1, 2}, n{1.1, 2.2};
  EXPECT_NEAR(triplet_loss(a, a, n, 0.1), std::max(0.0, 0.1 - 0.05), 1e-15);
  EXPECT_THROW(triplet_loss(a, a, std::vector<double>{1}, 0.1), std::invalid_argument);
}

TEST(Triplet, NeverNegative) {
  Rng rng(0);
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> a(3), p(3), n(3);
    for (auto* v : {&a, &p, &n})
      for (double& x : *v) x = rng.normal();
    EXPECT_GE(triplet_loss(a, p, n, 0.1), 0.0);
  }
}

TEST(EnrollmentTable, TwentyFiveEntriesWithRecursiveComposition) {
  const SpeakerBank bank = make_bank(1, 50, 64, 0.3);
  Rng rng(1);
  const Episode ep = sample_episode(bank, {0, 50}, 5, 3, 1, rng);
  const CompositionalModel m = init_model({}, Variant::kCmpEm, 2, 0.3);
  const EnrollmentTable t = build_enrollment_table(m, ep);
  ASSERT_EQ(t.size(), 25u);
  EXPECT_EQ(t.keys, enumerate_subsets(5, 3));
  const auto fa = embed_f(m, ep.enrollments[0]), fb = embed_f(m, ep.enrollments[1]),
             fc = embed_f(m, ep.enrollments[2]);
  EXPECT_EQ(t.at(SpeakerSet{1}), fb);
  EXPECT_EQ(t.at((SpeakerSet{0, 1, 2})), compose_g(m, fc, compose_g(m, fb, fa)));
  const auto want = oracle::g(m, oracle::f(m, ep.enrollments[2]),
                              oracle::g(m, oracle::f(m, ep.enrollments[1]), oracle::f(m, ep.enrollments[0])));
  for (std::size_t i = 0; i < want.size(); ++i)
    EXPECT_NEAR(t.at((SpeakerSet{0, 1, 2}))[i], want[i], 1e-12);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Tensor p = Tensor::vector({1.0});
  p.grad = std::vector<double>{2.0};
  Tensor* ps[] = {&p};
  AdamState s = make_adam_state(ps);
  adam_step(ps, s, 3e-4, 0.9, 0.999, 1e-8);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  EXPECT_NEAR(p.data[0], 1.0 - 3e-4 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.data[0], 0.9997, 1e-10);
}

TEST(Adam, ZeroGradientLeavesParameters) {
  Tensor p = Tensor::vector({1.0, -2.0});
  p.grad = std::vector<double>{0.0, 0.0};
  Tensor* ps[] = {&p};
  AdamState s = make_adam_state(ps);
  for (int i = 0; i < 10; ++i) adam_step(ps, s, 3e-4, 0.9, 0.999, 1e-8);
  EXPECT_EQ(p.data, (std::vector<double>{1.0, -2.0}));
}

TEST(Adam, SymmetricParametersUpdateIdentically) {
  Tensor a = Tensor::vector({0.5}), b = Tensor::vector({0.5});
  Tensor* ps[] = {&a, &b};
  AdamState s = make_adam_state(ps);
  for (int i = 0; i < 5; ++i) {
    a.grad = std::vector<double>{0.1 * i - 0.2};
    b.grad = a.grad;
    adam_step(ps, s, 1e-2, 0.9, 0.999, 1e-8);
  }
  EXPECT_EQ(a.data, b.data);
}

TEST(Adam, ShapeMismatch) {
  Tensor p = Tensor::vector({1.0, 2.0});
  p.grad = std::vector<double>{1.0};
  Tensor* ps[] = {&p};
  AdamState s = make_adam_state(ps);
  EXPECT_THROW(adam_step(ps, s, 1e-3, 0.9, 0.999, 1e-8), std::invalid_argument);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr = -1;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.margin = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = TrainConfig{};
  c.episodes_val = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

struct Fixture {
  SpeakerSplits splits{{0, 200}, {200, 50}, {250, 50}};
  SpeakerBank bank = make_bank(1, 300, 64, 0.3);
};

TEST(Train, ZeroEpisodesLeavesModelUnchanged) {
  Fixture fx;
  TrainConfig cfg;
  cfg.episodes_train = 0;
  cfg.episodes_val = 5;
  const CompositionalModel init = init_model({}, Variant::kCmpEm, 3);
  const TrainResult r = train(init, fx.bank, fx.splits, cfg);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(model_to_string(r.final), model_to_string(init));
  EXPECT_EQ(model_to_string(r.best), model_to_string(init));
}

TEST(Train, FirstEpisodeLossFiniteAndPositive) {
  Fixture fx;
  TrainConfig cfg;
  cfg.episodes_train = 1;
  cfg.episodes_val = 2;
  const TrainResult r = train(init_model({}, Variant::kCmpEm, 3), fx.bank, fx.splits, cfg);
  ASSERT_EQ(r.log.size(), 1u);
  EXPECT_TRUE(std::isfinite(r.log[0].loss));
  EXPECT_GT(r.log[0].loss, 0.0);
}

TEST(Train, GradientReachesFThroughG) {
  Fixture fx;
  Rng rng(5);
  const Episode ep = sample_episode(fx.bank, fx.splits.train, 5, 3, 1, rng);
  CompositionalModel m = init_model({}, Variant::kCmpEm, 4);
  m.set_requires_grad(true);
  m.zero_grad();
  Graph g;
  const auto bound = bind(g, m);
  std::vector<Value> singles;
  for (const Vec& x : ep.enrollments) singles.push_back(embed_f(g, bound, g.constant(x)));
  const auto keys = enumerate_subsets(5, 3);
  const auto table = build_enrollment_values(g, bound, singles, keys);
  // The anchor is a constant so f only receives gradient through g's inputs.
  const std::size_t pos = 10;  // a 2-set
  ASSERT_EQ(keys[pos].size(), 2u);
  std::vector<double> anchor = embed_f(m, ep.enrollments[keys[pos][0]]);
  for (double& a : anchor) a *= 3.0;
  const Value loss = anchor_loss(g, g.constant(anchor), table, pos, 0.1, Mining::kAveragedActive);
  ASSERT_GT(g.value(loss).item(), 0.0);
  g.backward(loss);
  auto nonzero = [](const Tensor& t) {
    for (double x : *t.grad)
      if (x != 0.0) return true;
    return false;
  };
  EXPECT_TRUE(nonzero(m.g->w1));
  EXPECT_TRUE(nonzero(m.g->w2));
  EXPECT_TRUE(nonzero(m.f_w1));
  EXPECT_TRUE(nonzero(m.f_b2));
}

TEST(Train, ShortRunLearnsAndIsDeterministic) {
  Fixture fx;
  TrainConfig cfg;
  cfg.episodes_train = 600;
  cfg.val_every = 200;
  cfg.episodes_val = 40;
  cfg.seed = 3;
  const TrainResult a = train(init_model({}, Variant::kCmpEm, 3), fx.bank, fx.splits, cfg);
  const TrainResult b = train(init_model({}, Variant::kCmpEm, 3), fx.bank, fx.splits, cfg);
  std::ostringstream la, lb;
  write_log_csv(la, a.log);
  write_log_csv(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(model_to_string(a.best), model_to_string(b.best));
  EXPECT_GE(a.best_val_accuracy, 40.0);  // 10x the 4% guess rate
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 60; ++i) {
    first += a.log[static_cast<std::size_t>(i)].loss;
    last += a.log[a.log.size() - 1 - static_cast<std::size_t>(i)].loss;
  }
  EXPECT_LT(last, first);
  EXPECT_EQ(la.str().substr(0, 29), "episode_index,loss,val_accura");
}

TEST(Train, SingleEmHasNoComposerAndLearnsSingletons) {
  Fixture fx;
  TrainConfig cfg;
  cfg.episodes_train = 300;
  cfg.val_every = 300;
  cfg.episodes_val = 40;
  const TrainResult r = train_single_embedding(fx.bank, fx.splits, cfg);
  EXPECT_FALSE(r.best.g.has_value());
  EXPECT_EQ(r.best.variant, Variant::kSingleEm);
  EXPECT_GT(r.best_val_accuracy, 60.0);  // given-k guess for singletons is 20%
}

TEST(Train, NonFiniteLossAbortsWithEpisodeIndex) {
  Fixture fx;
  TrainConfig cfg;
  cfg.episodes_train = 5;
  cfg.episodes_val = 2;
  // After episode 2 the training speakers start producing non-finite features.
  auto poison = [&fx](const LogRow& row) {
    if (row.episode != 2) return;
    for (int id = 0; id < 200; ++id) fx.bank.prototypes[static_cast<std::size_t>(id)][0] = std::numeric_limits<double>::infinity();
  };
  try {
    train(init_model({}, Variant::kCmpEm, 3), fx.bank, fx.splits, cfg, poison);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_STREQ(e.what(), "non-finite loss at training episode 3");
  }
}

}  // namespace
}  // namespace compemb
