// tests/synth_test.cpp

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
#include <map>
#include <set>
#include <sstream>

#include "compemb/synth.hpp"

namespace compemb {
namespace {

double norm(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

Vec unit(Vec v) {
  normalize_in_place(v);
  return v;
}

TEST(Bank, RegenerationIsBitIdentical) {
  const SpeakerBank a = make_bank(7, 50, 64, 0.3), b = make_bank(7, 50, 64, 0.3);
  EXPECT_EQ(a.prototypes, b.prototypes);
  EXPECT_NE(a.prototypes, make_bank(8, 50, 64, 0.3).prototypes);
}

TEST(Utterance, NoiselessIsPrototype) {
  const SpeakerBank bank = make_bank(1, 10, 64, 0.0);
  Rng rng(0);
  EXPECT_EQ(synth_utterance(bank, 3, rng), bank.prototypes[3]);
  EXPECT_THROW(synth_utterance(bank, 10, rng), std::out_of_range);
  EXPECT_THROW(synth_utterance(bank, -1, rng), std::out_of_range);
}

TEST(Utterance, DistinctDrawsDiffer) {
  const SpeakerBank bank = make_bank(1, 10, 64, 0.3);
  Rng rng(0);
  EXPECT_NE(synth_utterance(bank, 2, rng), synth_utterance(bank, 2, rng));
}

TEST(Utterance, MeanConvergesToPrototype) {
  const SpeakerBank bank = make_bank(1, 4, 64, 0.3);
  Rng rng(5);
  const int n = 10000;
  Vec mean(64, 0.0);
  for (int i = 0; i < n; ++i) {
    const Vec u = synth_utterance(bank, 1, rng);
    for (std::size_t d = 0; d < 64; ++d) mean[d] += u[d] / n;
  }
  const double tol = 3.0 * 0.3 / std::sqrt(static_cast<double>(n));
  int outside = 0;
  for (std::size_t d = 0; d < 64; ++d) outside += std::abs(mean[d] - bank.prototypes[1][d]) > tol;
  // A 3-sigma band leaves about 0.27% of coordinates outside by chance.
  EXPECT_LE(outside, 2);
}

TEST(Mixture, NoiselessSingletonAndPair) {
  const SpeakerBank bank = make_bank(2, 10, 64, 0.0);
  Rng rng(0);
  const Vec one = synth_mixture(bank, SpeakerSet{4}, rng);
  const Vec want_one = unit(bank.prototypes[4]);
  for (std::size_t d = 0; d < 64; ++d) EXPECT_NEAR(one[d], want_one[d], 1e-15);
  Vec sum = bank.prototypes[1];
  for (std::size_t d = 0; d < 64; ++d) sum[d] += bank.prototypes[6][d];
  const Vec want_two = unit(sum);
  const Vec two = synth_mixture(bank, SpeakerSet{1, 6}, rng);
  for (std::size_t d = 0; d < 64; ++d) EXPECT_NEAR(two[d], want_two[d], 1e-15);
}

TEST(Mixture, AlwaysUnitNorm) {
  const SpeakerBank bank = make_bank(3, 20, 64, 0.3);
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    SpeakerSet t;
    const int k = 1 + static_cast<int>(rng.index(3));
    while (static_cast<int>(t.size()) < k) t.insert(static_cast<int>(rng.index(20)));
    EXPECT_NEAR(norm(synth_mixture(bank, t, rng)), 1.0, 1e-12);
  }
}

TEST(Mixture, EmptySetIsAnError) {
  const SpeakerBank bank = make_bank(3, 20, 64, 0.3);
  Rng rng(1);
  EXPECT_THROW(synth_mixture(bank, SpeakerSet{}, rng), std::invalid_argument);
}

TEST(Mixture, KeyedDrawsIgnoreSpeakerOrder) {
  const SpeakerBank bank = make_bank(3, 20, 64, 0.3);
  const Vec a = synth_mixture_keyed(bank, SpeakerSet(std::vector<int>{9, 2, 5}), 77);
  const Vec b = synth_mixture_keyed(bank, SpeakerSet(std::vector<int>{5, 9, 2}), 77);
  EXPECT_EQ(a, b);
}

TEST(Episode, DefaultShapeCoversTwentyFiveSets) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.3);
  Rng rng(2);
  const Episode ep = sample_episode(bank, {0, 100}, 5, 3, 4, rng);
  EXPECT_EQ(ep.speakers.size(), 5u);
  EXPECT_EQ(ep.enrollments.size(), 5u);
  EXPECT_EQ(ep.examples.size(), 100u);
  std::map<SpeakerSet, int> counts;
  for (const auto& e : ep.examples) {
    ++counts[e.label];
    EXPECT_GE(e.label.size(), 1u);
    EXPECT_LE(e.label.size(), 3u);
  }
  EXPECT_EQ(counts.size(), 25u);
  for (const auto& [s, c] : counts) EXPECT_EQ(c, 4);
  EXPECT_EQ(std::set<int>(ep.speakers.begin(), ep.speakers.end()).size(), 5u);
}

TEST(Episode, SingleCardinalityHasFiveSets) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.3);
  Rng rng(2);
  const Episode ep = sample_episode(bank, {0, 100}, 5, 1, 1, rng);
  EXPECT_EQ(ep.examples.size(), 5u);
}

TEST(Episode, EnrollmentsAreCleanSingles) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.0);
  Rng rng(3);
  const Episode ep = sample_episode(bank, {0, 100}, 5, 3, 1, rng);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(ep.enrollments[i], unit(bank.prototypes[ep.speakers[i]]));
}

TEST(Episode, SpeakersComeFromThePool) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.3);
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    const Episode ep = sample_episode(bank, {40, 10}, 5, 3, 1, rng);
    for (int s : ep.speakers) {
      EXPECT_GE(s, 40);
      EXPECT_LT(s, 50);
    }
  }
}

TEST(Episode, InsufficientSpeakers) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.3);
  Rng rng(3);
  try {
    sample_episode(bank, {0, 4}, 5, 3, 1, rng);
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("insufficient speakers"), std::string::npos);
  }
}

TEST(Episode, Deterministic) {
  const SpeakerBank bank = make_bank(4, 100, 64, 0.3);
  Rng a(9), b(9);
  const Episode x = sample_episode(bank, {0, 100}, 5, 3, 2, a);
  const Episode y = sample_episode(bank, {0, 100}, 5, 3, 2, b);
  EXPECT_EQ(x.speakers, y.speakers);
  ASSERT_EQ(x.examples.size(), y.examples.size());
  for (std::size_t i = 0; i < x.examples.size(); ++i) EXPECT_EQ(x.examples[i].x, y.examples[i].x);
}

TEST(Timeline, NoOverlapTarget) {
  Rng rng(1);
  const Stream s = generate_timeline({0, 50}, 4, 600, 0.0, rng);
  for (const auto& f : s.reference.frames) EXPECT_LE(f.size(), 1u);
}

TEST(Timeline, OverlapShareNearTarget) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    const Stream s = generate_timeline({0, 50}, 4, 1800, 0.19, rng);
    const double share = overlap_share(s.reference);
    EXPECT_GE(share, 0.16);
    EXPECT_LE(share, 0.22);
  }
}

TEST(Timeline, EverySpeakerHasALongTurn) {
  for (int n : {2, 4, 6}) {
    Rng rng(static_cast<std::uint64_t>(n));
    const Stream s = generate_timeline({100, 50}, n, 120.0 * n, 0.19, rng);
    std::map<int, std::size_t> longest;
    for (const Segment& t : s.turns) {
      const SpeakerSet& who = s.reference.frames[t.begin];
      if (who.size() == 1) longest[who[0]] = std::max(longest[who[0]], t.length());
    }
    EXPECT_EQ(static_cast<int>(longest.size()), n);
    for (const auto& [spk, len] : longest) {
      EXPECT_GE(len, 33u) << "speaker " << spk;
      EXPECT_GE(spk, 100);
      EXPECT_LT(spk, 150);
    }
  }
}

TEST(Timeline, AtMostTwoSpeakersAndTurnsTileSpeech) {
  Rng rng(3);
  const Stream s = generate_timeline({0, 50}, 5, 900, 0.3, rng);
  for (const auto& f : s.reference.frames) EXPECT_LE(f.size(), 2u);
  std::size_t covered = 0, speech = 0;
  for (const auto& f : s.reference.frames) speech += !f.empty();
  for (const Segment& t : s.turns) {
    covered += t.length();
    for (std::size_t i = t.begin; i < t.end; ++i)
      EXPECT_EQ(s.reference.frames[i], s.reference.frames[t.begin]);
  }
  EXPECT_EQ(covered, speech);
}

TEST(Timeline, TripleOverlapOnlyBehindFlag) {
  TimelineOptions opt;
  opt.allow_triple_overlap = true;
  Rng rng(4);
  const Stream s = generate_timeline({0, 50}, 5, 1800, 0.4, rng, opt);
  std::size_t triples = 0;
  for (const auto& f : s.reference.frames) triples += f.size() == 3;
  EXPECT_GT(triples, 0u);
}

TEST(Timeline, Deterministic) {
  Rng a(11), b(11);
  const Stream x = generate_timeline({0, 50}, 4, 600, 0.19, a);
  const Stream y = generate_timeline({0, 50}, 4, 600, 0.19, b);
  EXPECT_EQ(x.reference.frames, y.reference.frames);
}

TEST(Timeline, InvalidArguments) {
  Rng rng(0);
  EXPECT_THROW(generate_timeline({0, 50}, 4, 0.0, 0.1, rng), std::invalid_argument);
  EXPECT_THROW(generate_timeline({0, 50}, 4, 100, 1.0, rng), std::invalid_argument);
  EXPECT_THROW(generate_timeline({0, 50}, 4, 100, -0.1, rng), std::invalid_argument);
}

TEST(DetectTurns, ZeroNoiseIsOracle) {
  Rng rng(0);
  const Stream s = generate_timeline({0, 50}, 4, 300, 0.19, rng);
  const auto t = detect_turns(s.reference, s.turns, 0.0, 0, rng);
  ASSERT_EQ(t.size(), s.turns.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(t[i].begin, s.turns[i].begin);
    EXPECT_EQ(t[i].end, s.turns[i].end);
  }
}

TEST(DetectTurns, MissedChangesMergeTurns) {
  Rng rng(0);
  const Stream s = generate_timeline({0, 50}, 4, 600, 0.19, rng);
  const auto t = detect_turns(s.reference, s.turns, 0.5, 3, rng);
  EXPECT_LT(t.size(), s.turns.size());
  for (std::size_t i = 1; i < t.size(); ++i) EXPECT_LE(t[i - 1].end, t[i].begin);
  for (const Segment& x : t) EXPECT_GT(x.length(), 0u);
}

TEST(Rttm, RoundTrip) {
  Rng rng(6);
  const Stream s = generate_timeline({10, 50}, 4, 300, 0.19, rng);
  std::stringstream ss;
  write_rttm(ss, s.reference, "meeting");
  const auto back = read_rttm(ss, 0.1, s.reference.size());
  ASSERT_EQ(back.count("meeting"), 1u);
  EXPECT_EQ(back.at("meeting").frames, s.reference.frames);
}

TEST(Rttm, AcceptsTenFieldLinesAndRejectsGarbage) {
  std::istringstream ok("SPEAKER f 1 0.50 1.00 <NA> <NA> 3 <NA> <NA>\n");
  const auto t = read_rttm(ok, 0.1);
  EXPECT_EQ(t.at("f").size(), 15u);
  EXPECT_TRUE(t.at("f").frames[5].contains(3));
  std::istringstream bad("SPEAKER f 1 zero 1.0 3\n");
  EXPECT_THROW(read_rttm(bad, 0.1), std::runtime_error);
}

}  // namespace
}  // namespace compemb
