// tests/config_test.cpp

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

#include <sstream>

#include "compemb/config.hpp"

namespace compemb {
namespace {

TEST(RunConfig, DefaultsResolve) {
  const RunConfig c = RunConfig::defaults();
  const TrainConfig t = train_config(c);
  EXPECT_EQ(t.episodes_train, 20000);
  EXPECT_DOUBLE_EQ(t.lr, 3e-4);
  EXPECT_DOUBLE_EQ(t.margin, 0.1);
  EXPECT_EQ(t.variant, Variant::kCmpEm);
  const BenchmarkConfig b = benchmark_config(c);
  EXPECT_DOUBLE_EQ(b.overlap_fraction, 0.19);
  EXPECT_DOUBLE_EQ(b.diarization.long_turn_s, 3.3);
  EXPECT_FALSE(b.diarization.clustering.preference.has_value());
  EXPECT_EQ(speaker_bank(c).size(), 2600);
}

TEST(RunConfig, ParsesCommentsAndWhitespace) {
  RunConfig c = RunConfig::defaults();
  std::istringstream in("# comment\n\n  lr = 0.001  # trailing\nvariant=cmpeml2\r\n");
  c.parse(in, "test");
  EXPECT_DOUBLE_EQ(c.get_double("lr"), 0.001);
  EXPECT_EQ(variant_of(c), Variant::kCmpEmL2);
}

TEST(RunConfig, UnknownKeyIsAnError) {
  RunConfig c = RunConfig::defaults();
  std::istringstream in("learning_rate=0.1\n");
  try {
    c.parse(in, "file.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unknown key 'learning_rate'"), std::string::npos);
  }
  EXPECT_THROW(c.set_assignment("no_equals_sign"), ConfigError);
}

TEST(RunConfig, TypedValidation) {
  RunConfig c = RunConfig::defaults();
  c.set("lr", "-1");
  EXPECT_THROW(train_config(c), ConfigError);
  c = RunConfig::defaults();
  c.set("episodes_train", "many");
  EXPECT_THROW(train_config(c), ConfigError);
  c = RunConfig::defaults();
  c.set("variant", "lstm");
  EXPECT_THROW(train_config(c), ConfigError);
  c = RunConfig::defaults();
  c.set("mining", "semi-hard");
  EXPECT_THROW(train_config(c), ConfigError);
  c = RunConfig::defaults();
  c.set("ap_preference", "-0.5");
  EXPECT_DOUBLE_EQ(*benchmark_config(c).diarization.clustering.preference, -0.5);
  c.set("overlap_fraction", "1.5");
  EXPECT_THROW(benchmark_config(c), ConfigError);
  c = RunConfig::defaults();
  c.set("seed", "-3");
  EXPECT_THROW(c.get_u64("seed"), ConfigError);
}

TEST(RunConfig, ResolvedOutputReparsesToSameConfig) {
  RunConfig c = RunConfig::defaults();
  c.set("seed", "7");
  c.set("streams", "3");
  std::istringstream in(c.str());
  RunConfig back = RunConfig::defaults();
  back.parse(in, "resolved");
  EXPECT_EQ(back.str(), c.str());
  EXPECT_EQ(back.get("seed"), "7");
}

}  // namespace
}  // namespace compemb
