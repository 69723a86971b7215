// tests/gradcheck_test.cpp

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

#include <set>

#include "compemb/gradcheck.hpp"

namespace compemb {
namespace {

TEST(GradCheck, EveryOpPassesAtDefaultTolerance) {
  const GradCheckReport r = run_gradcheck(0);
  for (const auto& e : r.ops) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
  for (const auto& e : r.networks) EXPECT_LT(e.max_rel_error, 1e-4) << e.name;
  EXPECT_TRUE(r.passed());
}

TEST(GradCheck, ReportListsEveryOpOnce) {
  const GradCheckReport r = run_gradcheck(3, 1e-4, 0);
  std::multiset<std::string> names;
  for (const auto& e : r.ops) names.insert(e.name);
  ASSERT_EQ(r.ops.size(), std::size(kAllOps));
  for (OpKind k : kAllOps) EXPECT_EQ(names.count(std::string(op_name(k))), 1u);
}

TEST(GradCheck, CorruptedBackwardRuleFails) {
  for (OpKind k : {OpKind::kTanh, OpKind::kL2Normalize, OpKind::kMatmul}) {
    const GradCheckReport r = run_gradcheck(0, 1e-4, 1, k);
    EXPECT_FALSE(r.passed()) << op_name(k);
  }
}

TEST(GradCheck, SeveralSeedsPass) {
  for (std::uint64_t seed : {1u, 2u, 17u}) EXPECT_TRUE(run_gradcheck(seed, 1e-4, 2).passed());
}

TEST(GradCheck, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-3);  // denominator floored at 1e-6
}

}  // namespace
}  // namespace compemb
