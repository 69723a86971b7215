// tests/tensor_test.cpp

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
#include <set>
#include <string>

#include "compemb/tensor.hpp"

namespace compemb {
namespace {

std::vector<double> eval1(OpKind k, const Tensor& a, double param = 0.0) {
  const Tensor* in[] = {&a};
  return op_apply(k, in, param).data;
}

std::vector<double> eval2(OpKind k, const Tensor& a, const Tensor& b) {
  const Tensor* in[] = {&a, &b};
  return op_apply(k, in, 0.0).data;
}

TEST(Forward, L2NormalizeThreeFour) {
  const auto y = eval1(OpKind::kL2Normalize, Tensor::vector({3, 4}));
  EXPECT_DOUBLE_EQ(y[0], 0.6);
  EXPECT_DOUBLE_EQ(y[1], 0.8);
}

TEST(Forward, SquaredEuclideanOfUnitAxes) {
  const auto d = eval2(OpKind::kSquaredEuclidean, Tensor::vector({1, 0}), Tensor::vector({0, 1}));
  ASSERT_EQ(d.size(), 1u);
  EXPECT_DOUBLE_EQ(d[0], 2.0);
}

TEST(Forward, MatmulIdentity) {
  const auto y = eval2(OpKind::kMatmul, Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({5, 7}));
  EXPECT_EQ(y, (std::vector<double>{5, 7}));
}

TEST(Forward, MatmulMatrixMatrix) {
  const auto y = eval2(OpKind::kMatmul, Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}),
                       Tensor::matrix(3, 1, {1, 0, -1}));
  EXPECT_EQ(y, (std::vector<double>{-2, -2}));
}

TEST(Forward, ElementwiseAndReductions) {
  const Tensor a = Tensor::vector({-1, 2}), b = Tensor::vector({3, -4});
  EXPECT_EQ(eval2(OpKind::kAdd, a, b), (std::vector<double>{2, -2}));
  EXPECT_EQ(eval2(OpKind::kSub, a, b), (std::vector<double>{-4, 6}));
  EXPECT_EQ(eval2(OpKind::kMul, a, b), (std::vector<double>{-3, -8}));
  EXPECT_EQ(eval1(OpKind::kRelu, a), (std::vector<double>{0, 2}));
  EXPECT_DOUBLE_EQ(eval1(OpKind::kTanh, a)[1], std::tanh(2.0));
  EXPECT_DOUBLE_EQ(eval1(OpKind::kMean, a)[0], 0.5);
  EXPECT_DOUBLE_EQ(eval1(OpKind::kScalarMax0, Tensor::scalar(-0.3))[0], 0.0);
  EXPECT_DOUBLE_EQ(eval1(OpKind::kScalarMax0, Tensor::scalar(0.3))[0], 0.3);
  EXPECT_EQ(eval1(OpKind::kScale, a, -2.0), (std::vector<double>{2, -4}));
}

TEST(Forward, ShapeMismatchNamesOpAndShapes) {
  try {
    eval2(OpKind::kAdd, Tensor::vector({1, 2}), Tensor::vector({1, 2, 3}));
    FAIL() << "expected an error";
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(eval2(OpKind::kMatmul, Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({1, 2, 3})),
               std::invalid_argument);
}

TEST(Forward, DegenerateNormalization) {
  try {
    eval1(OpKind::kL2Normalize, Tensor::vector({1e-13, 0}));
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_STREQ(e.what(), "degenerate normalization");
  }
}

TEST(Backward, MeanOfSquareGivesW) {
  Tensor w = Tensor::vector({1, 2});
  w.requires_grad = true;
  Graph g;
  const Value v = g.leaf(w);
  g.backward(g.mean(g.mul(v, v)));
  ASSERT_TRUE(w.grad);
  EXPECT_DOUBLE_EQ((*w.grad)[0], 1.0);
  EXPECT_DOUBLE_EQ((*w.grad)[1], 2.0);
}

TEST(Backward, AccumulatesAcrossCallsUntilReset) {
  Tensor w = Tensor::vector({1, 2});
  w.requires_grad = true;
  for (int i = 0; i < 2; ++i) {
    Graph g;
    const Value v = g.leaf(w);
    g.backward(g.mean(g.mul(v, v)));
  }
  EXPECT_DOUBLE_EQ((*w.grad)[1], 4.0);
  w.zero_grad();
  EXPECT_DOUBLE_EQ((*w.grad)[1], 0.0);
}

TEST(Backward, ReusedLeafAccumulatesWithinOneGraph) {
  Tensor w = Tensor::vector({3});
  w.requires_grad = true;
  Graph g;
  const Value v = g.leaf(w);
  g.backward(g.mean(g.add(v, g.scale(v, 2.0))));
  EXPECT_DOUBLE_EQ((*w.grad)[0], 3.0);
}

TEST(Backward, DetachedLossLeavesGradZero) {
  Tensor w = Tensor::vector({1, 2});
  w.requires_grad = true;
  w.zero_grad();
  Tensor other = Tensor::vector({5, 6});
  Graph g;
  g.leaf(w);
  const Value o = g.leaf(other);
  g.backward(g.mean(g.mul(o, o)));
  EXPECT_EQ(*w.grad, (std::vector<double>{0, 0}));
}

TEST(Backward, NonScalarLossIsAnError) {
  Tensor w = Tensor::vector({1, 2});
  w.requires_grad = true;
  Graph g;
  const Value v = g.leaf(w);
  EXPECT_THROW(g.backward(g.tanh(v)), std::invalid_argument);
}

TEST(Backward, L2NormalizeGradientIsOrthogonalToOutput) {
  Tensor w = Tensor::vector({3, 4});
  w.requires_grad = true;
  Graph g;
  const Value z = g.l2_normalize(g.leaf(w));
  const Value c = g.constant(Tensor::vector({0.3, -1.1}));
  g.backward(g.mean(g.mul(z, c)));
  // d/dw of c.(w/|w|) is orthogonal to w.
  EXPECT_NEAR((*w.grad)[0] * 3 + (*w.grad)[1] * 4, 0.0, 1e-15);
}

TEST(Backward, ConcatRoutesGradientsToParts) {
  Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3});
  a.requires_grad = b.requires_grad = true;
  Graph g;
  const Value parts[] = {g.leaf(a), g.leaf(b)};
  const Value c = g.concat(parts);
  const Value w = g.constant(Tensor::vector({1, 2, 3}));
  g.backward(g.mean(g.mul(c, w)));
  EXPECT_DOUBLE_EQ((*a.grad)[1], 2.0 / 3.0);
  EXPECT_DOUBLE_EQ((*b.grad)[0], 1.0);
}

TEST(Graph, OpNamesAreDistinct) {
  std::set<std::string_view> names;
  for (OpKind k : kAllOps) names.insert(op_name(k));
  EXPECT_EQ(names.size(), std::size(kAllOps));
  EXPECT_TRUE(names.count("elementwise_mul"));
}

}  // namespace
}  // namespace compemb
