// compemb/gradcheck.hpp

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

// Central finite-difference checks of every backward rule in tensor.hpp.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "compemb/rng.hpp"
#include "compemb/tensor.hpp"

namespace compemb {

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;  // number of partial derivatives compared
};

struct GradCheckReport {
  std::vector<GradCheckEntry> ops;        // one per OpKind, in kAllOps order
  std::vector<GradCheckEntry> networks;   // composed graphs
  double tolerance = 1e-4;

  bool passed() const {
    auto ok = [&](const GradCheckEntry& e) { return e.max_rel_error < tolerance; };
    return std::all_of(ops.begin(), ops.end(), ok) &&
           std::all_of(networks.begin(), networks.end(), ok);
  }
};

/// Builds a scalar loss from the given parameter tensors.
using LossBuilder = std::function<Value(Graph&, std::vector<Tensor>&)>;

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// Compares backward() against central differences with step `h` for every
/// entry of every parameter. Returns the largest relative error.
inline GradCheckEntry check_gradients(std::string name,
                                      std::vector<Tensor> params,
                                      const LossBuilder& build, double h = 1e-5,
                                      std::optional<OpKind> corrupt = {}) {
  for (Tensor& p : params) {
    p.requires_grad = true;
    p.zero_grad();
  }
  {
    Graph g;
    if (corrupt) g.corrupt_backward_for_testing(*corrupt, 1.5);
    g.backward(build(g, params));
  }
  auto eval = [&]() {
    Graph g;
    return g.value(build(g, params)).item();
  };
  GradCheckEntry entry{std::move(name), 0.0, 0};
  for (Tensor& p : params) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data[i];
      p.data[i] = saved + h;
      const double up = eval();
      p.data[i] = saved - h;
      const double down = eval();
      p.data[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      entry.max_rel_error = std::max(entry.max_rel_error,
                                     relative_error((*p.grad)[i], numeric));
      ++entry.checked;
    }
  }
  return entry;
}

namespace detail {

inline Tensor random_tensor(Rng& rng, Shape shape, double min_abs = 0.0) {
  Tensor t(std::move(shape));
  for (double& x : t.data) {
    do {
      x = rng.normal();
    } while (std::abs(x) < min_abs);
  }
  return t;
}

// Reduces any tensor to a scalar with fixed random weights so that every
// output coordinate carries a distinct upstream gradient.
inline Value weighted_mean(Graph& g, Value v, Rng& rng) {
  const Tensor& t = g.value(v);
  if (t.is_scalar() && t.rank() == 0) return v;
  Value w = g.constant(random_tensor(rng, t.shape));
  return g.mean(g.mul(v, w));
}

// Inputs for a single-op check: parameter shapes plus the op application.
struct OpCase {
  std::vector<Tensor> params;
  std::function<Value(Graph&, std::vector<Value>&)> apply;
};

inline OpCase make_op_case(OpKind k, Rng& rng) {
  using V = std::vector<Value>;
  switch (k) {
    case OpKind::kMatmul:
      return {{random_tensor(rng, {3, 4}), random_tensor(rng, {4, 2})},
              [](Graph& g, V& v) { return g.matmul(v[0], v[1]); }};
    case OpKind::kAdd:
      return {{random_tensor(rng, {5}), random_tensor(rng, {5})},
              [](Graph& g, V& v) { return g.add(v[0], v[1]); }};
    case OpKind::kSub:
      return {{random_tensor(rng, {5}), random_tensor(rng, {5})},
              [](Graph& g, V& v) { return g.sub(v[0], v[1]); }};
    case OpKind::kMul:
      return {{random_tensor(rng, {5}), random_tensor(rng, {5})},
              [](Graph& g, V& v) { return g.mul(v[0], v[1]); }};
    case OpKind::kRelu:
      return {{random_tensor(rng, {6}, 1e-2)},
              [](Graph& g, V& v) { return g.relu(v[0]); }};
    case OpKind::kTanh:
      return {{random_tensor(rng, {6})},
              [](Graph& g, V& v) { return g.tanh(v[0]); }};
    case OpKind::kL2Normalize:
      return {{random_tensor(rng, {5})},
              [](Graph& g, V& v) { return g.l2_normalize(v[0]); }};
    case OpKind::kSquaredEuclidean:
      return {{random_tensor(rng, {5}), random_tensor(rng, {5})},
              [](Graph& g, V& v) { return g.squared_euclidean(v[0], v[1]); }};
    case OpKind::kScalarMax0: {
      // One active and one inactive hinge.
      return {{Tensor::scalar(0.7 + std::abs(rng.normal())),
               Tensor::scalar(-0.7 - std::abs(rng.normal()))},
              [](Graph& g, V& v) {
                return g.add(g.scalar_max0(v[0]), g.scalar_max0(v[1]));
              }};
    }
    case OpKind::kMean:
      return {{random_tensor(rng, {3, 3})},
              [](Graph& g, V& v) { return g.mean(g.mul(v[0], v[0])); }};
    case OpKind::kConcat:
      return {{random_tensor(rng, {3}), Tensor::scalar(rng.normal()),
               random_tensor(rng, {2})},
              [](Graph& g, V& v) { return g.concat(v); }};
    case OpKind::kScale:
      return {{random_tensor(rng, {4})},
              [](Graph& g, V& v) { return g.scale(v[0], -2.5); }};
  }
  throw std::logic_error("unknown op kind");
}

}  // namespace detail

/// A small compositional network: 2-layer tanh MLP embedding, bias-free
/// composition with an elementwise-product term, optional normalization and
/// a triplet hinge. Parameter count is 4*6+6+6*3+3+9+9 = 69.
inline LossBuilder small_network_loss(Rng& rng, bool normalize) {
  auto x_a = detail::random_tensor(rng, {4});
  auto x_b = detail::random_tensor(rng, {4});
  auto x_ab = detail::random_tensor(rng, {4});
  return [=](Graph& g, std::vector<Tensor>& p) {
    auto f = [&](const Tensor& x) {
      Value h = g.tanh(g.add(g.matmul(g.leaf(p[0]), g.constant(x)), g.leaf(p[1])));
      Value o = g.add(g.matmul(g.leaf(p[2]), h), g.leaf(p[3]));
      return normalize ? g.l2_normalize(o) : o;
    };
    Value ea = f(x_a), eb = f(x_b), anchor = f(x_ab);
    Value w1 = g.leaf(p[4]), w2 = g.leaf(p[5]);
    Value comp = g.add(g.add(g.matmul(w1, ea), g.matmul(w1, eb)),
                       g.matmul(w2, g.mul(ea, eb)));
    if (normalize) comp = g.l2_normalize(comp);
    Value pos = g.squared_euclidean(anchor, comp);
    Value neg = g.squared_euclidean(anchor, ea);
    Value margin = g.scalar(10.0);  // keep the hinge active
    Value hinge = g.scalar_max0(g.add(g.sub(pos, neg), margin));
    Value both[] = {hinge, g.mean(g.relu(comp))};
    return g.mean(g.concat(both));
  };
}

inline std::vector<Tensor> small_network_params(Rng& rng) {
  using detail::random_tensor;
  std::vector<Tensor> p;
  p.push_back(random_tensor(rng, {6, 4}));
  p.push_back(random_tensor(rng, {6}));
  p.push_back(random_tensor(rng, {3, 6}));
  p.push_back(random_tensor(rng, {3}));
  p.push_back(random_tensor(rng, {3, 3}));
  p.push_back(random_tensor(rng, {3, 3}));
  for (Tensor& t : p)
    for (double& x : t.data) x *= 0.5;
  return p;
}

/// Runs the full suite: every op kind once plus `networks` randomized small
/// networks of each normalization flavour.
inline GradCheckReport run_gradcheck(std::uint64_t seed, double tolerance = 1e-4,
                                     int networks = 4,
                                     std::optional<OpKind> corrupt = {}) {
  GradCheckReport report;
  report.tolerance = tolerance;
  Rng rng(derive_seed(seed, "gradcheck"));
  for (OpKind k : kAllOps) {
    auto oc = detail::make_op_case(k, rng);
    const std::size_t reduce_seed = rng.index(1u << 30);
    LossBuilder build = [&oc, reduce_seed](Graph& g, std::vector<Tensor>& p) {
      std::vector<Value> leaves;
      for (Tensor& t : p) leaves.push_back(g.leaf(t));
      Rng weights(reduce_seed);
      return detail::weighted_mean(g, oc.apply(g, leaves), weights);
    };
    report.ops.push_back(check_gradients(std::string(op_name(k)),
                                         std::move(oc.params), build, 1e-5,
                                         corrupt));
  }
  for (int i = 0; i < networks; ++i) {
    for (bool normalize : {false, true}) {
      auto loss = small_network_loss(rng, normalize);
      auto params = small_network_params(rng);
      report.networks.push_back(check_gradients(
          std::string(normalize ? "network_l2_" : "network_") + std::to_string(i),
          std::move(params), loss, 1e-5, corrupt));
    }
  }
  return report;
}

}  // namespace compemb
