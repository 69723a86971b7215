// compemb/tensor.hpp

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

// Minimal reverse-mode automatic differentiation over dense float64 tensors.
//
// A Graph is an append-only tape. Parameters live outside the graph as
// Tensors and are attached with Graph::leaf(); their gradients accumulate into
// Tensor::grad when backward() runs. Constants are owned by the graph.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace compemb {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major float64 array. A rank-0 shape is a scalar.
struct Tensor {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;

  Tensor() : shape{}, data(1, 0.0) {}
  explicit Tensor(Shape s, double fill = 0.0)
      : shape(std::move(s)), data(shape_size(shape), fill) {}
  Tensor(Shape s, std::vector<double> values)
      : shape(std::move(s)), data(std::move(values)) {
    if (shape_size(shape) != data.size())
      throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                  " does not match " +
                                  std::to_string(data.size()) + " values");
  }

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector{v}); }
  static Tensor vector(std::vector<double> v) {
    Shape s{v.size()};
    return Tensor(std::move(s), std::move(v));
  }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> v) {
    return Tensor(Shape{rows, cols}, std::move(v));
  }

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1 && shape.size() <= 1; }
  double item() const { return data.at(0); }

  double& operator()(std::size_t r, std::size_t c) {
    return data[r * shape[1] + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * shape[1] + c];
  }

  void zero_grad() {
    if (requires_grad) grad.emplace(data.size(), 0.0);
  }
};

enum class OpKind {
  kMatmul,
  kAdd,
  kSub,
  kMul,
  kRelu,
  kTanh,
  kL2Normalize,
  kSquaredEuclidean,
  kScalarMax0,
  kMean,
  kConcat,
  kScale,
};

inline constexpr OpKind kAllOps[] = {
    OpKind::kMatmul,           OpKind::kAdd,        OpKind::kSub,
    OpKind::kMul,              OpKind::kRelu,       OpKind::kTanh,
    OpKind::kL2Normalize,      OpKind::kSquaredEuclidean,
    OpKind::kScalarMax0,       OpKind::kMean,       OpKind::kConcat,
    OpKind::kScale,
};

inline std::string_view op_name(OpKind k) {
  switch (k) {
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "elementwise_mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kL2Normalize: return "l2_normalize";
    case OpKind::kSquaredEuclidean: return "squared_euclidean";
    case OpKind::kScalarMax0: return "scalar_max0";
    case OpKind::kMean: return "mean";
    case OpKind::kConcat: return "concat";
    case OpKind::kScale: return "scale";
  }
  return "?";
}

/// Error raised by l2_normalize when the input has (near) zero length.
class DegenerateNormalization : public std::domain_error {
 public:
  DegenerateNormalization() : std::domain_error("degenerate normalization") {}
};

inline constexpr double kMinNormalizableNorm = 1e-12;

namespace detail {

[[noreturn]] inline void shape_error(OpKind k, std::span<const Tensor* const> in) {
  std::string msg = std::string(op_name(k)) + ": shape mismatch";
  for (const Tensor* t : in) msg += " " + shape_str(t->shape);
  throw std::invalid_argument(msg);
}

inline void require_arity(OpKind k, std::size_t got, std::size_t want) {
  if (got != want)
    throw std::invalid_argument(std::string(op_name(k)) + ": expected " +
                                std::to_string(want) + " inputs, got " +
                                std::to_string(got));
}

inline double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Forward kernel. `param` carries the constant factor for kScale.
inline Tensor forward(OpKind k, std::span<const Tensor* const> in,
                      double param) {
  switch (k) {
    case OpKind::kMatmul: {
      require_arity(k, in.size(), 2);
      const Tensor& a = *in[0];
      const Tensor& b = *in[1];
      if (a.rank() != 2 || (b.rank() != 1 && b.rank() != 2) ||
          a.shape[1] != b.shape[0])
        shape_error(k, in);
      const std::size_t p = a.shape[0], q = a.shape[1];
      const std::size_t r = b.rank() == 1 ? 1 : b.shape[1];
      Tensor out(b.rank() == 1 ? Shape{p} : Shape{p, r});
      for (std::size_t i = 0; i < p; ++i) {
        const double* arow = &a.data[i * q];
        for (std::size_t j = 0; j < r; ++j) {
          double s = 0.0;
          for (std::size_t t = 0; t < q; ++t) s += arow[t] * b.data[t * r + j];
          out.data[i * r + j] = s;
        }
      }
      return out;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      require_arity(k, in.size(), 2);
      if (in[0]->shape != in[1]->shape) shape_error(k, in);
      Tensor out(in[0]->shape);
      const auto& x = in[0]->data;
      const auto& y = in[1]->data;
      for (std::size_t i = 0; i < x.size(); ++i)
        out.data[i] = k == OpKind::kAdd   ? x[i] + y[i]
                      : k == OpKind::kSub ? x[i] - y[i]
                                          : x[i] * y[i];
      return out;
    }
    case OpKind::kRelu:
    case OpKind::kTanh: {
      require_arity(k, in.size(), 1);
      Tensor out(in[0]->shape);
      for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = in[0]->data[i];
        out.data[i] = k == OpKind::kRelu ? std::max(x, 0.0) : std::tanh(x);
      }
      return out;
    }
    case OpKind::kL2Normalize: {
      require_arity(k, in.size(), 1);
      if (in[0]->rank() != 1) shape_error(k, in);
      const double n = norm2(in[0]->data);
      if (!(n >= kMinNormalizableNorm) || !std::isfinite(n)) throw DegenerateNormalization();
      Tensor out(in[0]->shape);
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = in[0]->data[i] / n;
      return out;
    }
    case OpKind::kSquaredEuclidean: {
      require_arity(k, in.size(), 2);
      if (in[0]->shape != in[1]->shape) shape_error(k, in);
      double s = 0.0;
      for (std::size_t i = 0; i < in[0]->size(); ++i) {
        const double d = in[0]->data[i] - in[1]->data[i];
        s += d * d;
      }
      return Tensor::scalar(s);
    }
    case OpKind::kScalarMax0: {
      require_arity(k, in.size(), 1);
      if (!in[0]->is_scalar()) shape_error(k, in);
      return Tensor::scalar(std::max(in[0]->item(), 0.0));
    }
    case OpKind::kMean: {
      require_arity(k, in.size(), 1);
      double s = 0.0;
      for (double x : in[0]->data) s += x;
      return Tensor::scalar(s / static_cast<double>(in[0]->size()));
    }
    case OpKind::kConcat: {
      if (in.empty()) throw std::invalid_argument("concat: no inputs");
      std::vector<double> v;
      for (const Tensor* t : in) {
        if (t->rank() > 1) shape_error(k, in);
        v.insert(v.end(), t->data.begin(), t->data.end());
      }
      return Tensor::vector(std::move(v));
    }
    case OpKind::kScale: {
      require_arity(k, in.size(), 1);
      Tensor out(in[0]->shape);
      for (std::size_t i = 0; i < out.size(); ++i)
        out.data[i] = param * in[0]->data[i];
      return out;
    }
  }
  throw std::logic_error("unknown op kind");
}

}  // namespace detail

/// Handle to a node in a Graph.
struct Value {
  std::uint32_t id = 0;
};

/// Append-only tape of operations.
///
/// Nodes are recorded in evaluation order, so reverse append order is a valid
/// reverse topological order. A node participates in backward() only when
/// some input (transitively) requires grad.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  /// Attach an external tensor without copying. Gradients flow into
  /// `t.grad` when `t.requires_grad`; the tensor must outlive the graph.
  Value leaf(Tensor& t) {
    Node n;
    n.external = &t;
    n.tracks_grad = t.requires_grad;
    return push(std::move(n));
  }
  Value leaf(const Tensor& t) {
    Node n;
    n.external = const_cast<Tensor*>(&t);
    n.tracks_grad = false;
    return push(std::move(n));
  }

  Value constant(Tensor t) {
    Node n;
    t.requires_grad = false;
    n.owned = std::move(t);
    return push(std::move(n));
  }
  Value constant(std::span<const double> v) {
    return constant(Tensor::vector({v.begin(), v.end()}));
  }
  Value scalar(double v) { return constant(Tensor::scalar(v)); }

  Value apply(OpKind kind, std::span<const Value> inputs, double param = 0.0) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(inputs.size());
    bool tracks = false;
    for (Value v : inputs) {
      ptrs.push_back(&node(v).value());
      tracks = tracks || node(v).tracks_grad;
    }
    Node n;
    n.owned = detail::forward(kind, ptrs, param);
    n.kind = kind;
    n.param = param;
    n.is_op = true;
    n.tracks_grad = tracks;
    // Activations are only needed for backward.
    if (tracks) {
      n.inputs.reserve(inputs.size());
      for (Value v : inputs) n.inputs.push_back(v.id);
    }
    return push(std::move(n));
  }

  Value matmul(Value a, Value b) { return apply2(OpKind::kMatmul, a, b); }
  Value add(Value a, Value b) { return apply2(OpKind::kAdd, a, b); }
  Value sub(Value a, Value b) { return apply2(OpKind::kSub, a, b); }
  Value mul(Value a, Value b) { return apply2(OpKind::kMul, a, b); }
  Value relu(Value a) { return apply1(OpKind::kRelu, a); }
  Value tanh(Value a) { return apply1(OpKind::kTanh, a); }
  Value l2_normalize(Value a) { return apply1(OpKind::kL2Normalize, a); }
  Value squared_euclidean(Value a, Value b) {
    return apply2(OpKind::kSquaredEuclidean, a, b);
  }
  Value scalar_max0(Value a) { return apply1(OpKind::kScalarMax0, a); }
  Value mean(Value a) { return apply1(OpKind::kMean, a); }
  Value concat(std::span<const Value> parts) {
    return apply(OpKind::kConcat, parts);
  }
  Value scale(Value a, double c) {
    const Value in[] = {a};
    return apply(OpKind::kScale, in, c);
  }

  const Tensor& value(Value v) const { return node(v).value(); }
  bool tracks_grad(Value v) const { return node(v).tracks_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Adjoint of an intermediate node after backward(); zeros if untouched.
  std::vector<double> adjoint(Value v) const {
    const Node& n = node(v);
    if (n.adjoint.empty()) return std::vector<double>(n.value().size(), 0.0);
    return n.adjoint;
  }

  /// Populates d(loss)/d(leaf) for every reachable leaf with requires_grad.
  /// Gradients accumulate into Tensor::grad; call Tensor::zero_grad() between
  /// steps to reset them.
  void backward(Value loss) {
    const Tensor& l = value(loss);
    if (!l.is_scalar())
      throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                  shape_str(l.shape));
    for (Node& n : nodes_) n.adjoint.clear();
    Node& root = node(loss);
    if (!root.tracks_grad) return;
    root.adjoint.assign(1, 1.0);
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.tracks_grad || n.adjoint.empty()) continue;
      if (n.is_op) {
        propagate(n);
      } else if (n.external != nullptr) {
        Tensor& t = *n.external;
        if (!t.grad) t.grad.emplace(t.size(), 0.0);
        for (std::size_t j = 0; j < t.size(); ++j) (*t.grad)[j] += n.adjoint[j];
      }
    }
  }

  /// Test hook: scales the backward rule of one op kind so that gradient
  /// checks can be shown to catch a broken rule.
  void corrupt_backward_for_testing(OpKind k, double factor) {
    corrupt_kind_ = k;
    corrupt_factor_ = factor;
  }

 private:
  struct Node {
    Tensor owned;
    Tensor* external = nullptr;
    OpKind kind = OpKind::kAdd;
    double param = 0.0;
    bool is_op = false;
    bool tracks_grad = false;
    std::vector<std::uint32_t> inputs;
    std::vector<double> adjoint;

    const Tensor& value() const { return external ? *external : owned; }
  };

  Value apply1(OpKind k, Value a) {
    const Value in[] = {a};
    return apply(k, in);
  }
  Value apply2(OpKind k, Value a, Value b) {
    const Value in[] = {a, b};
    return apply(k, in);
  }

  Value push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{static_cast<std::uint32_t>(nodes_.size() - 1)};
  }
  Node& node(Value v) { return nodes_.at(v.id); }
  const Node& node(Value v) const { return nodes_.at(v.id); }

  std::vector<double>& adj(std::uint32_t id) {
    Node& n = nodes_[id];
    if (n.adjoint.empty()) n.adjoint.assign(n.value().size(), 0.0);
    return n.adjoint;
  }

  void propagate(const Node& n) {
    const double c = (corrupt_kind_ && *corrupt_kind_ == n.kind) ? corrupt_factor_ : 1.0;
    const std::vector<double>& up = n.adjoint;
    const Tensor& out = n.owned;
    auto in = [&](std::size_t i) -> const Tensor& {
      return nodes_[n.inputs[i]].value();
    };
    auto tracked = [&](std::size_t i) { return nodes_[n.inputs[i]].tracks_grad; };

    switch (n.kind) {
      case OpKind::kMatmul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        const std::size_t p = a.shape[0], q = a.shape[1];
        const std::size_t r = b.rank() == 1 ? 1 : b.shape[1];
        if (tracked(0)) {
          auto& ga = adj(n.inputs[0]);
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t t = 0; t < q; ++t) {
              double s = 0.0;
              for (std::size_t j = 0; j < r; ++j)
                s += up[i * r + j] * b.data[t * r + j];
              ga[i * q + t] += c * s;
            }
        }
        if (tracked(1)) {
          auto& gb = adj(n.inputs[1]);
          for (std::size_t i = 0; i < p; ++i)
            for (std::size_t t = 0; t < q; ++t) {
              const double av = a.data[i * q + t];
              for (std::size_t j = 0; j < r; ++j)
                gb[t * r + j] += c * av * up[i * r + j];
            }
        }
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        const double sign = n.kind == OpKind::kAdd ? 1.0 : -1.0;
        if (tracked(0)) {
          auto& g = adj(n.inputs[0]);
          for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * up[i];
        }
        if (tracked(1)) {
          auto& g = adj(n.inputs[1]);
          for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * sign * up[i];
        }
        break;
      }
      case OpKind::kMul: {
        if (tracked(0)) {
          auto& g = adj(n.inputs[0]);
          const auto& y = in(1).data;
          for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * up[i] * y[i];
        }
        if (tracked(1)) {
          auto& g = adj(n.inputs[1]);
          const auto& x = in(0).data;
          for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * up[i] * x[i];
        }
        break;
      }
      case OpKind::kRelu: {
        auto& g = adj(n.inputs[0]);
        const auto& x = in(0).data;
        for (std::size_t i = 0; i < up.size(); ++i)
          if (x[i] > 0.0) g[i] += c * up[i];
        break;
      }
      case OpKind::kTanh: {
        auto& g = adj(n.inputs[0]);
        for (std::size_t i = 0; i < up.size(); ++i) {
          const double y = out.data[i];
          g[i] += c * up[i] * (1.0 - y * y);
        }
        break;
      }
      case OpKind::kL2Normalize: {
        // d z / d v = (I - z z^T) / ||v||
        auto& g = adj(n.inputs[0]);
        const double norm = detail::norm2(in(0).data);
        double zu = 0.0;
        for (std::size_t i = 0; i < up.size(); ++i) zu += out.data[i] * up[i];
        for (std::size_t i = 0; i < up.size(); ++i)
          g[i] += c * (up[i] - out.data[i] * zu) / norm;
        break;
      }
      case OpKind::kSquaredEuclidean: {
        const auto& x = in(0).data;
        const auto& y = in(1).data;
        const double u = up[0];
        if (tracked(0)) {
          auto& g = adj(n.inputs[0]);
          for (std::size_t i = 0; i < x.size(); ++i)
            g[i] += c * 2.0 * u * (x[i] - y[i]);
        }
        if (tracked(1)) {
          auto& g = adj(n.inputs[1]);
          for (std::size_t i = 0; i < x.size(); ++i)
            g[i] -= c * 2.0 * u * (x[i] - y[i]);
        }
        break;
      }
      case OpKind::kScalarMax0: {
        if (in(0).item() > 0.0) adj(n.inputs[0])[0] += c * up[0];
        break;
      }
      case OpKind::kMean: {
        auto& g = adj(n.inputs[0]);
        const double s = c * up[0] / static_cast<double>(g.size());
        for (double& x : g) x += s;
        break;
      }
      case OpKind::kConcat: {
        std::size_t off = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const std::size_t len = in(k).size();
          if (tracked(k)) {
            auto& g = adj(n.inputs[k]);
            for (std::size_t i = 0; i < len; ++i) g[i] += c * up[off + i];
          }
          off += len;
        }
        break;
      }
      case OpKind::kScale: {
        auto& g = adj(n.inputs[0]);
        for (std::size_t i = 0; i < up.size(); ++i) g[i] += c * n.param * up[i];
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::optional<OpKind> corrupt_kind_;
  double corrupt_factor_ = 1.0;
};

/// Eager (graph-free) evaluation of one op.
inline Tensor op_apply(OpKind kind, std::span<const Tensor* const> inputs,
                       double param = 0.0) {
  return detail::forward(kind, inputs, param);
}

}  // namespace compemb
