// compemb/nets.hpp

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

// Embedding network f (two dense layers, tanh between) and composition
// network g(a, b) = W1 a + W1 b + W2 (a * b), with optional unit-length
// outputs, plus the text model file.

#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "compemb/rng.hpp"
#include "compemb/tensor.hpp"

namespace compemb {

enum class Variant {
  kCmpEm,    // normalize only when comparing
  kCmpEmL2,  // f and g end with an L2 normalization
  kSingleEm  // f only, trained on single speakers
};

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kCmpEm: return "cmpem";
    case Variant::kCmpEmL2: return "cmpeml2";
    case Variant::kSingleEm: return "singleem";
  }
  return "?";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "cmpem") return Variant::kCmpEm;
  if (s == "cmpeml2") return Variant::kCmpEmL2;
  if (s == "singleem") return Variant::kSingleEm;
  throw std::invalid_argument("unknown variant '" + s + "'");
}

struct ModelDims {
  std::size_t input = 64;
  std::size_t hidden = 128;
  std::size_t embed = 32;
  bool operator==(const ModelDims&) const = default;
};

struct Composer {
  Tensor w1;  // embed x embed, applied to both arguments
  Tensor w2;  // embed x embed, applied to the elementwise product
};

struct CompositionalModel {
  ModelDims dims;
  Variant variant = Variant::kCmpEm;
  Tensor f_w1, f_b1, f_w2, f_b2;
  std::optional<Composer> g;  // absent for SingleEm

  bool normalizes() const { return variant == Variant::kCmpEmL2; }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> p{&f_w1, &f_b1, &f_w2, &f_b2};
    if (g) {
      p.push_back(&g->w1);
      p.push_back(&g->w2);
    }
    return p;
  }
  std::vector<const Tensor*> parameters() const {
    std::vector<const Tensor*> p{&f_w1, &f_b1, &f_w2, &f_b2};
    if (g) {
      p.push_back(&g->w1);
      p.push_back(&g->w2);
    }
    return p;
  }
  static std::vector<std::string> parameter_names(bool with_g) {
    std::vector<std::string> n{"f.w1", "f.b1", "f.w2", "f.b2"};
    if (with_g) {
      n.push_back("g.w1");
      n.push_back("g.w2");
    }
    return n;
  }

  void set_requires_grad(bool on) {
    for (Tensor* t : parameters()) {
      t->requires_grad = on;
      if (!on) t->grad.reset();
    }
  }
  void zero_grad() {
    for (Tensor* t : parameters()) t->zero_grad();
  }
};

/// Fan-in scaled uniform weights for f, zero biases; W1 = I + noise and
/// W2 = noise for g, so an untrained g is close to a vector sum.
inline CompositionalModel init_model(ModelDims dims, Variant variant,
                                     std::uint64_t seed,
                                     double g_noise = 0.01) {
  Rng rng(derive_seed(seed, "init"));
  CompositionalModel m;
  m.dims = dims;
  m.variant = variant;
  auto dense = [&](std::size_t out, std::size_t in) {
    Tensor w(Shape{out, in});
    const double bound = std::sqrt(3.0 / static_cast<double>(in));
    for (double& x : w.data) x = rng.uniform(-bound, bound);
    return w;
  };
  m.f_w1 = dense(dims.hidden, dims.input);
  m.f_b1 = Tensor(Shape{dims.hidden});
  m.f_w2 = dense(dims.embed, dims.hidden);
  m.f_b2 = Tensor(Shape{dims.embed});
  if (variant != Variant::kSingleEm) {
    Composer c{Tensor(Shape{dims.embed, dims.embed}),
               Tensor(Shape{dims.embed, dims.embed})};
    for (std::size_t i = 0; i < dims.embed; ++i)
      for (std::size_t j = 0; j < dims.embed; ++j) {
        c.w1(i, j) = (i == j ? 1.0 : 0.0) + g_noise * rng.normal();
        c.w2(i, j) = g_noise * rng.normal();
      }
    m.g = std::move(c);
  }
  return m;
}

/// Model parameters attached to one graph.
struct BoundModel {
  const CompositionalModel* model = nullptr;
  Value f_w1, f_b1, f_w2, f_b2, g_w1, g_w2;
};

inline BoundModel bind(Graph& graph, CompositionalModel& m) {
  BoundModel b{&m, graph.leaf(m.f_w1), graph.leaf(m.f_b1), graph.leaf(m.f_w2),
               graph.leaf(m.f_b2), {}, {}};
  if (m.g) {
    b.g_w1 = graph.leaf(m.g->w1);
    b.g_w2 = graph.leaf(m.g->w2);
  }
  return b;
}

inline BoundModel bind(Graph& graph, const CompositionalModel& m) {
  const Tensor& w1 = m.f_w1;
  BoundModel b{&m, graph.leaf(w1), graph.leaf(m.f_b1), graph.leaf(m.f_w2),
               graph.leaf(m.f_b2), {}, {}};
  if (m.g) {
    b.g_w1 = graph.leaf(static_cast<const Tensor&>(m.g->w1));
    b.g_w2 = graph.leaf(static_cast<const Tensor&>(m.g->w2));
  }
  return b;
}

inline Value embed_f(Graph& graph, const BoundModel& b, Value x) {
  const Tensor& xv = graph.value(x);
  if (xv.rank() != 1 || xv.size() != b.model->dims.input)
    throw std::invalid_argument("embed_f: expected input of length " +
                                std::to_string(b.model->dims.input) + ", got shape " +
                                shape_str(xv.shape));
  Value h = graph.tanh(graph.add(graph.matmul(b.f_w1, x), b.f_b1));
  Value out = graph.add(graph.matmul(b.f_w2, h), b.f_b2);
  return b.model->normalizes() ? graph.l2_normalize(out) : out;
}

namespace detail {
inline bool lex_less(const Tensor& a, const Tensor& b) {
  return std::lexicographical_compare(a.data.begin(), a.data.end(),
                                      b.data.begin(), b.data.end());
}
}  // namespace detail

inline Value compose_g(Graph& graph, const BoundModel& b, Value ea, Value eb) {
  if (!b.model->g) throw std::logic_error("compose_g: model has no composition function");
  const std::size_t m = b.model->dims.embed;
  if (graph.value(ea).shape != Shape{m} || graph.value(eb).shape != Shape{m})
    throw std::invalid_argument("compose_g: expected two vectors of length " +
                                std::to_string(m) + ", got " +
                                shape_str(graph.value(ea).shape) + " and " +
                                shape_str(graph.value(eb).shape));
  // Fixed argument order makes g(a, b) and g(b, a) evaluate identically.
  if (detail::lex_less(graph.value(eb), graph.value(ea))) std::swap(ea, eb);
  Value linear = graph.add(graph.matmul(b.g_w1, ea), graph.matmul(b.g_w1, eb));
  Value out = graph.add(linear, graph.matmul(b.g_w2, graph.mul(ea, eb)));
  return b.model->normalizes() ? graph.l2_normalize(out) : out;
}

/// Eager f(x).
inline std::vector<double> embed_f(const CompositionalModel& m,
                                   std::span<const double> x) {
  Graph graph;
  auto b = bind(graph, m);
  return graph.value(embed_f(graph, b, graph.constant(x))).data;
}

/// Eager g(a, b).
inline std::vector<double> compose_g(const CompositionalModel& m,
                                     std::span<const double> ea,
                                     std::span<const double> eb) {
  Graph graph;
  auto b = bind(graph, m);
  return graph.value(compose_g(graph, b, graph.constant(ea), graph.constant(eb))).data;
}

// ---------------------------------------------------------------------------
// Model file

inline constexpr int kModelFormatVersion = 1;

class ModelFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void write_model(std::ostream& os, const CompositionalModel& m) {
  os << "compemb-model\n";
  os << "format_version " << kModelFormatVersion << '\n';
  os << "variant " << variant_name(m.variant) << '\n';
  os << "dims " << m.dims.input << ' ' << m.dims.hidden << ' ' << m.dims.embed << '\n';
  const auto names = CompositionalModel::parameter_names(m.g.has_value());
  const auto params = m.parameters();
  char buf[40];
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = *params[i];
    const std::size_t rows = t.shape[0];
    const std::size_t cols = t.rank() == 2 ? t.shape[1] : 1;
    os << "block " << names[i] << ' ' << t.rank();
    for (std::size_t d : t.shape) os << ' ' << d;
    os << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        std::snprintf(buf, sizeof buf, "%.17g", t.data[r * cols + c]);
        if (c) os << ' ';
        os << buf;
      }
      os << '\n';
    }
  }
  os << "end\n";
}

inline std::string model_to_string(const CompositionalModel& m) {
  std::ostringstream os;
  write_model(os, m);
  return os.str();
}

inline CompositionalModel read_model(std::istream& is) {
  std::string line;
  auto next = [&](const char* what) -> std::istringstream {
    if (!std::getline(is, line))
      throw ModelFileError(std::string("unexpected end of file before ") + what);
    return std::istringstream(line);
  };
  {
    auto ss = next("header");
    std::string magic;
    ss >> magic;
    if (magic != "compemb-model") throw ModelFileError("not a compemb model file");
  }
  {
    auto ss = next("format_version");
    std::string key;
    int version = -1;
    if (!(ss >> key >> version) || key != "format_version")
      throw ModelFileError("malformed format_version line");
    if (version != kModelFormatVersion)
      throw ModelFileError("unsupported format version " + std::to_string(version));
  }
  CompositionalModel m;
  {
    auto ss = next("variant");
    std::string key, v;
    if (!(ss >> key >> v) || key != "variant") throw ModelFileError("malformed variant line");
    try {
      m.variant = parse_variant(v);
    } catch (const std::invalid_argument& e) {
      throw ModelFileError(e.what());
    }
  }
  {
    auto ss = next("dims");
    std::string key;
    if (!(ss >> key >> m.dims.input >> m.dims.hidden >> m.dims.embed) || key != "dims")
      throw ModelFileError("malformed dims line");
  }
  const bool with_g = m.variant != Variant::kSingleEm;
  if (with_g) m.g.emplace();
  const auto names = CompositionalModel::parameter_names(with_g);
  const std::vector<Shape> expected = {
      {m.dims.hidden, m.dims.input}, {m.dims.hidden},
      {m.dims.embed, m.dims.hidden}, {m.dims.embed},
      {m.dims.embed, m.dims.embed},  {m.dims.embed, m.dims.embed}};
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto ss = next("parameter block");
    std::string key, name;
    std::size_t rank = 0;
    if (!(ss >> key >> name >> rank) || key != "block" || name != names[i] ||
        rank < 1 || rank > 2)
      throw ModelFileError("malformed parameter block header: '" + line + "'");
    Shape shape(rank);
    for (auto& d : shape)
      if (!(ss >> d)) throw ModelFileError("malformed parameter block header: '" + line + "'");
    if (shape != expected[i])
      throw ModelFileError("parameter block " + name + " has shape " + shape_str(shape) +
                           " but dims header implies " + shape_str(expected[i]));
    const std::size_t rows = shape[0];
    const std::size_t cols = rank == 2 ? shape[1] : 1;
    Tensor t(shape);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(is, line) || line.rfind("block", 0) == 0 || line == "end")
        throw ModelFileError("unexpected end of parameter block " + name);
      const char* p = line.data();
      const char* end = line.data() + line.size();
      for (std::size_t c = 0; c < cols; ++c) {
        while (p < end && *p == ' ') ++p;
        if (p == end)
          throw ModelFileError("unexpected end of parameter block " + name + " (row " +
                               std::to_string(r) + " has " + std::to_string(c) +
                               " values, expected " + std::to_string(cols) + ")");
        double v = 0.0;
        auto res = std::from_chars(p, end, v);
        if (res.ec != std::errc())
          throw ModelFileError("malformed value in parameter block " + name);
        t.data[r * cols + c] = v;
        p = res.ptr;
      }
      while (p < end && *p == ' ') ++p;
      if (p != end)
        throw ModelFileError("parameter block " + name +
                             " has more values per row than its dimension header");
    }
    *params[i] = std::move(t);
  }
  if (!std::getline(is, line) || line != "end")
    throw ModelFileError("parameter count disagrees with dimension header (missing end marker)");
  return m;
}

inline void save_model(const CompositionalModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ModelFileError("cannot open '" + path + "' for writing");
  write_model(os, m);
  if (!os) throw ModelFileError("write to '" + path + "' failed");
}

inline CompositionalModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ModelFileError("cannot open model file '" + path + "'");
  return read_model(is);
}

}  // namespace compemb
