// compemb/diarization.hpp

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

// Overlap-aware diarization of synthetic streams: affinity-propagation turn
// clustering, segment-level speaker-set assignment, a simulated overlap
// detector and frame-level DER scoring.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "compemb/inference.hpp"
#include "compemb/nets.hpp"
#include "compemb/rng.hpp"
#include "compemb/speaker_set.hpp"
#include "compemb/synth.hpp"

namespace compemb {

// ---------------------------------------------------------------------------
// Affinity propagation

struct AffinityOptions {
  double damping = 0.5;
  int max_iter = 200;
  int convergence_iter = 15;
  std::optional<double> preference;  // default: median off-diagonal similarity
};

struct ClusterResult {
  std::vector<std::size_t> exemplars;  // point index of each cluster's exemplar
  std::vector<int> labels;             // cluster id per point
  bool converged = true;
  int iterations = 0;

  int num_clusters() const { return static_cast<int>(exemplars.size()); }
};

using Matrix = std::vector<std::vector<double>>;

inline double median_off_diagonal(const Matrix& s) {
  std::vector<double> v;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t k = 0; k < s.size(); ++k)
      if (i != k) v.push_back(s[i][k]);
  if (v.empty()) return s.empty() ? 0.0 : s[0][0];
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Responsibility/availability message passing on a square similarity matrix.
/// Exemplars are refined to the member with the largest within-cluster
/// similarity sum, and every point joins its most similar exemplar.
inline ClusterResult affinity_propagation(Matrix s, const AffinityOptions& opt = {}) {
  const std::size_t n = s.size();
  for (const auto& row : s)
    if (row.size() != n) throw std::invalid_argument("affinity_propagation: matrix is not square");
  ClusterResult res;
  if (n == 0) return res;
  const double pref = opt.preference.value_or(median_off_diagonal(s));
  for (std::size_t i = 0; i < n; ++i) s[i][i] = pref;

  bool all_equal = true;
  for (std::size_t i = 0; i < n && all_equal; ++i)
    for (std::size_t k = 0; k < n && all_equal; ++k) all_equal = s[i][k] == s[0][0];
  if (n == 1 || all_equal) {
    res.exemplars = {0};
    res.labels.assign(n, 0);
    return res;
  }

  Matrix r(n, std::vector<double>(n, 0.0)), a = r;
  std::vector<int> unchanged_for(1, 0);
  std::vector<bool> prev_e(n, false);
  int stable = 0;
  res.converged = false;
  const double d = opt.damping;
  for (int it = 1; it <= opt.max_iter; ++it) {
    res.iterations = it;
    for (std::size_t i = 0; i < n; ++i) {
      double first = -std::numeric_limits<double>::infinity(), second = first;
      std::size_t arg = 0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = a[i][k] + s[i][k];
        if (v > first) {
          second = first;
          first = v;
          arg = k;
        } else if (v > second) {
          second = v;
        }
      }
      for (std::size_t k = 0; k < n; ++k) {
        const double fresh = s[i][k] - (k == arg ? second : first);
        r[i][k] = d * r[i][k] + (1.0 - d) * fresh;
      }
    }
    for (std::size_t k = 0; k < n; ++k) {
      double col = r[k][k];
      for (std::size_t i = 0; i < n; ++i)
        if (i != k) col += std::max(0.0, r[i][k]);
      for (std::size_t i = 0; i < n; ++i) {
        const double fresh =
            i == k ? col - r[k][k] : std::min(0.0, col - std::max(0.0, r[i][k]));
        a[i][k] = d * a[i][k] + (1.0 - d) * fresh;
      }
    }
    std::vector<bool> e(n);
    bool any = false;
    for (std::size_t k = 0; k < n; ++k) {
      e[k] = a[k][k] + r[k][k] > 0.0;
      any = any || e[k];
    }
    stable = (e == prev_e) ? stable + 1 : 0;
    prev_e = std::move(e);
    if (stable >= opt.convergence_iter && any) {
      res.converged = true;
      break;
    }
  }

  std::vector<std::size_t> ex;
  for (std::size_t k = 0; k < n; ++k)
    if (prev_e[k]) ex.push_back(k);
  if (ex.empty()) {
    // No exemplar emerged: one cluster around the most central point.
    std::size_t best = 0;
    double best_sum = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) sum += s[i][k];
      if (sum > best_sum) {
        best_sum = sum;
        best = k;
      }
    }
    res.exemplars = {best};
    res.labels.assign(n, 0);
    return res;
  }
  auto assign = [&](const std::vector<std::size_t>& exemplars) {
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      for (std::size_t c = 1; c < exemplars.size(); ++c)
        if (s[i][exemplars[c]] > s[i][exemplars[best]]) best = static_cast<int>(c);
      labels[i] = best;
    }
    for (std::size_t c = 0; c < exemplars.size(); ++c) labels[exemplars[c]] = static_cast<int>(c);
    return labels;
  };
  std::vector<int> labels = assign(ex);
  for (std::size_t c = 0; c < ex.size(); ++c) {
    std::size_t best = ex[c];
    double best_sum = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (labels[j] != static_cast<int>(c)) continue;
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == static_cast<int>(c)) sum += s[i][j];
      if (sum > best_sum) {
        best_sum = sum;
        best = j;
      }
    }
    ex[c] = best;
  }
  std::sort(ex.begin(), ex.end());
  res.exemplars = ex;
  res.labels = assign(ex);
  return res;
}

inline Matrix cosine_similarity_matrix(std::span<const Vec> points) {
  Matrix s(points.size(), std::vector<double>(points.size(), 1.0));
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t k = i + 1; k < points.size(); ++k)
      s[i][k] = s[k][i] = cosine_similarity(points[i], points[k]);
  return s;
}

// ---------------------------------------------------------------------------
// Optimal assignment

/// Minimum-cost assignment of every row to a distinct column of a
/// rows <= cols cost matrix (shortest augmenting paths with potentials).
/// Returns the column of each row.
template <class T>
std::vector<int> hungarian_min_cost(const std::vector<std::vector<T>>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return {};
  const int m = static_cast<int>(cost[0].size());
  if (m < n) throw std::invalid_argument("hungarian: more rows than columns");
  const T inf = std::numeric_limits<T>::max() / 4;
  std::vector<T> u(n + 1), v(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<T> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      T delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const T cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  return col;
}

// ---------------------------------------------------------------------------
// DER

struct DerBreakdown {
  double miss = 0.0;
  double false_alarm = 0.0;
  double confusion = 0.0;
  double total_reference_speech = 0.0;
  double der = 0.0;
  std::map<int, int> mapping;  // hypothesis label -> reference speaker

  double error() const { return miss + false_alarm + confusion; }
};

inline void check_comparable(const Timeline& ref, const Timeline& hyp) {
  if (ref.size() != hyp.size())
    throw std::invalid_argument("der: reference has " + std::to_string(ref.size()) +
                                " frames, hypothesis " + std::to_string(hyp.size()));
  if (ref.frame_duration != hyp.frame_duration)
    throw std::invalid_argument("der: frame durations differ");
}

/// Frames where reference speaker r and hypothesis label h are both active.
struct CoOccurrence {
  std::vector<int> ref_ids, hyp_ids;
  std::vector<std::vector<long long>> counts;  // [ref][hyp]
};

inline CoOccurrence co_occurrence(const Timeline& ref, const Timeline& hyp) {
  CoOccurrence c;
  c.ref_ids = ref.speakers();
  c.hyp_ids = hyp.speakers();
  c.counts.assign(c.ref_ids.size(), std::vector<long long>(c.hyp_ids.size(), 0));
  auto index = [](const std::vector<int>& ids, int id) {
    return static_cast<std::size_t>(std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
  };
  for (std::size_t t = 0; t < ref.size(); ++t)
    for (int r : ref.frames[t])
      for (int h : hyp.frames[t]) ++c.counts[index(c.ref_ids, r)][index(c.hyp_ids, h)];
  return c;
}

/// Frame-level scoring under a fixed hypothesis->reference mapping: per frame
/// the error is max(N_ref, N_hyp) - N_correct, split into miss, false alarm
/// and confusion.
inline DerBreakdown der_with_mapping(const Timeline& ref, const Timeline& hyp,
                                     const std::map<int, int>& mapping) {
  check_comparable(ref, hyp);
  long long miss = 0, fa = 0, conf = 0, total = 0;
  for (std::size_t t = 0; t < ref.size(); ++t) {
    const auto& rs = ref.frames[t];
    const auto& hs = hyp.frames[t];
    const long long nr = static_cast<long long>(rs.size());
    const long long nh = static_cast<long long>(hs.size());
    long long correct = 0;
    for (int h : hs) {
      auto it = mapping.find(h);
      if (it != mapping.end() && rs.contains(it->second)) ++correct;
    }
    total += nr;
    miss += std::max(0LL, nr - nh);
    fa += std::max(0LL, nh - nr);
    conf += std::min(nr, nh) - correct;
  }
  if (total == 0) throw std::invalid_argument("der: reference contains no speech");
  const double fd = ref.frame_duration;
  DerBreakdown b;
  b.miss = static_cast<double>(miss) * fd;
  b.false_alarm = static_cast<double>(fa) * fd;
  b.confusion = static_cast<double>(conf) * fd;
  b.total_reference_speech = static_cast<double>(total) * fd;
  b.der = static_cast<double>(miss + fa + conf) / static_cast<double>(total);
  b.mapping = mapping;
  return b;
}

/// DER with the one-to-one speaker mapping that maximizes total co-occurring
/// time, computed once over the whole timeline. No collar; overlap scored.
inline DerBreakdown der_score(const Timeline& ref, const Timeline& hyp) {
  check_comparable(ref, hyp);
  const CoOccurrence c = co_occurrence(ref, hyp);
  const std::size_t nr = c.ref_ids.size(), nh = c.hyp_ids.size();
  std::map<int, int> mapping;
  if (nr > 0 && nh > 0) {
    // Rows = the smaller side; maximize overlap as min of (max - overlap).
    const bool hyp_rows = nh <= nr;
    const std::size_t rows = hyp_rows ? nh : nr, cols = hyp_rows ? nr : nh;
    long long peak = 0;
    for (const auto& row : c.counts)
      for (long long v : row) peak = std::max(peak, v);
    std::vector<std::vector<long long>> cost(rows, std::vector<long long>(cols));
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j)
        cost[i][j] = peak - (hyp_rows ? c.counts[j][i] : c.counts[i][j]);
    const std::vector<int> col = hungarian_min_cost(cost);
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t h = hyp_rows ? i : static_cast<std::size_t>(col[i]);
      const std::size_t r = hyp_rows ? static_cast<std::size_t>(col[i]) : i;
      mapping[c.hyp_ids[h]] = c.ref_ids[r];
    }
  }
  return der_with_mapping(ref, hyp, mapping);
}

// ---------------------------------------------------------------------------
// Segmentation and overlap detection

inline constexpr double kLongTurnSeconds = 3.3;
inline constexpr double kSegmentSeconds = 1.0;

/// Splits each turn into pieces of `segment_s`; a trailing piece shorter than
/// half a segment is merged into the piece before it.
inline std::vector<Segment> split_turns(std::span<const Segment> turns, double frame_duration,
                                        double segment_s = kSegmentSeconds) {
  const auto seg = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(segment_s / frame_duration)));
  std::vector<Segment> out;
  for (const Segment& t : turns) {
    const std::size_t first = out.size();
    for (std::size_t b = t.begin; b < t.end; b += seg) out.push_back({b, std::min(t.end, b + seg)});
    if (out.size() - first >= 2 && 2 * out.back().length() < seg) {
      out[out.size() - 2].end = out.back().end;
      out.pop_back();
    }
  }
  return out;
}

/// True when at least half of the segment's frames carry two or more speakers.
inline bool reference_overlap(const Timeline& ref, const Segment& s) {
  std::size_t over = 0;
  for (std::size_t t = s.begin; t < s.end; ++t) over += ref.frames[t].size() > 1;
  return 2 * over >= s.length() && s.length() > 0;
}

/// Oracle overlap flags flipped per segment: an overlapped segment is missed
/// with probability `miss_rate`, a clean one flagged with `false_alarm_rate`.
inline std::vector<bool> simulated_overlap_detector(const Timeline& ref,
                                                    std::span<const Segment> segments,
                                                    double false_alarm_rate, double miss_rate,
                                                    Rng& rng) {
  std::vector<bool> flags;
  flags.reserve(segments.size());
  for (const Segment& s : segments) {
    const bool truth = reference_overlap(ref, s);
    flags.push_back(truth ? !rng.bernoulli(miss_rate) : rng.bernoulli(false_alarm_rate));
  }
  return flags;
}

// ---------------------------------------------------------------------------
// Diarization strategies

enum class Strategy { kSingleEmTurn, kSingleEmSegOverlap, kCmpEmSeg, kCmpEmSegOverlap };

inline constexpr Strategy kAllStrategies[] = {Strategy::kSingleEmTurn,
                                              Strategy::kSingleEmSegOverlap, Strategy::kCmpEmSeg,
                                              Strategy::kCmpEmSegOverlap};

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kSingleEmTurn: return "SingleEmTurn";
    case Strategy::kSingleEmSegOverlap: return "SingleEmSegOverlap";
    case Strategy::kCmpEmSeg: return "CmpEmSeg";
    case Strategy::kCmpEmSegOverlap: return "CmpEmSegOverlap";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  for (Strategy k : kAllStrategies)
    if (strategy_name(k) == s) return k;
  throw std::invalid_argument("unknown strategy '" + s + "'");
}

inline bool uses_compositional_model(Strategy s) {
  return s == Strategy::kCmpEmSeg || s == Strategy::kCmpEmSegOverlap;
}

struct DiarizationOptions {
  double long_turn_s = kLongTurnSeconds;
  double segment_s = kSegmentSeconds;
  // Damping 0.5 oscillates on tight, near-tied turn clusters.
  AffinityOptions clustering{.damping = 0.8, .max_iter = 200, .convergence_iter = 15,
                             .preference = std::nullopt};
};

/// What the diarizer sees: per-frame features (empty when silent), the turn
/// boundaries from speaker-change detection, and per-segment overlap flags
/// for `segments` (the 1-s split of `turns`).
struct DiarizationInput {
  double frame_duration = 0.1;
  std::vector<Vec> frame_features;
  std::vector<Segment> turns;
  std::vector<Segment> segments;
  std::vector<bool> overlap_flags;
};

struct DiarizationOutput {
  Timeline hypothesis;
  ClusterResult clusters;
  std::vector<Vec> centroids;  // one per discovered speaker
};

namespace detail {

inline Vec mean_of(std::span<const Vec> frame_emb, const Segment& s) {
  Vec m;
  std::size_t n = 0;
  for (std::size_t t = s.begin; t < s.end; ++t) {
    if (frame_emb[t].empty()) continue;
    if (m.empty()) m.assign(frame_emb[t].size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += frame_emb[t][i];
    ++n;
  }
  for (double& x : m) x /= static_cast<double>(n);
  return m;
}

// Index maximizing cosine similarity; ties to the lower index.
inline std::size_t best_cosine(std::span<const double> q, std::span<const Vec> cands,
                               std::span<const std::size_t> allowed) {
  std::size_t best = allowed[0];
  double best_sim = -std::numeric_limits<double>::infinity();
  for (std::size_t i : allowed) {
    const double s = cosine_similarity(q, cands[i]);
    if (s > best_sim) {
      best_sim = s;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

/// Diarizes one stream. `single` supplies f for the SingleEm strategies,
/// `compositional` supplies f and g for the CmpEm strategies.
inline DiarizationOutput diarize(const DiarizationInput& in, Strategy strategy,
                                 const CompositionalModel* single,
                                 const CompositionalModel* compositional,
                                 const DiarizationOptions& opt = {}) {
  const CompositionalModel* model = uses_compositional_model(strategy) ? compositional : single;
  if (model == nullptr)
    throw std::invalid_argument("diarize: no model supplied for strategy " +
                                strategy_name(strategy));
  if (uses_compositional_model(strategy) && !model->g)
    throw std::invalid_argument("diarize: strategy " + strategy_name(strategy) +
                                " needs a model with a composition function");
  if (in.overlap_flags.size() != in.segments.size())
    throw std::invalid_argument("diarize: one overlap flag per segment required");

  std::vector<Vec> frame_emb(in.frame_features.size());
  for (std::size_t t = 0; t < frame_emb.size(); ++t)
    if (!in.frame_features[t].empty()) frame_emb[t] = embed_f(*model, in.frame_features[t]);

  std::vector<Vec> turn_mean;
  std::vector<std::size_t> long_idx;
  for (std::size_t i = 0; i < in.turns.size(); ++i) {
    turn_mean.push_back(detail::mean_of(frame_emb, in.turns[i]));
    const double dur = static_cast<double>(in.turns[i].length()) * in.frame_duration;
    if (dur >= opt.long_turn_s - 1e-9 && !turn_mean.back().empty()) long_idx.push_back(i);
  }
  if (long_idx.empty()) throw std::runtime_error("insufficient enrollment material");

  std::vector<Vec> long_means;
  for (std::size_t i : long_idx) long_means.push_back(turn_mean[i]);
  DiarizationOutput out;
  out.clusters = affinity_propagation(cosine_similarity_matrix(long_means), opt.clustering);
  const int k = out.clusters.num_clusters();
  out.centroids.assign(static_cast<std::size_t>(k), Vec(long_means[0].size(), 0.0));
  std::vector<int> members(static_cast<std::size_t>(k), 0);
  for (std::size_t j = 0; j < long_means.size(); ++j) {
    const auto c = static_cast<std::size_t>(out.clusters.labels[j]);
    for (std::size_t d = 0; d < long_means[j].size(); ++d) out.centroids[c][d] += long_means[j][d];
    ++members[c];
  }
  for (std::size_t c = 0; c < out.centroids.size(); ++c)
    for (double& x : out.centroids[c]) x /= static_cast<double>(members[c]);

  out.hypothesis.frame_duration = in.frame_duration;
  out.hypothesis.frames.assign(in.frame_features.size(), SpeakerSet{});
  auto label = [&](const Segment& s, const SpeakerSet& who) {
    for (std::size_t t = s.begin; t < s.end; ++t)
      if (!in.frame_features[t].empty()) out.hypothesis.frames[t] = who;
  };

  std::vector<std::size_t> all_singles(static_cast<std::size_t>(k));
  std::iota(all_singles.begin(), all_singles.end(), std::size_t{0});

  if (strategy == Strategy::kSingleEmTurn) {
    std::map<std::size_t, int> long_label;
    for (std::size_t j = 0; j < long_idx.size(); ++j) long_label[long_idx[j]] = out.clusters.labels[j];
    for (std::size_t i = 0; i < in.turns.size(); ++i) {
      if (turn_mean[i].empty()) continue;
      auto it = long_label.find(i);
      const int c = it != long_label.end()
                        ? it->second
                        : static_cast<int>(detail::best_cosine(turn_mean[i], out.centroids, all_singles));
      label(in.turns[i], SpeakerSet{c});
    }
    return out;
  }

  if (strategy == Strategy::kSingleEmSegOverlap) {
    for (std::size_t i = 0; i < in.segments.size(); ++i) {
      const Vec m = detail::mean_of(frame_emb, in.segments[i]);
      if (m.empty()) continue;
      if (in.overlap_flags[i] && k >= 2) {
        std::vector<std::pair<double, int>> sims;
        for (int c = 0; c < k; ++c) sims.emplace_back(-cosine_similarity(m, out.centroids[c]), c);
        std::stable_sort(sims.begin(), sims.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
        label(in.segments[i], SpeakerSet{sims[0].second, sims[1].second});
      } else {
        label(in.segments[i],
              SpeakerSet{static_cast<int>(detail::best_cosine(m, out.centroids, all_singles))});
      }
    }
    return out;
  }

  // Compositional strategies: z-normalized cluster centroids are the
  // enrollments, pairs of them are composed with g into pseudo-enrollments.
  std::vector<Vec> enroll = out.centroids;
  for (Vec& e : enroll) normalize_in_place(e);
  EnrollmentTable table;
  table.max_card = std::min(2, k);
  table.keys = enumerate_subsets(k, table.max_card);
  for (const SpeakerSet& t : table.keys)
    table.embeddings.push_back(t.size() == 1 ? enroll[t[0]]
                                             : compose_g(*model, enroll[t[1]], enroll[t[0]]));
  std::vector<std::size_t> singles_idx, pairs_idx, any_idx;
  for (std::size_t i = 0; i < table.keys.size(); ++i) {
    (table.keys[i].size() == 1 ? singles_idx : pairs_idx).push_back(i);
    any_idx.push_back(i);
  }
  for (std::size_t i = 0; i < in.segments.size(); ++i) {
    const Vec m = detail::mean_of(frame_emb, in.segments[i]);
    if (m.empty()) continue;
    std::span<const std::size_t> allowed = any_idx;
    if (strategy == Strategy::kCmpEmSegOverlap)
      allowed = (in.overlap_flags[i] && !pairs_idx.empty()) ? std::span<const std::size_t>(pairs_idx)
                                                            : std::span<const std::size_t>(singles_idx);
    label(in.segments[i], table.keys[detail::best_cosine(m, table.embeddings, allowed)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Seeded benchmark over synthetic streams

struct BenchmarkConfig {
  int streams = 10;
  int n_speakers = 4;
  double duration_s = 1800.0;
  double overlap_fraction = 0.19;
  double scd_miss_rate = 0.0;
  std::size_t scd_jitter_frames = 0;
  double od_false_alarm_rate = 0.0;
  double od_miss_rate = 0.0;
  TimelineOptions timeline;
  DiarizationOptions diarization;

  void validate() const {
    if (streams < 1) throw std::invalid_argument("config: streams must be >= 1");
    if (n_speakers < 1) throw std::invalid_argument("config: n_speakers must be >= 1");
    if (!(duration_s > 0.0)) throw std::invalid_argument("config: duration_s must be > 0");
    if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
      throw std::invalid_argument("config: overlap_fraction must be in [0, 1)");
    auto rate = [](double r, const char* name) {
      if (!(r >= 0.0 && r < 1.0))
        throw std::invalid_argument(std::string("config: ") + name + " must be in [0, 1)");
    };
    rate(scd_miss_rate, "scd_miss_rate");
    rate(od_false_alarm_rate, "od_false_alarm_rate");
    rate(od_miss_rate, "od_miss_rate");
    if (!(diarization.clustering.damping >= 0.5 && diarization.clustering.damping < 1.0))
      throw std::invalid_argument("config: ap_damping must be in [0.5, 1)");
    if (diarization.clustering.max_iter < 1 || diarization.clustering.convergence_iter < 1)
      throw std::invalid_argument("config: ap iteration limits must be >= 1");
  }
};

struct StreamResult {
  Stream stream;
  std::vector<Strategy> strategies;
  std::vector<Timeline> hypotheses;
  std::vector<DerBreakdown> scores;
  std::vector<bool> clustering_converged;
};

/// Builds and diarizes stream `index` under every requested strategy. Each
/// component draws from its own seed derived from (root, component, index).
inline StreamResult run_stream(const SpeakerBank& bank, const SpeakerPool& pool,
                               const BenchmarkConfig& cfg, std::uint64_t root, int index,
                               std::span<const Strategy> strategies,
                               const CompositionalModel* single,
                               const CompositionalModel* compositional) {
  const auto idx = static_cast<std::uint64_t>(index);
  Rng timeline_rng(derive_seed(derive_seed(root, "stream-timeline"), idx));
  Rng feature_rng(derive_seed(derive_seed(root, "stream-features"), idx));
  Rng scd_rng(derive_seed(derive_seed(root, "stream-scd"), idx));
  Rng od_rng(derive_seed(derive_seed(root, "stream-overlap-detector"), idx));

  StreamResult res;
  res.stream = generate_timeline(pool, cfg.n_speakers, cfg.duration_s, cfg.overlap_fraction,
                                 timeline_rng, cfg.timeline);
  const Timeline& ref = res.stream.reference;
  DiarizationInput in;
  in.frame_duration = ref.frame_duration;
  in.frame_features = frame_features(bank, ref, feature_rng);
  in.turns = detect_turns(ref, res.stream.turns, cfg.scd_miss_rate, cfg.scd_jitter_frames, scd_rng);
  in.segments = split_turns(in.turns, ref.frame_duration, cfg.diarization.segment_s);
  in.overlap_flags = simulated_overlap_detector(ref, in.segments, cfg.od_false_alarm_rate,
                                                cfg.od_miss_rate, od_rng);
  for (Strategy s : strategies) {
    DiarizationOutput out = diarize(in, s, single, compositional, cfg.diarization);
    res.strategies.push_back(s);
    res.scores.push_back(der_score(ref, out.hypothesis));
    res.clustering_converged.push_back(out.clusters.converged);
    res.hypotheses.push_back(std::move(out.hypothesis));
  }
  return res;
}

struct StrategySummary {
  Strategy strategy;
  std::vector<double> der;  // per stream, fraction

  double mean() const {
    return std::accumulate(der.begin(), der.end(), 0.0) / static_cast<double>(der.size());
  }
  /// Sample standard deviation; 0 for a single stream.
  double stddev() const {
    if (der.size() < 2) return 0.0;
    const double m = mean();
    double ss = 0.0;
    for (double d : der) ss += (d - m) * (d - m);
    return std::sqrt(ss / static_cast<double>(der.size() - 1));
  }
};

struct BenchmarkReport {
  std::vector<StrategySummary> strategies;
  int nonconverged_clusterings = 0;

  const StrategySummary& get(Strategy s) const {
    for (const auto& x : strategies)
      if (x.strategy == s) return x;
    throw std::out_of_range("benchmark report has no strategy " + strategy_name(s));
  }
};

using StreamCallback = std::function<void(int, const StreamResult&)>;

inline BenchmarkReport run_benchmark(const SpeakerBank& bank, const SpeakerPool& pool,
                                     const BenchmarkConfig& cfg, std::uint64_t seed,
                                     std::span<const Strategy> strategies,
                                     const CompositionalModel* single,
                                     const CompositionalModel* compositional,
                                     const StreamCallback& on_stream = {}) {
  cfg.validate();
  const std::uint64_t root = derive_seed(seed, "diarize");
  BenchmarkReport rep;
  for (Strategy s : strategies) rep.strategies.push_back({s, {}});
  for (int i = 0; i < cfg.streams; ++i) {
    StreamResult r = run_stream(bank, pool, cfg, root, i, strategies, single, compositional);
    for (std::size_t k = 0; k < strategies.size(); ++k) {
      rep.strategies[k].der.push_back(r.scores[k].der);
      rep.nonconverged_clusterings += !r.clustering_converged[k];
    }
    if (on_stream) on_stream(i, r);
  }
  return rep;
}

inline void write_benchmark_text(std::ostream& os, const BenchmarkReport& rep) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %10s %8s %8s\n", "Method", "DER%", "std", "streams");
  os << buf;
  for (const auto& s : rep.strategies) {
    std::snprintf(buf, sizeof buf, "%-20s %10.2f %8.2f %8zu\n", strategy_name(s.strategy).c_str(),
                  100.0 * s.mean(), 100.0 * s.stddev(), s.der.size());
    os << buf;
  }
  if (rep.nonconverged_clusterings > 0)
    os << "warning: affinity propagation did not converge in " << rep.nonconverged_clusterings
       << " run(s)\n";
}

inline void write_benchmark_csv(std::ostream& os, const BenchmarkReport& rep) {
  os << "strategy,der_mean,der_std,streams\n";
  char buf[160];
  for (const auto& s : rep.strategies) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%.6f,%zu\n", strategy_name(s.strategy).c_str(),
                  100.0 * s.mean(), 100.0 * s.stddev(), s.der.size());
    os << buf;
  }
}

}  // namespace compemb
