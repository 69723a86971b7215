// compemb/synth.hpp

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

// Synthetic speakers, mixtures, few-shot episodes and diarization streams.
//
// A speaker is a fixed prototype vector; an utterance is the prototype plus
// isotropic gaussian noise. A mixture of a speaker set adds one utterance per
// speaker and rescales the sum to unit length (the vector analogue of adding
// waveforms and normalizing volume).

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "compemb/rng.hpp"
#include "compemb/speaker_set.hpp"

namespace compemb {

using Vec = std::vector<double>;

struct SpeakerBank {
  std::uint64_t seed = 0;
  std::size_t dim = 64;
  double within_speaker_noise = 0.3;
  std::vector<Vec> prototypes;

  int size() const { return static_cast<int>(prototypes.size()); }
  const Vec& prototype(int id) const {
    if (id < 0 || id >= size())
      throw std::out_of_range("unknown speaker id " + std::to_string(id));
    return prototypes[id];
  }
};

/// i.i.d. standard normal prototypes; a pure function of (seed, count, dim).
inline SpeakerBank make_bank(std::uint64_t seed, int count, std::size_t dim,
                             double within_speaker_noise) {
  if (count < 0 || dim == 0) throw std::invalid_argument("make_bank: bad size");
  if (within_speaker_noise < 0.0)
    throw std::invalid_argument("make_bank: within-speaker noise must be >= 0");
  SpeakerBank bank;
  bank.seed = seed;
  bank.dim = dim;
  bank.within_speaker_noise = within_speaker_noise;
  Rng rng(derive_seed(seed, "speaker-bank"));
  bank.prototypes.assign(count, Vec(dim));
  for (Vec& p : bank.prototypes)
    for (double& x : p) x = rng.normal();
  return bank;
}

/// Contiguous range of speaker ids, used to keep train/val/test speakers apart.
struct SpeakerPool {
  int first = 0;
  int count = 0;
};

inline Vec synth_utterance(const SpeakerBank& bank, int speaker, Rng& rng) {
  Vec u = bank.prototype(speaker);
  if (bank.within_speaker_noise > 0.0)
    for (double& x : u) x += bank.within_speaker_noise * rng.normal();
  return u;
}

inline void normalize_in_place(Vec& v) {
  double n = 0.0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (!(n >= 1e-12)) throw std::domain_error("degenerate normalization");
  for (double& x : v) x /= n;
}

/// Unit-length sum of one utterance per speaker, summed in ascending id order.
inline Vec synth_mixture(const SpeakerBank& bank, const SpeakerSet& speakers, Rng& rng) {
  if (speakers.empty()) throw std::invalid_argument("synth_mixture: empty speaker set");
  Vec sum(bank.dim, 0.0);
  for (int s : speakers) {
    const Vec u = synth_utterance(bank, s, rng);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += u[i];
  }
  normalize_in_place(sum);
  return sum;
}

/// As synth_mixture, but each speaker's noise comes from its own stream keyed
/// by (seed, speaker id), so the result does not depend on draw order.
inline Vec synth_mixture_keyed(const SpeakerBank& bank, const SpeakerSet& speakers,
                               std::uint64_t seed) {
  if (speakers.empty()) throw std::invalid_argument("synth_mixture: empty speaker set");
  Vec sum(bank.dim, 0.0);
  for (int s : speakers) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    const Vec u = synth_utterance(bank, s, rng);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += u[i];
  }
  normalize_in_place(sum);
  return sum;
}

/// Draws `k` distinct ids from the pool, in draw order.
inline std::vector<int> sample_speakers(const SpeakerPool& pool, int k, Rng& rng) {
  if (k > pool.count)
    throw std::invalid_argument("insufficient speakers: need " + std::to_string(k) +
                                ", pool has " + std::to_string(pool.count));
  std::vector<int> ids(pool.count);
  for (int i = 0; i < pool.count; ++i) ids[i] = pool.first + i;
  for (int i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(static_cast<std::size_t>(pool.count - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(k);
  return ids;
}

// ---------------------------------------------------------------------------
// Episodes

struct Example {
  Vec x;
  SpeakerSet label;  // positions into Episode::speakers
};

struct Episode {
  std::vector<int> speakers;  // global ids
  std::vector<Vec> enrollments;  // one clean single-speaker mixture each
  std::vector<Example> examples;
  int max_card = 3;

  int num_speakers() const { return static_cast<int>(speakers.size()); }
};

/// Examples cover every subset of the episode's speakers with
/// 1 <= |T| <= max_card, `examples_per_set` times each, in canonical order.
inline Episode sample_episode(const SpeakerBank& bank, const SpeakerPool& pool,
                              int n_speakers, int max_card, int examples_per_set,
                              Rng& rng) {
  if (n_speakers < 1 || max_card < 1 || examples_per_set < 0)
    throw std::invalid_argument("sample_episode: bad episode shape");
  if (pool.first < 0 || pool.first + pool.count > bank.size())
    throw std::invalid_argument("sample_episode: pool outside the bank");
  Episode ep;
  ep.max_card = std::min(max_card, n_speakers);
  ep.speakers = sample_speakers(pool, n_speakers, rng);
  for (int s : ep.speakers) ep.enrollments.push_back(synth_mixture(bank, SpeakerSet{s}, rng));
  for (const SpeakerSet& local : enumerate_subsets(n_speakers, ep.max_card)) {
    std::vector<int> global;
    for (int i : local) global.push_back(ep.speakers[i]);
    const SpeakerSet g(std::move(global));
    for (int r = 0; r < examples_per_set; ++r)
      ep.examples.push_back({synth_mixture(bank, g, rng), local});
  }
  return ep;
}

// ---------------------------------------------------------------------------
// Diarization streams

/// Frame-level diarization: each frame holds the set of active speakers.
struct Timeline {
  double frame_duration = 0.1;
  std::vector<SpeakerSet> frames;

  std::size_t size() const { return frames.size(); }
  std::vector<int> speakers() const {
    SpeakerSet all;
    for (const auto& f : frames)
      for (int s : f) all.insert(s);
    return all.ids();
  }
};

/// Half-open frame interval [begin, end).
struct Segment {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t length() const { return end - begin; }
};

struct TimelineOptions {
  double frame_duration = 0.1;
  double min_turn_s = 1.0;
  double max_turn_s = 8.0;
  double first_turn_min_s = 4.0;  // each speaker's first turn, kept overlap-free
  double pause_probability = 0.3;
  double max_pause_s = 1.0;
  double min_overlap_s = 0.5;
  double max_overlap_s = 2.0;
  bool allow_triple_overlap = false;  // stress testing only
};

struct Stream {
  Timeline reference;
  std::vector<Segment> turns;  // maximal runs of one non-empty speaker set
  std::vector<int> speakers;
};

inline double overlap_share(const Timeline& t) {
  std::size_t speech = 0, overlap = 0;
  for (const auto& f : t.frames) {
    speech += !f.empty();
    overlap += f.size() > 1;
  }
  return speech ? static_cast<double>(overlap) / static_cast<double>(speech) : 0.0;
}

/// Maximal runs of identical non-empty frame sets.
inline std::vector<Segment> speaker_turns(const Timeline& t) {
  std::vector<Segment> turns;
  for (std::size_t i = 0; i < t.frames.size();) {
    std::size_t j = i + 1;
    while (j < t.frames.size() && t.frames[j] == t.frames[i]) ++j;
    if (!t.frames[i].empty()) turns.push_back({i, j});
    i = j;
  }
  return turns;
}

/// Alternating single-speaker turns separated by optional pauses; overlap is
/// then added as interjections of a second speaker inside existing turns
/// until the overlapped share of speech reaches `overlap_fraction`.
inline Stream generate_timeline(const SpeakerPool& pool, int n_speakers,
                                double duration_s, double overlap_fraction, Rng& rng,
                                const TimelineOptions& opt = {}) {
  if (!(duration_s > 0.0)) throw std::invalid_argument("generate_timeline: duration must be > 0");
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw std::invalid_argument("generate_timeline: overlap fraction must be in [0, 1)");
  if (n_speakers < 1) throw std::invalid_argument("generate_timeline: need a speaker");
  const double fd = opt.frame_duration;
  const auto total = static_cast<std::size_t>(std::llround(duration_s / fd));
  if (total == 0) throw std::invalid_argument("generate_timeline: duration shorter than a frame");
  auto frames_of = [&](double s) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s / fd)));
  };

  Stream out;
  out.speakers = sample_speakers(pool, n_speakers, rng);
  out.reference.frame_duration = fd;
  out.reference.frames.assign(total, SpeakerSet{});
  auto& frames = out.reference.frames;

  std::vector<int> first_order(n_speakers);
  for (int i = 0; i < n_speakers; ++i) first_order[i] = i;
  for (int i = n_speakers - 1; i > 0; --i)
    std::swap(first_order[i], first_order[rng.index(static_cast<std::size_t>(i + 1))]);

  std::vector<Segment> base_turns;
  std::vector<int> base_speaker;
  std::vector<bool> is_protected;
  std::size_t cursor = 0;
  int prev = -1;
  for (std::size_t k = 0; cursor < total; ++k) {
    if (k > 0 && rng.bernoulli(opt.pause_probability))
      cursor += frames_of(rng.uniform(0.1, opt.max_pause_s));
    if (cursor >= total) break;
    int who;
    double len_s;
    if (k < static_cast<std::size_t>(n_speakers)) {
      who = first_order[k];
      len_s = rng.uniform(opt.first_turn_min_s, opt.max_turn_s);
    } else {
      who = n_speakers == 1 ? 0 : static_cast<int>(rng.index(n_speakers - 1));
      if (n_speakers > 1 && who >= prev) ++who;
      len_s = rng.uniform(opt.min_turn_s, opt.max_turn_s);
    }
    const std::size_t end = std::min(total, cursor + frames_of(len_s));
    for (std::size_t t = cursor; t < end; ++t) frames[t] = SpeakerSet{out.speakers[who]};
    base_turns.push_back({cursor, end});
    base_speaker.push_back(who);
    is_protected.push_back(k < static_cast<std::size_t>(n_speakers));
    prev = who;
    cursor = end;
  }

  std::size_t speech = 0;
  for (const auto& f : frames) speech += !f.empty();
  const auto target = static_cast<std::size_t>(
      std::llround(overlap_fraction * static_cast<double>(speech)));
  std::size_t overlapped = 0;
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < base_turns.size(); ++i)
    if (!is_protected[i] && base_turns[i].length() >= 3) eligible.push_back(i);

  const std::size_t max_attempts = 50 * (eligible.size() + 1);
  for (std::size_t attempt = 0;
       overlapped < target && n_speakers > 1 && !eligible.empty() && attempt < max_attempts;
       ++attempt) {
    const Segment turn = base_turns[eligible[rng.index(eligible.size())]];
    std::size_t len = frames_of(rng.uniform(opt.min_overlap_s, opt.max_overlap_s));
    len = std::min({len, target - overlapped, turn.length() - 2});
    if (len == 0) continue;
    // Keep one clean frame at each end of the host turn.
    const std::size_t start = turn.begin + 1 + rng.index(turn.length() - 1 - len);
    bool clear = true;
    for (std::size_t t = start; t < start + len && clear; ++t)
      clear = opt.allow_triple_overlap ? (!frames[t].empty() && frames[t].size() <= 2)
                                       : frames[t].size() == 1;
    if (!clear) continue;
    int other;
    bool fresh;
    std::size_t tries = 0;
    do {
      other = out.speakers[rng.index(static_cast<std::size_t>(n_speakers))];
      fresh = true;
      for (std::size_t t = start; t < start + len && fresh; ++t)
        fresh = !frames[t].contains(other);
    } while (!fresh && ++tries < 32);
    if (!fresh) continue;
    for (std::size_t t = start; t < start + len; ++t) {
      if (frames[t].size() == 1) ++overlapped;
      frames[t].insert(other);
    }
  }
  out.turns = speaker_turns(out.reference);
  return out;
}

/// Simulated speaker-change detector: each internal boundary is dropped with
/// probability `miss_rate` and otherwise shifted by up to `jitter_frames`.
inline std::vector<Segment> detect_turns(const Timeline& reference,
                                         const std::vector<Segment>& oracle_turns,
                                         double miss_rate, std::size_t jitter_frames,
                                         Rng& rng) {
  if (miss_rate == 0.0 && jitter_frames == 0) return oracle_turns;
  std::vector<Segment> out;
  for (const Segment& t : oracle_turns) {
    if (!out.empty() && out.back().end == t.begin && rng.bernoulli(miss_rate)) {
      out.back().end = t.end;
      continue;
    }
    out.push_back(t);
  }
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i - 1].end != out[i].begin || jitter_frames == 0) continue;
    const auto shift = static_cast<long long>(rng.index(2 * jitter_frames + 1)) -
                       static_cast<long long>(jitter_frames);
    const long long lo = static_cast<long long>(out[i - 1].begin) + 1;
    const long long hi = static_cast<long long>(out[i].end) - 1;
    const long long b =
        std::clamp(static_cast<long long>(out[i].begin) + shift, lo, hi);
    out[i - 1].end = out[i].begin = static_cast<std::size_t>(b);
  }
  (void)reference;
  return out;
}

/// One mixture feature per speech frame; silent frames get an empty vector.
inline std::vector<Vec> frame_features(const SpeakerBank& bank, const Timeline& t, Rng& rng) {
  std::vector<Vec> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!t.frames[i].empty()) out[i] = synth_mixture(bank, t.frames[i], rng);
  return out;
}

// ---------------------------------------------------------------------------
// RTTM-style text: `SPEAKER <file> 1 <onset> <duration> <speaker_id>`, one
// line per contiguous interval of one speaker; overlap gives concurrent lines.

inline void write_rttm(std::ostream& os, const Timeline& t, const std::string& file_id) {
  struct Line {
    std::size_t begin, end;
    int speaker;
  };
  std::vector<Line> lines;
  for (int s : t.speakers()) {
    for (std::size_t i = 0; i < t.size();) {
      if (!t.frames[i].contains(s)) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < t.size() && t.frames[j].contains(s)) ++j;
      lines.push_back({i, j, s});
      i = j;
    }
  }
  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) {
    return a.begin != b.begin ? a.begin < b.begin : a.speaker < b.speaker;
  });
  char buf[160];
  for (const Line& l : lines) {
    std::snprintf(buf, sizeof buf, "SPEAKER %s 1 %.3f %.3f %d\n", file_id.c_str(),
                  static_cast<double>(l.begin) * t.frame_duration,
                  static_cast<double>(l.end - l.begin) * t.frame_duration, l.speaker);
    os << buf;
  }
}

/// Reads the lines written by write_rttm. Standard 10-field RTTM lines are
/// also accepted (speaker name in field 8, which must be an integer here).
/// When `num_frames` is 0 the timeline ends with the last interval.
inline std::map<std::string, Timeline> read_rttm(std::istream& is, double frame_duration,
                                                 std::size_t num_frames = 0) {
  std::map<std::string, Timeline> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::vector<std::string> f;
    for (std::string w; ss >> w;) f.push_back(w);
    if (f.empty()) continue;
    if (f[0] != "SPEAKER" || (f.size() != 6 && f.size() != 10))
      throw std::runtime_error("rttm line " + std::to_string(lineno) + ": malformed");
    double onset = 0.0, dur = 0.0;
    int speaker = 0;
    try {
      onset = std::stod(f[3]);
      dur = std::stod(f[4]);
      std::size_t used = 0;
      const std::string& name = f.size() == 6 ? f[5] : f[7];
      speaker = std::stoi(name, &used);
      if (used != name.size()) throw std::invalid_argument(name);
    } catch (const std::exception&) {
      throw std::runtime_error("rttm line " + std::to_string(lineno) + ": bad field");
    }
    if (onset < 0.0 || dur < 0.0)
      throw std::runtime_error("rttm line " + std::to_string(lineno) + ": negative time");
    Timeline& t = out[f[1]];
    t.frame_duration = frame_duration;
    const auto b = static_cast<std::size_t>(std::llround(onset / frame_duration));
    const auto e = static_cast<std::size_t>(std::llround((onset + dur) / frame_duration));
    if (t.frames.size() < e) t.frames.resize(e);
    for (std::size_t i = b; i < e; ++i) t.frames[i].insert(speaker);
  }
  for (auto& [id, t] : out)
    if (num_frames > t.frames.size()) t.frames.resize(num_frames);
  return out;
}

}  // namespace compemb
