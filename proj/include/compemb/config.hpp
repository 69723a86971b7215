// compemb/config.hpp

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

// Flat key=value run configuration. Every key has a default; files and
// overrides may only set registered keys.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "compemb/diarization.hpp"
#include "compemb/nets.hpp"
#include "compemb/training.hpp"

namespace compemb {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class RunConfig {
 public:
  struct Entry {
    std::string key;
    std::string value;
    std::string help;
  };

  /// Every recognised key with its default value.
  static RunConfig defaults() {
    RunConfig c;
    auto add = [&c](std::string k, std::string v, std::string h) {
      c.entries_.push_back({std::move(k), std::move(v), std::move(h)});
    };
    add("seed", "0", "root seed; every component derives its own stream from it");
    add("out", "out", "output directory");
    add("bank_seed", "1", "seed of the synthetic speaker bank");
    add("feature_dim", "64", "input feature dimension");
    add("within_speaker_noise", "0.3", "per-utterance gaussian noise around a prototype");
    add("speakers_train", "2000", "training speakers");
    add("speakers_val", "200", "validation speakers");
    add("speakers_test", "400", "held-out test speakers");
    add("hidden_dim", "128", "hidden width of f");
    add("embed_dim", "32", "embedding dimension");
    add("variant", "cmpem", "cmpem | cmpeml2 | singleem");
    add("g_init_noise", "0.01", "std of the random part of g's initial weights");
    add("lr", "0.0003", "Adam learning rate");
    add("adam_beta1", "0.9", "");
    add("adam_beta2", "0.999", "");
    add("adam_eps", "1e-8", "");
    add("margin", "0.1", "triplet margin");
    add("mining", "averaged", "averaged | hardest");
    add("episodes_train", "20000", "training episodes, one optimizer step each");
    add("episodes_val", "500", "validation episodes");
    add("val_every", "1000", "episodes between validation passes");
    add("n_speakers", "5", "speakers per episode");
    add("max_card", "3", "largest speaker set per example");
    add("examples_per_set", "2", "training examples per speaker set and episode");
    add("episodes_test", "2000", "evaluation episodes");
    add("eval_examples_per_set", "1", "evaluation examples per speaker set and episode");
    add("streams", "10", "diarization streams");
    add("stream_speakers", "4", "speakers per stream");
    add("stream_duration_s", "1800", "stream length in seconds");
    add("overlap_fraction", "0.19", "target share of overlapped speech");
    add("frame_duration", "0.1", "seconds per frame");
    add("scd_miss_rate", "0", "probability of dropping a speaker change");
    add("scd_jitter_frames", "0", "maximum speaker-change boundary shift");
    add("od_false_alarm_rate", "0", "overlap detector false-alarm rate per segment");
    add("od_miss_rate", "0", "overlap detector miss rate per segment");
    add("long_turn_s", "3.3", "turns at least this long define the clusters");
    add("segment_s", "1.0", "segment length");
    add("ap_damping", "0.8", "affinity propagation damping");
    add("ap_max_iter", "200", "");
    add("ap_convergence_iter", "15", "");
    add("ap_preference", "median", "median | <number>");
    add("gradcheck_tolerance", "1e-4", "maximum relative gradient error");
    add("gradcheck_networks", "4", "random small networks checked end to end");
    return c;
  }

  bool has(std::string_view key) const { return find(key) != nullptr; }

  void set(std::string_view key, std::string value) {
    Entry* e = find(key);
    if (e == nullptr) throw ConfigError("config: unknown key '" + std::string(key) + "'");
    e->value = std::move(value);
  }

  /// Applies "key=value".
  void set_assignment(std::string_view kv, std::string_view source = "--set") {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config: " + std::string(source) + ": expected key=value, got '" +
                        std::string(kv) + "'");
    set(trim(kv.substr(0, eq)), std::string(trim(kv.substr(eq + 1))));
  }

  /// Lines of key=value; blank lines and '#' comments are ignored.
  void parse(std::istream& is, const std::string& source) {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      std::string_view v = line;
      if (const auto hash = v.find('#'); hash != std::string_view::npos) v = v.substr(0, hash);
      v = trim(v);
      if (v.empty()) continue;
      set_assignment(v, source + ":" + std::to_string(lineno));
    }
  }

  void load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot read '" + path + "'");
    parse(in, path);
  }

  const std::string& get(std::string_view key) const {
    const Entry* e = find(key);
    if (e == nullptr) throw ConfigError("config: unknown key '" + std::string(key) + "'");
    return e->value;
  }

  double get_double(std::string_view key) const {
    const std::string& s = get(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) bad(key, "a number");
    return v;
  }

  long long get_int(std::string_view key) const {
    const std::string& s = get(key);
    long long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) bad(key, "an integer");
    return v;
  }

  int get_int32(std::string_view key) const {
    const long long v = get_int(key);
    if (v < INT32_MIN || v > INT32_MAX) bad(key, "a 32-bit integer");
    return static_cast<int>(v);
  }

  std::uint64_t get_u64(std::string_view key) const {
    const std::string& s = get(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) bad(key, "a non-negative integer");
    return v;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  void write(std::ostream& os) const {
    for (const Entry& e : entries_) os << e.key << '=' << e.value << '\n';
  }

  std::string str() const {
    std::ostringstream os;
    write(os);
    return os.str();
  }

 private:
  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }

  [[noreturn]] void bad(std::string_view key, const char* what) const {
    throw ConfigError("config: key '" + std::string(key) + "' expects " + what + ", got '" +
                      get(key) + "'");
  }

  Entry* find(std::string_view key) {
    for (Entry& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }
  const Entry* find(std::string_view key) const {
    for (const Entry& e : entries_)
      if (e.key == key) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

// ---------------------------------------------------------------------------
// Typed views. Each validates and throws ConfigError.

template <class F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline SpeakerSplits speaker_splits(const RunConfig& c) {
  SpeakerSplits s;
  const int tr = c.get_int32("speakers_train"), va = c.get_int32("speakers_val"),
            te = c.get_int32("speakers_test");
  if (tr < 1 || va < 1 || te < 1) throw ConfigError("config: speaker splits must be >= 1");
  s.train = {0, tr};
  s.val = {tr, va};
  s.test = {tr + va, te};
  return s;
}

inline SpeakerBank speaker_bank(const RunConfig& c) {
  const int dim = c.get_int32("feature_dim");
  const double sigma = c.get_double("within_speaker_noise");
  if (dim < 1) throw ConfigError("config: feature_dim must be >= 1");
  if (!(sigma >= 0.0)) throw ConfigError("config: within_speaker_noise must be >= 0");
  return make_bank(c.get_u64("bank_seed"), speaker_splits(c).total(),
                   static_cast<std::size_t>(dim), sigma);
}

inline ModelDims model_dims(const RunConfig& c) {
  const int in = c.get_int32("feature_dim"), hid = c.get_int32("hidden_dim"),
            emb = c.get_int32("embed_dim");
  if (in < 1 || hid < 1 || emb < 1) throw ConfigError("config: model dimensions must be >= 1");
  return {static_cast<std::size_t>(in), static_cast<std::size_t>(hid),
          static_cast<std::size_t>(emb)};
}

inline Variant variant_of(const RunConfig& c) {
  return as_config_error([&] { return parse_variant(c.get("variant")); });
}

inline TrainConfig train_config(const RunConfig& c) {
  TrainConfig t;
  t.lr = c.get_double("lr");
  t.margin = c.get_double("margin");
  t.episodes_train = c.get_int32("episodes_train");
  t.episodes_val = c.get_int32("episodes_val");
  t.episodes_test = c.get_int32("episodes_test");
  t.beta1 = c.get_double("adam_beta1");
  t.beta2 = c.get_double("adam_beta2");
  t.adam_eps = c.get_double("adam_eps");
  t.val_every = c.get_int32("val_every");
  t.seed = c.get_u64("seed");
  t.variant = variant_of(c);
  t.n_speakers = c.get_int32("n_speakers");
  t.max_card = c.get_int32("max_card");
  t.examples_per_set = c.get_int32("examples_per_set");
  const std::string& m = c.get("mining");
  if (m == "averaged")
    t.mining = Mining::kAveragedActive;
  else if (m == "hardest")
    t.mining = Mining::kHardest;
  else
    throw ConfigError("config: mining must be 'averaged' or 'hardest', got '" + m + "'");
  as_config_error([&] {
    t.validate();
    return 0;
  });
  const double g_noise = c.get_double("g_init_noise");
  if (!(g_noise >= 0.0)) throw ConfigError("config: g_init_noise must be >= 0");
  if (c.get_int32("eval_examples_per_set") < 1)
    throw ConfigError("config: eval_examples_per_set must be >= 1");
  return t;
}

inline BenchmarkConfig benchmark_config(const RunConfig& c) {
  BenchmarkConfig b;
  b.streams = c.get_int32("streams");
  b.n_speakers = c.get_int32("stream_speakers");
  b.duration_s = c.get_double("stream_duration_s");
  b.overlap_fraction = c.get_double("overlap_fraction");
  b.scd_miss_rate = c.get_double("scd_miss_rate");
  const long long jitter = c.get_int("scd_jitter_frames");
  if (jitter < 0) throw ConfigError("config: scd_jitter_frames must be >= 0");
  b.scd_jitter_frames = static_cast<std::size_t>(jitter);
  b.od_false_alarm_rate = c.get_double("od_false_alarm_rate");
  b.od_miss_rate = c.get_double("od_miss_rate");
  b.timeline.frame_duration = c.get_double("frame_duration");
  if (!(b.timeline.frame_duration > 0.0)) throw ConfigError("config: frame_duration must be > 0");
  b.diarization.long_turn_s = c.get_double("long_turn_s");
  b.diarization.segment_s = c.get_double("segment_s");
  if (!(b.diarization.long_turn_s > 0.0) || !(b.diarization.segment_s > 0.0))
    throw ConfigError("config: long_turn_s and segment_s must be > 0");
  b.diarization.clustering.damping = c.get_double("ap_damping");
  b.diarization.clustering.max_iter = c.get_int32("ap_max_iter");
  b.diarization.clustering.convergence_iter = c.get_int32("ap_convergence_iter");
  if (c.get("ap_preference") == "median")
    b.diarization.clustering.preference.reset();
  else
    b.diarization.clustering.preference = c.get_double("ap_preference");
  as_config_error([&] {
    b.validate();
    return 0;
  });
  return b;
}

}  // namespace compemb
