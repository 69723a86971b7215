// compemb/speaker_set.hpp

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

#pragma once

#include <algorithm>
#include <compare>
#include <initializer_list>
#include <string>
#include <vector>

namespace compemb {

/// A set of speaker ids kept sorted ascending and duplicate-free.
class SpeakerSet {
 public:
  SpeakerSet() = default;
  SpeakerSet(std::initializer_list<int> ids) : ids_(ids) { canonicalize(); }
  explicit SpeakerSet(std::vector<int> ids) : ids_(std::move(ids)) { canonicalize(); }

  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  const std::vector<int>& ids() const { return ids_; }
  auto begin() const { return ids_.begin(); }
  auto end() const { return ids_.end(); }
  int operator[](std::size_t i) const { return ids_[i]; }

  bool contains(int id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

  void insert(int id) {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) ids_.insert(it, id);
  }

  /// Set without its largest element.
  SpeakerSet without_last() const {
    SpeakerSet s;
    s.ids_.assign(ids_.begin(), ids_.end() - (ids_.empty() ? 0 : 1));
    return s;
  }

  std::string str() const {
    std::string s = "{";
    for (std::size_t i = 0; i < ids_.size(); ++i) {
      if (i) s += ',';
      s += std::to_string(ids_[i]);
    }
    return s + "}";
  }

  bool operator==(const SpeakerSet&) const = default;

  /// Canonical order: smaller sets first, then lexicographic ids.
  std::strong_ordering operator<=>(const SpeakerSet& o) const {
    if (auto c = ids_.size() <=> o.ids_.size(); c != 0) return c;
    return ids_ <=> o.ids_;
  }

 private:
  void canonicalize() {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  }

  std::vector<int> ids_;
};

/// All subsets of {0..n-1} with 1 <= |T| <= max_card, in canonical order.
inline std::vector<SpeakerSet> enumerate_subsets(int n, int max_card, int min_card = 1) {
  std::vector<SpeakerSet> out;
  for (int k = std::max(min_card, 1); k <= std::min(max_card, n); ++k) {
    std::vector<int> idx(k);
    for (int i = 0; i < k; ++i) idx[i] = i;
    while (true) {
      out.emplace_back(idx);
      int i = k - 1;
      while (i >= 0 && idx[i] == n - k + i) --i;
      if (i < 0) break;
      ++idx[i];
      for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
    }
  }
  return out;
}

inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace compemb
