// samples/score_rttm.cpp

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

// Scores a hypothesis RTTM file against a reference RTTM file.
//
//   sample_score_rttm reference.rttm hypothesis.rttm [frame_seconds]
//
// Files are matched by file id. Speaker names must be integers, as written by
// `compemb diarize --dump-rttm`. No forgiveness collar is applied.

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <string>

#include "compemb/diarization.hpp"

using namespace compemb;

namespace {

std::map<std::string, Timeline> load(const char* path, double frame) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(std::string("cannot read ") + path);
  return read_rttm(in, frame);
}

}  // namespace

int main(int argc, char** argv) try {
  if (argc < 3 || argc > 4) {
    std::fprintf(stderr, "usage: %s reference.rttm hypothesis.rttm [frame_seconds]\n", argv[0]);
    return 1;
  }
  const double frame = argc == 4 ? std::stod(argv[3]) : 0.1;
  auto ref = load(argv[1], frame);
  auto hyp = load(argv[2], frame);

  std::printf("%-20s %8s %8s %8s %8s\n", "file", "miss", "fa", "conf", "DER%");
  double err = 0.0, total = 0.0;
  for (auto& [id, r] : ref) {
    Timeline h;
    h.frame_duration = frame;
    if (auto it = hyp.find(id); it != hyp.end()) h = it->second;
    const std::size_t n = std::max(r.size(), h.size());
    r.frames.resize(n);
    h.frames.resize(n);
    const DerBreakdown d = der_score(r, h);
    std::printf("%-20s %8.2f %8.2f %8.2f %8.2f\n", id.c_str(), d.miss, d.false_alarm,
                d.confusion, 100.0 * d.der);
    err += d.error();
    total += d.total_reference_speech;
  }
  for (const auto& [id, h] : hyp)
    if (!ref.contains(id)) std::fprintf(stderr, "warning: %s has no reference\n", id.c_str());
  if (total > 0.0) std::printf("%-20s %35.2f\n", "overall", 100.0 * err / total);
  return 0;
} catch (const std::exception& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  return 2;
}
