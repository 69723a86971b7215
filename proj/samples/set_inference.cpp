// samples/set_inference.cpp

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

// Identifies the speakers active in a synthetic mixture.
//
//   sample_set_inference [model.txt]
//
// Without a model file a CmpEm model is trained for a few hundred episodes
// first, which takes a couple of seconds.

#include <algorithm>
#include <cstdio>
#include <exception>

#include "compemb/compemb.hpp"

using namespace compemb;

int main(int argc, char** argv) try {
  const SpeakerBank bank = make_bank(1, 2600, 64, 0.3);
  const SpeakerSplits splits{{0, 2000}, {2000, 200}, {2200, 400}};

  CompositionalModel model;
  if (argc > 1) {
    model = load_model(argv[1]);
  } else {
    TrainConfig cfg;
    cfg.episodes_train = 400;
    cfg.episodes_val = 50;
    cfg.val_every = 100;
    model = train(init_model({}, Variant::kCmpEm, 1), bank, splits, cfg).best;
    std::printf("trained %s for %d episodes\n", variant_name(model.variant).c_str(),
                cfg.episodes_train);
  }
  if (!model.g) {
    std::fprintf(stderr, "model has no composition function\n");
    return 1;
  }

  // Five enrolled test speakers and one mixture of three of them.
  Rng rng(derive_seed(7, "sample"));
  const std::vector<int> speakers = sample_speakers(splits.test, 5, rng);
  std::vector<Vec> enrollments;
  for (int s : speakers) enrollments.push_back(synth_mixture(bank, SpeakerSet{s}, rng));
  const SpeakerSet truth{speakers[0], speakers[2], speakers[4]};
  const Vec x = synth_mixture(bank, truth, rng);

  const EnrollmentTable table = build_enrollment_table(model, enrollments, 3);
  const Prediction p = infer_set(model, table, x);

  auto global = [&](const SpeakerSet& local) {
    SpeakerSet ids;
    for (int i : local) ids.insert(speakers[static_cast<std::size_t>(i)]);
    return ids;
  };
  std::printf("enrolled speakers:");
  for (int s : speakers) std::printf(" %d", s);
  std::printf("\ntrue set:      %s\n", truth.str().c_str());
  std::printf("predicted set: %s\n", global(p.predicted_set).str().c_str());

  auto ranked = p.distances;
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.second < b.second; });
  std::printf("nearest candidates:\n");
  for (std::size_t i = 0; i < 5 && i < ranked.size(); ++i)
    std::printf("  %-16s %.4f\n", global(ranked[i].first).str().c_str(), ranked[i].second);
  return 0;
} catch (const std::exception& e) {
  std::fprintf(stderr, "error: %s\n", e.what());
  return 2;
}
