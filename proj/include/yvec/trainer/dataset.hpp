// Copyright (c) 2026 The yvec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <vector>

#include "yvec/audio/manifest.hpp"
#include "yvec/audio/waveform.hpp"
#include "yvec/numerics/parallel.hpp"

namespace yvec::trainer {

/// Peak-normalised waveforms held in memory with dense class labels.
struct TrainingSet {
  std::vector<std::vector<float>> waves;
  std::vector<std::size_t> labels;
  std::vector<std::string> utterance_ids;
  std::size_t n_classes = 0;

  std::size_t size() const noexcept { return waves.size(); }
};

/// Loads the listed utterances (all when `ids` is empty). Class indices come
/// from the full manifest, so subsets keep a stable labelling.
inline TrainingSet load_training_set(const audio::CorpusManifest& manifest,
                                     const std::vector<std::string>& ids = {},
                                     std::size_t threads = 0) {
  std::vector<const audio::ManifestRecord*> picked;
  if (ids.empty()) {
    for (const auto& r : manifest.records()) picked.push_back(&r);
  } else {
    for (const auto& id : ids) picked.push_back(&manifest.at(id));
  }
  if (picked.empty()) throw ConfigError("training set is empty");
  TrainingSet set;
  set.n_classes = manifest.num_speakers();
  set.waves.resize(picked.size());
  set.labels.resize(picked.size());
  set.utterance_ids.resize(picked.size());
  parallel_for(picked.size(), effective_threads(threads), [&](std::size_t i) {
    auto u = audio::normalize_by_max(manifest.load(*picked[i]));
    set.waves[i] = std::move(u.samples);
    set.labels[i] = manifest.class_of(picked[i]->speaker_id);
    set.utterance_ids[i] = picked[i]->utterance_id;
  });
  return set;
}

}  // namespace yvec::trainer
