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

// Small models and in-memory synthetic corpora for fast tests.

#include <string>
#include <vector>

#include "yvec/audio/synth.hpp"
#include "yvec/audio/waveform.hpp"
#include "yvec/trainer/dataset.hpp"
#include "yvec/trainer/model.hpp"

namespace yvec::testing {

/// Y-vector-5 topology at 5% width: about 20k parameters.
inline trainer::ModelConfig toy_model_config(std::size_t n_classes,
                                             const std::string& preset = "yvector-5") {
  return trainer::make_model_config(preset, n_classes, 0.05);
}

inline trainer::TrainingSet toy_training_set(std::size_t speakers, std::size_t utts,
                                             double seconds, std::uint64_t seed) {
  trainer::TrainingSet set;
  set.n_classes = speakers;
  for (std::size_t s = 0; s < speakers; ++s) {
    const auto spk = audio::synth_speaker(s, seed);
    for (std::size_t u = 0; u < utts; ++u) {
      const auto utt = audio::synth_utterance(spk, s, u, seconds, seed);
      audio::WaveformUtterance w;
      for (auto v : utt.pcm) w.samples.push_back(static_cast<float>(v) / 32768.0f);
      set.waves.push_back(audio::normalize_by_max(std::move(w)).samples);
      set.labels.push_back(s);
      set.utterance_ids.push_back(utt.utterance_id);
    }
  }
  return set;
}

}  // namespace yvec::testing
