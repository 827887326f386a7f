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

// Library usage: embed two WAV files with a trained checkpoint and print
// their cosine score.
//
//   score_pair run/checkpoint.yvec a.wav b.wav

#include <cstdio>
#include <exception>

#include "yvec/aggregator/embedding.hpp"
#include "yvec/audio/wav.hpp"
#include "yvec/trainer/checkpoint.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::fprintf(stderr, "usage: %s CHECKPOINT A.wav B.wav\n", argv[0]);
    return 2;
  }
  try {
    const auto ck = yvec::trainer::load_checkpoint(argv[1]);
    const auto model = yvec::trainer::model_from_checkpoint(ck);
    auto embed = [&](const char* path) {
      auto u = yvec::audio::normalize_by_max(yvec::audio::read_wav_pcm16(path));
      const auto x = yvec::audio::center_crop(u.samples, yvec::audio::kDefaultCropSamples);
      return yvec::aggregator::SpeakerEmbedding{path, model->embed(x)};
    };
    const double score = yvec::aggregator::cosine_score(embed(argv[2]), embed(argv[3]));
    std::printf("%.6f\n", score);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
