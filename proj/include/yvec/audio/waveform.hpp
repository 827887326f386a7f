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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "yvec/error.hpp"
#include "yvec/numerics/rng.hpp"

namespace yvec::audio {

inline constexpr std::uint32_t kSampleRate = 16000;
/// 3.9 s at 16 kHz: the training crop length.
inline constexpr std::size_t kDefaultCropSamples = 62400;

struct WaveformUtterance {
  std::vector<float> samples;
  std::uint32_t sample_rate = kSampleRate;
  std::string speaker_id;
  std::string utterance_id;
  bool silent = false;  // set by normalize_by_max for all-zero input
};

inline void require_sample_rate(const WaveformUtterance& u) {
  if (u.sample_rate != kSampleRate) {
    throw FormatError(u.utterance_id + ": sample rate " +
                      std::to_string(u.sample_rate) + " Hz, expected 16000");
  }
}

/// Scales so the largest absolute sample is 1. All-zero input comes back
/// unchanged and flagged silent.
inline WaveformUtterance normalize_by_max(WaveformUtterance u) {
  require_sample_rate(u);
  float peak = 0.0f;
  for (float s : u.samples) peak = std::max(peak, std::abs(s));
  if (peak == 0.0f) {
    u.silent = true;
    return u;
  }
  u.silent = false;
  if (peak == 1.0f) return u;
  for (float& s : u.samples) s /= peak;
  return u;
}

namespace detail {

inline std::vector<float> window_or_tile(std::span<const float> samples,
                                         std::size_t start, std::size_t length) {
  std::vector<float> out(length);
  const std::size_t n = samples.size();
  for (std::size_t i = 0; i < length; ++i) out[i] = samples[(start + i) % n];
  return out;
}

}  // namespace detail

/// Uniformly placed window of exactly `length` samples. Utterances shorter
/// than `length` are tiled from their start and truncated.
inline std::vector<float> random_crop(std::span<const float> samples,
                                      std::size_t length, Rng& rng) {
  if (samples.empty()) throw EmptySequenceError("random_crop: empty utterance");
  if (length == 0) throw ConfigError("random_crop: crop length must be positive");
  std::size_t start = 0;
  if (samples.size() > length) {
    start = static_cast<std::size_t>(uniform_index(rng, samples.size() - length + 1));
  }
  return detail::window_or_tile(samples, start, length);
}

/// Deterministic centered window (tiled when short); used at evaluation.
inline std::vector<float> center_crop(std::span<const float> samples,
                                      std::size_t length) {
  if (samples.empty()) throw EmptySequenceError("center_crop: empty utterance");
  if (length == 0) throw ConfigError("center_crop: crop length must be positive");
  const std::size_t start = samples.size() > length ? (samples.size() - length) / 2 : 0;
  return detail::window_or_tile(samples, start, length);
}

}  // namespace yvec::audio
