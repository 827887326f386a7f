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

#include <cmath>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "yvec/error.hpp"

namespace yvec::trainer {

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double decay_factor = 0.5;
  std::size_t decay_every_epochs = 60;
  std::size_t epochs = 300;
  std::size_t batch_size = 96;
  double crop_seconds = 3.9;
  std::size_t utterances_per_epoch = 240000;
  double l2_lambda = 1e-4;
  std::uint64_t seed = 1;
  std::size_t threads = 0;  // 0 = hardware concurrency

  std::size_t crop_samples() const {
    return static_cast<std::size_t>(std::lround(crop_seconds * 16000.0));
  }
  /// A batch larger than the epoch yields one partial batch.
  std::size_t batches_per_epoch() const {
    return (utterances_per_epoch + batch_size - 1) / batch_size;
  }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

inline void validate(const TrainConfig& c) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("train config: ") + what);
  };
  need(c.lr0 >= 0, "lr0 must be non-negative");
  need(c.momentum >= 0 && c.momentum < 1, "momentum must lie in [0, 1)");
  need(c.decay_factor > 0 && c.decay_factor <= 1, "decay_factor must lie in (0, 1]");
  need(c.decay_every_epochs > 0, "decay_every_epochs must be positive");
  need(c.epochs > 0, "epochs must be positive");
  need(c.batch_size > 0, "batch_size must be positive");
  need(c.crop_seconds > 0, "crop_seconds must be positive");
  need(c.utterances_per_epoch > 0, "utterances_per_epoch must be positive");
  need(c.l2_lambda >= 0, "l2_lambda must be non-negative");
}

/// Step schedule: lr0 * decay_factor ^ floor(epoch / decay_every_epochs).
inline double lr_at_epoch(const TrainConfig& c, std::size_t epoch) {
  const auto drops = static_cast<int>(epoch / c.decay_every_epochs);
  double lr = c.lr0;
  for (int i = 0; i < drops; ++i) lr *= c.decay_factor;
  return lr;
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainConfig, lr0, momentum, decay_factor, decay_every_epochs,
                                   epochs, batch_size, crop_seconds, utterances_per_epoch,
                                   l2_lambda, seed, threads)

}  // namespace yvec::trainer
