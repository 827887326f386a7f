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
#include <functional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/audio/waveform.hpp"
#include "yvec/numerics/optim.hpp"
#include "yvec/numerics/parallel.hpp"
#include "yvec/trainer/config.hpp"
#include "yvec/trainer/dataset.hpp"
#include "yvec/trainer/model.hpp"

namespace yvec::trainer {

/// Position in the run. `rng` is the text state of the epoch sampler, so a
/// run can resume in the middle of an epoch.
struct TrainerState {
  std::size_t epoch = 0;
  std::size_t batch = 0;  // next batch within the epoch
  std::size_t step = 0;   // optimizer steps taken so far
  std::string rng;

  friend bool operator==(const TrainerState&, const TrainerState&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TrainerState, epoch, batch, step, rng)

struct BatchRecord {
  std::size_t epoch = 0;
  std::size_t batch = 0;
  std::size_t step = 0;
  std::size_t size = 0;
  double lr = 0;
  double loss = 0;  // AM-Softmax mean plus the L2 term
  double acc = 0;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  std::size_t batches = 0;
  std::size_t samples = 0;
  double mean_loss = 0;
  double accuracy = 0;
};

inline std::string rng_state(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

inline Rng rng_from_state(const std::string& text) {
  Rng rng;
  std::istringstream is(text);
  is >> rng;
  if (!is) throw FormatError("corrupt RNG state");
  return rng;
}

/// Speaker-classification training with SGD + momentum.
///
/// Each sample of a batch gets its own tape and gradient buffer; buffers are
/// summed in sample order, so results do not depend on the worker count.
class Trainer {
 public:
  Trainer(Model<float>& model, const TrainingSet& data, TrainConfig cfg)
      : model_(model), data_(data), cfg_(std::move(cfg)), opt_(model.params()) {
    validate(cfg_);
    if (data_.size() == 0) throw ConfigError("training set is empty");
    if (data_.n_classes != model_.config().n_classes) {
      throw ConfigError("training set has " + std::to_string(data_.n_classes) +
                        " classes, model expects " + std::to_string(model_.config().n_classes));
    }
    start_epoch(0);
  }

  const TrainConfig& config() const noexcept { return cfg_; }
  const TrainerState& state() const noexcept { return state_; }
  SgdMomentum<float>& optimizer() noexcept { return opt_; }
  const SgdMomentum<float>& optimizer() const noexcept { return opt_; }

  /// Receives one JSON object per batch: {epoch, step, lr, loss, acc}.
  void set_log(std::ostream* log) { log_ = log; }

  /// Restores position and optimizer velocity (e.g. from a checkpoint).
  void restore(const TrainerState& state, const std::vector<Tensor<float>>& velocity) {
    if (velocity.size() != opt_.velocity().size()) {
      throw ContractError("velocity does not match the parameter set");
    }
    for (std::size_t i = 0; i < velocity.size(); ++i) {
      if (velocity[i].shape() != opt_.velocity()[i].shape()) {
        throw ShapeError("velocity shape mismatch for " + model_.params()[i].name);
      }
      opt_.velocity()[i] = velocity[i];
    }
    state_ = state;
    rng_ = rng_from_state(state.rng);
  }

  bool finished() const noexcept { return state_.epoch >= cfg_.epochs; }

  /// Draws the next batch, applies one optimizer step, and advances.
  BatchRecord step() {
    const std::size_t first = state_.batch * cfg_.batch_size;
    const std::size_t b = std::min(cfg_.batch_size, cfg_.utterances_per_epoch - first);
    std::vector<Sample> batch(b);
    for (auto& s : batch) {
      const auto pick = static_cast<std::size_t>(uniform_index(rng_, data_.size()));
      s.wave = data_.waves[pick];
      s.label = data_.labels[pick];
      s.seed = rng_();
    }
    BatchRecord rec = apply_batch(batch);
    if (++state_.batch == cfg_.batches_per_epoch()) {
      start_epoch(state_.epoch + 1);
    } else {
      state_.rng = rng_state(rng_);
    }
    return rec;
  }

  /// One utterance of a batch; `seed` drives its crop and dropout masks.
  struct Sample {
    std::span<const float> wave;
    std::size_t label = 0;
    std::uint64_t seed = 0;
  };

  /// Forward/backward over `batch` and one SGD step at the current epoch's
  /// learning rate. Does not move the sampler.
  BatchRecord apply_batch(const std::vector<Sample>& batch) {
    const std::size_t b = batch.size();
    if (b == 0) throw ContractError("empty batch");
    auto& params = model_.params();
    const std::size_t lanes = std::min(effective_threads(cfg_.threads), b);
    if (lane_grads_.size() < lanes) {
      while (lane_grads_.size() < lanes) lane_grads_.emplace_back(params);
    }
    GradBuffer<float> total(params);
    std::vector<double> losses(b);
    std::vector<int> correct(b);
    const float inv_b = 1.0f / static_cast<float>(b);
    const std::size_t crop = cfg_.crop_samples();

    for (std::size_t wave0 = 0; wave0 < b; wave0 += lanes) {
      const std::size_t n = std::min(lanes, b - wave0);
      parallel_for(n, lanes, [&](std::size_t l) {
        const Sample& s = batch[wave0 + l];
        Rng rng(s.seed);
        const auto x = audio::random_crop(s.wave, crop, rng);
        Tape<float> tape;
        const auto out = model_.forward(tape, x, {true, &rng});
        auto loss = model_.classification_loss(tape, out, s.label);
        losses[wave0 + l] = loss.value()[0];
        correct[wave0 + l] = model_.predict(out) == s.label;
        lane_grads_[l].zero();
        tape.backward(ops::scale(loss, inv_b), &lane_grads_[l]);
      });
      for (std::size_t l = 0; l < n; ++l) accumulate(total, lane_grads_[l]);
    }

    Tape<float> tape;
    auto penalty = aggregator::l2_penalty(tape, model_.head(), static_cast<float>(cfg_.l2_lambda));
    tape.backward(penalty, &total);

    BatchRecord rec;
    rec.epoch = state_.epoch;
    rec.batch = state_.batch;
    rec.size = b;
    rec.lr = lr_at_epoch(cfg_, state_.epoch);
    for (std::size_t i = 0; i < b; ++i) {
      rec.loss += losses[i];
      rec.acc += correct[i];
    }
    rec.loss = rec.loss / static_cast<double>(b) + penalty.value()[0];
    rec.acc /= static_cast<double>(b);
    if (!std::isfinite(rec.loss)) {
      throw NumericError("non-finite loss at epoch " + std::to_string(state_.epoch) + " batch " +
                         std::to_string(state_.batch) + " (step " +
                         std::to_string(state_.step) + ")");
    }

    opt_.step(params, total, static_cast<float>(rec.lr), static_cast<float>(cfg_.momentum));
    rec.step = ++state_.step;
    if (log_) {
      *log_ << nlohmann::json{{"epoch", rec.epoch}, {"step", rec.step}, {"lr", rec.lr},
                              {"loss", rec.loss}, {"acc", rec.acc}}
                   .dump()
            << '\n';
    }
    return rec;
  }

  /// Runs the remaining batches of the current epoch.
  EpochMetrics train_epoch() {
    EpochMetrics m;
    m.epoch = state_.epoch;
    double loss = 0, hits = 0;
    do {
      const auto rec = step();
      loss += rec.loss * static_cast<double>(rec.size);
      hits += rec.acc * static_cast<double>(rec.size);
      m.samples += rec.size;
      ++m.batches;
    } while (state_.batch != 0);
    m.mean_loss = loss / static_cast<double>(m.samples);
    m.accuracy = hits / static_cast<double>(m.samples);
    return m;
  }

  /// Trains until cfg.epochs; `on_epoch` runs after every epoch and may stop
  /// the run by returning false.
  void run(const std::function<bool(const EpochMetrics&)>& on_epoch = {}) {
    while (!finished()) {
      const auto m = train_epoch();
      if (on_epoch && !on_epoch(m)) break;
    }
  }

 private:
  void start_epoch(std::size_t epoch) {
    state_.epoch = epoch;
    state_.batch = 0;
    rng_ = Rng(derive_seed({cfg_.seed, epoch}));
    state_.rng = rng_state(rng_);
  }

  static void accumulate(GradBuffer<float>& dst, const GradBuffer<float>& src) {
    for (std::size_t k = 0; k < dst.size(); ++k) {
      float* d = dst[k].data();
      const float* s = src[k].data();
      for (std::size_t i = 0; i < dst[k].numel(); ++i) d[i] += s[i];
    }
  }

  Model<float>& model_;
  const TrainingSet& data_;
  TrainConfig cfg_;
  SgdMomentum<float> opt_;
  TrainerState state_;
  Rng rng_;
  std::vector<GradBuffer<float>> lane_grads_;
  std::ostream* log_ = nullptr;
};

}  // namespace yvec::trainer
