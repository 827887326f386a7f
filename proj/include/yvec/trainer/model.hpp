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

// Encoder + TDNN aggregator + embedding head + AM-Softmax classifier as one
// trainable unit.

#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/aggregator/am_softmax.hpp"
#include "yvec/aggregator/tdnn.hpp"
#include "yvec/encoder/encoder.hpp"

namespace yvec::trainer {

struct ModelConfig {
  encoder::EncoderConfig encoder = encoder::preset("yvector-5");
  aggregator::TdnnConfig tdnn;
  aggregator::AmSoftmaxConfig am;
  std::size_t n_classes = 2;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Preset encoder with every width (encoder, TDNN, head) multiplied by `width`.
inline ModelConfig make_model_config(const std::string& preset, std::size_t n_classes,
                                     double width = 1.0) {
  ModelConfig cfg;
  cfg.encoder = encoder::preset(preset);
  if (width != 1.0) {
    cfg.encoder = encoder::scale_widths(cfg.encoder, width);
    cfg.tdnn = aggregator::scale_widths(cfg.tdnn, width);
  }
  cfg.n_classes = n_classes;
  return cfg;
}

inline void validate(const ModelConfig& cfg) {
  encoder::validate(cfg.encoder);
  aggregator::validate(cfg.tdnn);
  aggregator::validate(cfg.am);
  if (cfg.n_classes < 2) throw ConfigError("model needs at least 2 speaker classes");
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"encoder", c.encoder}, {"tdnn", c.tdnn}, {"am_softmax", c.am}, {"n_classes", c.n_classes}};
}
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("encoder").get_to(c.encoder);
  j.at("tdnn").get_to(c.tdnn);
  j.at("am_softmax").get_to(c.am);
  j.at("n_classes").get_to(c.n_classes);
}

template <typename T>
class Model {
 public:
  struct Output {
    Var<T> embedding;
    Var<T> last_fc;
  };

  Model(ModelConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), params_(std::make_unique<ParameterSet<T>>()) {
    validate(cfg_);
    Rng rng(seed);
    enc_ = encoder::register_params(*params_, cfg_.encoder, rng);
    tdnn_ = aggregator::register_tdnn(*params_, cfg_.tdnn, cfg_.encoder.output_channels(), rng);
    head_ = aggregator::register_head(*params_, cfg_.tdnn, rng);
    classifier_ =
        &aggregator::register_classifier(*params_, cfg_.n_classes, cfg_.tdnn.fc2_dim, rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterSet<T>& params() noexcept { return *params_; }
  const ParameterSet<T>& params() const noexcept { return *params_; }
  const aggregator::HeadParams<T>& head() const noexcept { return head_; }
  const encoder::EncoderParams<T>& encoder_params() const noexcept { return enc_; }

  /// Waveform [L] -> embedding and classifier features.
  Output forward(Tape<T>& tape, std::span<const float> wave,
                 const encoder::ForwardContext& ctx) const {
    Tensor<T> x({1, wave.size()});
    for (std::size_t i = 0; i < wave.size(); ++i) x[i] = static_cast<T>(wave[i]);
    auto frames = encoder::encode(tape.constant(std::move(x)), cfg_.encoder, enc_, ctx);
    auto pooled = ops::stat_pool(aggregator::tdnn_forward(frames, cfg_.tdnn, tdnn_));
    auto h = aggregator::head_forward(pooled, cfg_.tdnn, head_);
    return {h.embedding, h.last_fc};
  }

  Var<T> classification_loss(Tape<T>& tape, const Output& out, std::size_t label) const {
    return aggregator::am_softmax_loss(out.last_fc, tape.param(*classifier_), {label}, cfg_.am);
  }

  /// Index of the class weight with the largest cosine.
  std::size_t predict(const Output& out) const {
    const auto cos = aggregator::cosine_logits(out.last_fc.value(), classifier_->value);
    std::size_t best = 0;
    for (std::size_t j = 1; j < cos.numel(); ++j) {
      if (cos[j] > cos[best]) best = j;
    }
    return best;
  }

  /// Inference-mode embedding.
  std::vector<float> embed(std::span<const float> wave) const {
    Tape<T> tape;
    const auto out = forward(tape, wave, {});
    const auto& e = out.embedding.value();
    return std::vector<float>(e.values().begin(), e.values().end());
  }

 private:
  ModelConfig cfg_;
  std::unique_ptr<ParameterSet<T>> params_;
  encoder::EncoderParams<T> enc_;
  aggregator::TdnnParams<T> tdnn_;
  aggregator::HeadParams<T> head_;
  Parameter<T>* classifier_ = nullptr;
};

}  // namespace yvec::trainer
