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

// x-vector style frame aggregator: five time-delay layers, statistics
// pooling, and a two-layer fully connected head whose first layer is the
// speaker embedding.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/encoder/encoder.hpp"
#include "yvec/numerics/ops.hpp"

namespace yvec::aggregator {

struct TdnnConfig {
  std::vector<std::vector<int>> contexts = {{-2, -1, 0, 1, 2}, {-2, 0, 2}, {-3, 0, 3}, {0}, {0}};
  std::vector<std::size_t> widths = {512, 512, 512, 512, 1500};
  std::size_t embedding_dim = 512;
  std::size_t fc2_dim = 512;
  double leaky_slope = 0.2;

  std::size_t pooled_dim() const { return 2 * widths.back(); }

  /// Frames consumed by the layer contexts: T' = T - span.
  std::size_t context_span() const {
    std::size_t span = 0;
    for (const auto& c : contexts) span += static_cast<std::size_t>(c.back() - c.front());
    return span;
  }

  friend bool operator==(const TdnnConfig&, const TdnnConfig&) = default;
};

/// Symmetric, evenly spaced context -> (kernel, dilation).
struct ContextGeometry {
  std::size_t kernel = 1;
  std::size_t dilation = 1;
};

inline ContextGeometry context_geometry(const std::vector<int>& offsets) {
  if (offsets.empty()) throw ConfigError("tdnn context must not be empty");
  const std::size_t k = offsets.size();
  if (offsets.front() != -offsets.back()) {
    throw ConfigError("tdnn context must be symmetric around 0");
  }
  if (k == 1) {
    if (offsets[0] != 0) throw ConfigError("single-offset tdnn context must be {0}");
    return {1, 1};
  }
  const int step = offsets[1] - offsets[0];
  if (step <= 0) throw ConfigError("tdnn context offsets must increase");
  for (std::size_t i = 1; i < k; ++i) {
    if (offsets[i] - offsets[i - 1] != step) {
      throw ConfigError("tdnn context offsets must be evenly spaced");
    }
  }
  return {k, static_cast<std::size_t>(step)};
}

inline void validate(const TdnnConfig& cfg) {
  if (cfg.contexts.size() != cfg.widths.size() || cfg.contexts.empty()) {
    throw ConfigError("tdnn needs one width per context");
  }
  for (const auto& c : cfg.contexts) context_geometry(c);
  for (auto w : cfg.widths) {
    if (w == 0) throw ConfigError("tdnn widths must be positive");
  }
  if (cfg.embedding_dim == 0 || cfg.fc2_dim == 0) {
    throw ConfigError("embedding dimension must be positive");
  }
}

inline TdnnConfig scale_widths(TdnnConfig cfg, double factor) {
  if (!(factor > 0)) throw ConfigError("width scale must be positive");
  auto scale = [factor](std::size_t c) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c * factor)));
  };
  for (auto& w : cfg.widths) w = scale(w);
  cfg.embedding_dim = scale(cfg.embedding_dim);
  cfg.fc2_dim = scale(cfg.fc2_dim);
  return cfg;
}

inline void to_json(nlohmann::json& j, const TdnnConfig& c) {
  j = {{"contexts", c.contexts},
       {"widths", c.widths},
       {"embedding_dim", c.embedding_dim},
       {"fc2_dim", c.fc2_dim},
       {"leaky_slope", c.leaky_slope}};
}
inline void from_json(const nlohmann::json& j, TdnnConfig& c) {
  j.at("contexts").get_to(c.contexts);
  j.at("widths").get_to(c.widths);
  j.at("embedding_dim").get_to(c.embedding_dim);
  j.at("fc2_dim").get_to(c.fc2_dim);
  j.at("leaky_slope").get_to(c.leaky_slope);
}

template <typename T>
struct LinearParams {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
};

template <typename T>
struct TdnnParams {
  std::vector<encoder::ConvBlockParams<T>> layers;
};

/// fc1 (embedding) -> LeakyReLU -> Norm -> fc2 -> LeakyReLU -> Norm.
template <typename T>
struct HeadParams {
  LinearParams<T> fc1;
  Parameter<T>* norm1_gain = nullptr;
  Parameter<T>* norm1_bias = nullptr;
  LinearParams<T> fc2;
  Parameter<T>* norm2_gain = nullptr;
  Parameter<T>* norm2_bias = nullptr;
};

template <typename T>
TdnnParams<T> register_tdnn(ParameterSet<T>& set, const TdnnConfig& cfg, std::size_t in_channels,
                            Rng& rng) {
  validate(cfg);
  TdnnParams<T> p;
  std::size_t cin = in_channels;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const auto geo = context_geometry(cfg.contexts[i]);
    p.layers.push_back(encoder::detail::add_conv_block<T>(
        set, "tdnn.layer" + std::to_string(i + 1), cfg.widths[i], cin, geo.kernel, rng));
    cin = cfg.widths[i];
  }
  return p;
}

template <typename T>
HeadParams<T> register_head(ParameterSet<T>& set, const TdnnConfig& cfg, Rng& rng) {
  using encoder::detail::fan_in_uniform;
  HeadParams<T> h;
  const std::size_t pooled = cfg.pooled_dim();
  h.fc1.weight = &set.add("head.fc1.weight",
                          fan_in_uniform<T>({cfg.embedding_dim, pooled}, pooled, rng));
  h.fc1.bias = &set.add("head.fc1.bias", Tensor<T>({cfg.embedding_dim}));
  h.norm1_gain = &set.add("head.norm1.gain", Tensor<T>({cfg.embedding_dim}, T(1)));
  h.norm1_bias = &set.add("head.norm1.bias", Tensor<T>({cfg.embedding_dim}));
  h.fc2.weight = &set.add("head.fc2.weight", fan_in_uniform<T>({cfg.fc2_dim, cfg.embedding_dim},
                                                               cfg.embedding_dim, rng));
  h.fc2.bias = &set.add("head.fc2.bias", Tensor<T>({cfg.fc2_dim}));
  h.norm2_gain = &set.add("head.norm2.gain", Tensor<T>({cfg.fc2_dim}, T(1)));
  h.norm2_bias = &set.add("head.norm2.bias", Tensor<T>({cfg.fc2_dim}));
  return h;
}

template <typename T>
TdnnParams<T> bind_tdnn(ParameterSet<T>& set, const TdnnConfig& cfg) {
  TdnnParams<T> p;
  for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
    const std::string prefix = "tdnn.layer" + std::to_string(i + 1);
    p.layers.push_back({&set.at(prefix + ".weight"), &set.at(prefix + ".bias"),
                        &set.at(prefix + ".norm.gain"), &set.at(prefix + ".norm.bias")});
  }
  return p;
}

template <typename T>
HeadParams<T> bind_head(ParameterSet<T>& set) {
  HeadParams<T> h;
  h.fc1 = {&set.at("head.fc1.weight"), &set.at("head.fc1.bias")};
  h.norm1_gain = &set.at("head.norm1.gain");
  h.norm1_bias = &set.at("head.norm1.bias");
  h.fc2 = {&set.at("head.fc2.weight"), &set.at("head.fc2.bias")};
  h.norm2_gain = &set.at("head.norm2.gain");
  h.norm2_bias = &set.at("head.norm2.bias");
  return h;
}

/// Time-delay layers over [F x T] frames; each is Conv -> Norm -> LeakyReLU.
/// Returns [width_last x (T - span)].
template <typename T>
Var<T> tdnn_forward(const Var<T>& frames, const TdnnConfig& cfg, const TdnnParams<T>& params) {
  const std::size_t span = cfg.context_span();
  if (frames.shape().size() != 2 || frames.dim(1) < span + 1) {
    throw InputTooShortError("tdnn: " + shape_str(frames.shape()) + " has fewer than " +
                             std::to_string(span + 1) + " frames needed by the context span");
  }
  Tape<T>& tape = *frames.tape();
  Var<T> x = frames;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto geo = context_geometry(cfg.contexts[i]);
    const auto& p = params.layers[i];
    x = ops::conv1d(x, tape.param(*p.weight), tape.param(*p.bias), 1, geo.dilation,
                    "tdnn.layer" + std::to_string(i + 1));
    x = ops::layer_norm_channels(x, tape.param(*p.norm_gain), tape.param(*p.norm_bias));
    x = ops::leaky_relu(x, static_cast<T>(cfg.leaky_slope));
  }
  return x;
}

template <typename T>
struct HeadOutput {
  Var<T> embedding;  // fc1 output before its activation
  Var<T> last_fc;    // input features of the classification layer
};

/// Runs the fully connected head on pooled statistics [2D].
template <typename T>
HeadOutput<T> head_forward(const Var<T>& pooled, const TdnnConfig& cfg, const HeadParams<T>& h) {
  Tape<T>& tape = *pooled.tape();
  const T slope = static_cast<T>(cfg.leaky_slope);
  HeadOutput<T> out;
  out.embedding = ops::linear(pooled, tape.param(*h.fc1.weight), tape.param(*h.fc1.bias));
  const std::size_t e = out.embedding.value().numel();
  Var<T> x = ops::reshape(ops::leaky_relu(out.embedding, slope), {e, 1});
  x = ops::layer_norm_channels(x, tape.param(*h.norm1_gain), tape.param(*h.norm1_bias));
  x = ops::linear(x, tape.param(*h.fc2.weight), tape.param(*h.fc2.bias));
  x = ops::layer_norm_channels(ops::leaky_relu(x, slope), tape.param(*h.norm2_gain),
                               tape.param(*h.norm2_bias));
  out.last_fc = ops::reshape(x, {x.value().numel()});
  return out;
}

/// lambda * (|W_fc1|^2 + |W_fc2|^2) as a scalar on the tape.
template <typename T>
Var<T> l2_penalty(Tape<T>& tape, const HeadParams<T>& h, T lambda) {
  return ops::scale(ops::add(ops::sum_squares(tape.param(*h.fc1.weight)),
                             ops::sum_squares(tape.param(*h.fc2.weight))),
                    lambda);
}

}  // namespace yvec::aggregator
