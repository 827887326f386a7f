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

// Multi-scale waveform encoder: parallel filtering branches, channel
// concatenation, tf-SE downsampling blocks and multi-level aggregation.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "yvec/encoder/config.hpp"
#include "yvec/numerics/ops.hpp"
#include "yvec/numerics/rng.hpp"

namespace yvec::encoder {

/// Training flag and randomness for one forward pass.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;  // required when training with dropout
};

/// Conv -> Dropout -> LayerNorm -> ReLU parameters.
template <typename T>
struct ConvBlockParams {
  Parameter<T>* weight = nullptr;
  Parameter<T>* bias = nullptr;
  Parameter<T>* norm_gain = nullptr;
  Parameter<T>* norm_bias = nullptr;
};

/// tf-SE gates: W1 [F x F], b1 [F]; W2 stored as a [1 x F x 1] kernel, b2 [1].
template <typename T>
struct TfseParams {
  Parameter<T>* w1 = nullptr;
  Parameter<T>* b1 = nullptr;
  Parameter<T>* w2 = nullptr;
  Parameter<T>* b2 = nullptr;
};

template <typename T>
struct BranchParams {
  ConvBlockParams<T> filter;
  ConvBlockParams<T> dm;
};

template <typename T>
struct DownsampleParams {
  ConvBlockParams<T> conv;
  TfseParams<T> tfse;  // pointers stay null when tf-SE is disabled
};

template <typename T>
struct EncoderParams {
  std::vector<BranchParams<T>> branches;
  std::vector<DownsampleParams<T>> blocks;
};

namespace detail {

template <typename T>
Tensor<T> fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<T> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.storage()) v = static_cast<T>(uniform(rng, -bound, bound));
  return t;
}

template <typename T>
ConvBlockParams<T> add_conv_block(ParameterSet<T>& set, const std::string& prefix,
                                  std::size_t cout, std::size_t cin, std::size_t k,
                                  Rng& rng) {
  ConvBlockParams<T> p;
  p.weight = &set.add(prefix + ".weight", fan_in_uniform<T>({cout, cin, k}, cin * k, rng));
  p.bias = &set.add(prefix + ".bias", Tensor<T>({cout}));
  p.norm_gain = &set.add(prefix + ".norm.gain", Tensor<T>({cout}, T(1)));
  p.norm_bias = &set.add(prefix + ".norm.bias", Tensor<T>({cout}));
  return p;
}

}  // namespace detail

/// Registers encoder parameters (fan-in uniform weights, zero biases, unit
/// norm gains) under the "encoder." prefix.
template <typename T>
EncoderParams<T> register_params(ParameterSet<T>& set, const EncoderConfig& cfg, Rng& rng) {
  validate(cfg);
  EncoderParams<T> params;
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    const auto& b = cfg.branches[i];
    const std::string prefix = "encoder.branch" + std::to_string(i + 1);
    BranchParams<T> bp;
    bp.filter = detail::add_conv_block(set, prefix + ".filter", b.filter_channels, 1,
                                       b.kernel, rng);
    bp.dm = detail::add_conv_block(set, prefix + ".dm", b.dm_channels, b.filter_channels,
                                   b.dm_kernel, rng);
    params.branches.push_back(bp);
  }
  std::size_t cin = cfg.concat_channels();
  for (std::size_t i = 0; i < cfg.downsample_blocks.size(); ++i) {
    const auto& d = cfg.downsample_blocks[i];
    const std::string prefix = "encoder.ds" + std::to_string(i + 1);
    DownsampleParams<T> dp;
    dp.conv = detail::add_conv_block(set, prefix + ".conv", d.channels, cin, d.kernel, rng);
    if (cfg.tfse_enabled) {
      dp.tfse.w1 = &set.add(prefix + ".tfse.w1",
                            detail::fan_in_uniform<T>({d.channels, d.channels}, d.channels, rng));
      dp.tfse.b1 = &set.add(prefix + ".tfse.b1", Tensor<T>({d.channels}));
      dp.tfse.w2 = &set.add(prefix + ".tfse.w2",
                            detail::fan_in_uniform<T>({1, d.channels, 1}, d.channels, rng));
      dp.tfse.b2 = &set.add(prefix + ".tfse.b2", Tensor<T>({1}));
    }
    params.blocks.push_back(dp);
    cin = d.channels;
  }
  return params;
}

/// Re-binds parameter pointers by name (e.g. after loading a checkpoint).
template <typename T>
EncoderParams<T> bind_params(ParameterSet<T>& set, const EncoderConfig& cfg) {
  auto block = [&set](const std::string& prefix) {
    return ConvBlockParams<T>{&set.at(prefix + ".weight"), &set.at(prefix + ".bias"),
                              &set.at(prefix + ".norm.gain"), &set.at(prefix + ".norm.bias")};
  };
  EncoderParams<T> params;
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    const std::string prefix = "encoder.branch" + std::to_string(i + 1);
    params.branches.push_back({block(prefix + ".filter"), block(prefix + ".dm")});
  }
  for (std::size_t i = 0; i < cfg.downsample_blocks.size(); ++i) {
    const std::string prefix = "encoder.ds" + std::to_string(i + 1);
    DownsampleParams<T> dp;
    dp.conv = block(prefix + ".conv");
    if (cfg.tfse_enabled) {
      dp.tfse = {&set.at(prefix + ".tfse.w1"), &set.at(prefix + ".tfse.b1"),
                 &set.at(prefix + ".tfse.w2"), &set.at(prefix + ".tfse.b2")};
    }
    params.blocks.push_back(dp);
  }
  return params;
}

/// Conv -> Dropout -> Norm -> ReLU, the block form shared by every encoder layer.
template <typename T>
Var<T> conv_block(const Var<T>& x, const ConvBlockParams<T>& p, std::size_t stride,
                  double dropout_rate, const ForwardContext& ctx, const std::string& layer) {
  Tape<T>& tape = *x.tape();
  Var<T> y = ops::conv1d(x, tape.param(*p.weight), tape.param(*p.bias), stride, 1, layer);
  if (ctx.training && dropout_rate > 0) {
    if (!ctx.rng) throw ContractError(layer + ": training forward needs an rng");
    y = ops::dropout(y, dropout_rate, true, *ctx.rng);
  }
  y = ops::layer_norm_channels(y, tape.param(*p.norm_gain), tape.param(*p.norm_bias));
  return ops::relu(y);
}

/// X' = sigmoid(W1 * mean_t(X) + b1) (.) X, one gate per channel.
template <typename T>
Var<T> recalibrate_frequency(const Var<T>& x, const Var<T>& w1, const Var<T>& b1) {
  Var<T> gate = ops::sigmoid(ops::linear(ops::avgpool_time(x), w1, b1));
  return ops::scale_rows(x, gate);
}

/// Y_t = sigmoid(W2^T X'_t + b2) (.) X'_t, one scalar gate per frame.
/// w2 may be shaped [F], [F x 1] or [1 x F x 1].
template <typename T>
Var<T> recalibrate_time(const Var<T>& x, const Var<T>& w2, const Var<T>& b2) {
  const std::size_t f = x.dim(0);
  Var<T> kernel = w2.shape() == Shape{1, f, 1} ? w2 : ops::reshape(w2, {1, f, 1});
  Var<T> gate = ops::sigmoid(ops::conv1d(x, kernel, b2, 1, 1, "tfse.time"));
  return ops::scale_cols(x, gate);
}

/// Conv block, then (when enabled) frequency and time recalibration in that order.
template <typename T>
Var<T> downsample_block(const Var<T>& x, const DownsampleSpec& spec,
                        const DownsampleParams<T>& p, bool tfse_enabled, double dropout_rate,
                        const ForwardContext& ctx, const std::string& layer) {
  Var<T> y = conv_block(x, p.conv, spec.stride, dropout_rate, ctx, layer);
  if (!tfse_enabled) return y;
  Tape<T>& tape = *x.tape();
  y = recalibrate_frequency(y, tape.param(*p.tfse.w1), tape.param(*p.tfse.b1));
  return recalibrate_time(y, tape.param(*p.tfse.w2), tape.param(*p.tfse.b2));
}

struct MultiScaleTrace {
  std::vector<std::size_t> branch_lengths;
  std::size_t frames = 0;
  std::size_t channels = 0;
};

/// Runs every branch on the waveform [1 x L], truncates to the shortest
/// branch and concatenates along channels in config order.
template <typename T>
Var<T> multi_scale_filter(const Var<T>& wave, const EncoderConfig& cfg,
                          const EncoderParams<T>& params, const ForwardContext& ctx,
                          MultiScaleTrace* trace = nullptr) {
  if (wave.shape().size() != 2 || wave.dim(0) != 1) {
    throw ShapeError("multi_scale_filter: waveform must be [1 x L], got " +
                     shape_str(wave.shape()));
  }
  const std::size_t len = wave.dim(1);
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    const auto& b = cfg.branches[i];
    const std::size_t after_filter = chain_length(len, b.kernel, b.stride);
    if (after_filter == 0 || chain_length(after_filter, b.dm_kernel, b.dm_stride) == 0) {
      throw InputTooShortError("branch" + std::to_string(i + 1) + ": waveform of " +
                               std::to_string(len) + " samples is shorter than its receptive field");
    }
  }
  std::vector<Var<T>> outs;
  std::size_t frames = SIZE_MAX;
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    const auto& b = cfg.branches[i];
    const std::string tag = "branch" + std::to_string(i + 1);
    Var<T> y = conv_block(wave, params.branches[i].filter, b.stride, cfg.dropout_rate, ctx,
                          tag + ".filter");
    y = conv_block(y, params.branches[i].dm, b.dm_stride, cfg.dropout_rate, ctx, tag + ".dm");
    if (trace) trace->branch_lengths.push_back(y.dim(1));
    frames = std::min(frames, y.dim(1));
    outs.push_back(y);
  }
  for (auto& y : outs) y = ops::truncate_time(y, frames);
  Var<T> out = ops::concat_channels(outs);
  if (trace) {
    trace->frames = out.dim(1);
    trace->channels = out.dim(0);
  }
  return out;
}

/// Max-pools each earlier map by its decimation factor relative to the last
/// map (window = stride = factor), truncates to the last map's frames, and
/// concatenates along channels.
template <typename T>
Var<T> multilevel_aggregate(const std::vector<Var<T>>& maps,
                            const std::vector<std::size_t>& factors) {
  if (maps.empty()) throw ShapeError("multilevel_aggregate: no feature maps");
  if (factors.size() != maps.size()) {
    throw ConfigError("multilevel_aggregate: need one decimation factor per map");
  }
  if (maps.size() == 1) return maps.front();
  const std::size_t last = maps.back().dim(1);
  std::vector<Var<T>> parts;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    const std::size_t f = factors[i];
    const std::size_t pooled = f == 0 ? 0 : chain_length(maps[i].dim(1), f, f);
    // A factor off by 2x or more would pool to the wrong frame rate.
    if (pooled < last || pooled >= 2 * last + 1 || (i + 1 == maps.size() && f != 1)) {
      throw ConfigError("multilevel_aggregate: map " + std::to_string(i + 1) + " with " +
                        std::to_string(maps[i].dim(1)) + " frames and factor " +
                        std::to_string(f) + " cannot reach " + std::to_string(last) + " frames");
    }
    Var<T> y = f == 1 ? maps[i] : ops::maxpool1d(maps[i], f, f);
    parts.push_back(ops::truncate_time(y, last));
  }
  return ops::concat_channels(parts);
}

struct EncoderTrace {
  MultiScaleTrace branches;
  std::vector<std::size_t> block_frames;
  Shape output;
};

/// Full encoder: multi-scale filtering, downsampling blocks, and optional
/// multi-level aggregation of the block outputs.
template <typename T>
Var<T> encode(const Var<T>& wave, const EncoderConfig& cfg, const EncoderParams<T>& params,
              const ForwardContext& ctx, EncoderTrace* trace = nullptr) {
  Var<T> x = multi_scale_filter(wave, cfg, params, ctx, trace ? &trace->branches : nullptr);
  std::vector<Var<T>> taps;
  for (std::size_t i = 0; i < cfg.downsample_blocks.size(); ++i) {
    x = downsample_block(x, cfg.downsample_blocks[i], params.blocks[i], cfg.tfse_enabled,
                         cfg.dropout_rate, ctx, "ds" + std::to_string(i + 1));
    if (trace) trace->block_frames.push_back(x.dim(1));
    taps.push_back(x);
  }
  if (cfg.multilevel_aggregation && taps.size() > 1) {
    std::vector<std::size_t> factors(taps.size(), 1);
    for (std::size_t i = taps.size() - 1; i-- > 0;) {
      factors[i] = factors[i + 1] * cfg.downsample_blocks[i + 1].stride;
    }
    x = multilevel_aggregate(taps, factors);
  }
  if (trace) trace->output = x.shape();
  return x;
}

}  // namespace yvec::encoder
