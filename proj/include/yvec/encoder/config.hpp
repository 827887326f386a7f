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
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/error.hpp"

namespace yvec::encoder {

/// One multi-scale branch: a filtering conv followed by a dimension-match conv.
struct BranchSpec {
  std::size_t filter_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  std::size_t dm_channels = 0;
  std::size_t dm_kernel = 5;
  std::size_t dm_stride = 1;

  std::size_t decimation() const { return stride * dm_stride; }
  friend bool operator==(const BranchSpec&, const BranchSpec&) = default;
};

struct DownsampleSpec {
  std::size_t channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
  friend bool operator==(const DownsampleSpec&, const DownsampleSpec&) = default;
};

struct EncoderConfig {
  std::string name;
  std::vector<BranchSpec> branches;
  std::vector<DownsampleSpec> downsample_blocks;
  bool multilevel_aggregation = true;
  bool tfse_enabled = true;
  double dropout_rate = 0.1;

  std::size_t concat_channels() const {
    std::size_t c = 0;
    for (const auto& b : branches) c += b.dm_channels;
    return c;
  }

  /// Channels leaving the encoder (after optional multi-level concat).
  std::size_t output_channels() const {
    if (downsample_blocks.empty()) return concat_channels();
    if (!multilevel_aggregation) return downsample_blocks.back().channels;
    std::size_t c = 0;
    for (const auto& d : downsample_blocks) c += d.channels;
    return c;
  }

  /// Total input-sample decimation of the branch stage.
  std::size_t branch_decimation() const {
    return branches.empty() ? 0 : branches.front().decimation();
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

struct ValidationReport {
  std::vector<std::string> warnings;
};

/// Hard structural checks throw ConfigError; the 0.5 stride/kernel ratio is
/// a warning because the dimension-match layer uses a fixed kernel of 5.
inline ValidationReport validate(const EncoderConfig& cfg) {
  ValidationReport report;
  if (cfg.branches.empty()) throw ConfigError(cfg.name + ": encoder needs at least one branch");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw ConfigError(cfg.name + ": dropout_rate must lie in [0, 1)");
  }
  const std::size_t decimation = cfg.branches.front().decimation();
  for (std::size_t i = 0; i < cfg.branches.size(); ++i) {
    const auto& b = cfg.branches[i];
    const std::string tag = cfg.name + " branch" + std::to_string(i + 1);
    if (!b.filter_channels || !b.kernel || !b.stride || !b.dm_channels || !b.dm_kernel ||
        !b.dm_stride) {
      throw ConfigError(tag + ": all branch parameters must be positive");
    }
    if (b.decimation() != decimation) {
      throw ConfigError(tag + ": stride product " + std::to_string(b.decimation()) +
                        " differs from branch1's " + std::to_string(decimation));
    }
    if (b.kernel != 2 * b.stride) {
      report.warnings.push_back(tag + ": filter kernel " + std::to_string(b.kernel) +
                                " is not twice its stride " + std::to_string(b.stride));
    }
    if (b.dm_kernel != 2 * b.dm_stride) {
      report.warnings.push_back(tag + ": dimension-match kernel " +
                                std::to_string(b.dm_kernel) + " is not twice its stride " +
                                std::to_string(b.dm_stride));
    }
  }
  for (std::size_t i = 0; i < cfg.downsample_blocks.size(); ++i) {
    const auto& d = cfg.downsample_blocks[i];
    if (!d.channels || !d.kernel || !d.stride) {
      throw ConfigError(cfg.name + " downsample block " + std::to_string(i + 1) +
                        ": parameters must be positive");
    }
  }
  if (cfg.multilevel_aggregation && cfg.downsample_blocks.empty()) {
    throw ConfigError(cfg.name + ": multi-level aggregation needs downsampling blocks");
  }
  return report;
}

/// Frames after a valid conv/pool chain; 0 when the input is too short.
inline std::size_t chain_length(std::size_t length, std::size_t kernel, std::size_t stride) {
  return length < kernel ? 0 : (length - kernel) / stride + 1;
}

namespace presets {

inline std::vector<DownsampleSpec> table1_downsampling() {
  return {{512, 5, 2}, {512, 3, 2}, {512, 3, 2}};
}

/// Table 1 geometry (decimation 18) with a configurable first-layer width.
inline std::vector<BranchSpec> decimation18_branches(std::size_t per_branch) {
  return {{per_branch, 12, 6, 160, 5, 3},
          {per_branch, 18, 9, 160, 5, 2},
          {per_branch, 36, 18, 192, 5, 1}};
}

/// Decimation-24 geometry: strides {8, 12, 24}, kernels twice the stride.
inline std::vector<BranchSpec> decimation24_branches(std::size_t per_branch) {
  return {{per_branch, 16, 8, 160, 5, 3},
          {per_branch, 24, 12, 160, 5, 2},
          {per_branch, 48, 24, 192, 5, 1}};
}

inline EncoderConfig make(std::string name, std::vector<BranchSpec> branches, bool ml,
                          bool tfse) {
  EncoderConfig cfg;
  cfg.name = std::move(name);
  cfg.branches = std::move(branches);
  cfg.downsample_blocks = table1_downsampling();
  cfg.multilevel_aggregation = ml;
  cfg.tfse_enabled = tfse;
  return cfg;
}

inline EncoderConfig single_scale(std::string name, std::size_t kernel) {
  const std::size_t stride = kernel / 2;
  return make(std::move(name), {{96, kernel, stride, 512, 5, 20 / stride}}, true, true);
}

inline EncoderConfig multi_32() {
  return make("multi-32",
              {{32, 10, 5, 160, 5, 4}, {32, 20, 10, 160, 5, 2}, {32, 40, 20, 192, 5, 1}},
              true, true);
}

inline const std::vector<std::string>& names() {
  static const std::vector<std::string> kNames = {
      "yvector-1", "yvector-2",  "yvector-3", "yvector-4", "yvector-5",
      "single-low", "single-mid", "single-high", "multi-32"};
  return kNames;
}

}  // namespace presets

/// Named encoder variants: yvector-1..5, single-low/mid/high, multi-32.
inline EncoderConfig preset(const std::string& name) {
  using namespace presets;
  if (name == "yvector-1") return make(name, decimation24_branches(50), false, false);
  if (name == "yvector-2") return make(name, decimation24_branches(50), true, false);
  if (name == "yvector-3") return make(name, decimation24_branches(90), true, false);
  if (name == "yvector-4") return make(name, decimation18_branches(90), true, false);
  if (name == "yvector-5") return make(name, decimation18_branches(90), true, true);
  if (name == "single-low") return single_scale(name, 40);
  if (name == "single-mid") return single_scale(name, 20);
  if (name == "single-high") return single_scale(name, 10);
  if (name == "multi-32") return multi_32();
  throw ConfigError("unknown encoder preset '" + name + "'");
}

/// Multiplies every channel count by `factor` (rounded, at least 1).
inline EncoderConfig scale_widths(EncoderConfig cfg, double factor) {
  if (!(factor > 0)) throw ConfigError("width scale must be positive");
  auto scale = [factor](std::size_t c) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(c * factor)));
  };
  for (auto& b : cfg.branches) {
    b.filter_channels = scale(b.filter_channels);
    b.dm_channels = scale(b.dm_channels);
  }
  for (auto& d : cfg.downsample_blocks) d.channels = scale(d.channels);
  return cfg;
}

inline void to_json(nlohmann::json& j, const BranchSpec& b) {
  j = {{"filter_channels", b.filter_channels}, {"kernel", b.kernel}, {"stride", b.stride},
       {"dm_channels", b.dm_channels},         {"dm_kernel", b.dm_kernel},
       {"dm_stride", b.dm_stride}};
}
inline void from_json(const nlohmann::json& j, BranchSpec& b) {
  j.at("filter_channels").get_to(b.filter_channels);
  j.at("kernel").get_to(b.kernel);
  j.at("stride").get_to(b.stride);
  j.at("dm_channels").get_to(b.dm_channels);
  j.at("dm_kernel").get_to(b.dm_kernel);
  j.at("dm_stride").get_to(b.dm_stride);
}
inline void to_json(nlohmann::json& j, const DownsampleSpec& d) {
  j = {{"channels", d.channels}, {"kernel", d.kernel}, {"stride", d.stride}};
}
inline void from_json(const nlohmann::json& j, DownsampleSpec& d) {
  j.at("channels").get_to(d.channels);
  j.at("kernel").get_to(d.kernel);
  j.at("stride").get_to(d.stride);
}
inline void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"name", c.name},
       {"branches", c.branches},
       {"downsample_blocks", c.downsample_blocks},
       {"multilevel_aggregation", c.multilevel_aggregation},
       {"tfse_enabled", c.tfse_enabled},
       {"dropout_rate", c.dropout_rate}};
}
inline void from_json(const nlohmann::json& j, EncoderConfig& c) {
  j.at("name").get_to(c.name);
  j.at("branches").get_to(c.branches);
  j.at("downsample_blocks").get_to(c.downsample_blocks);
  j.at("multilevel_aggregation").get_to(c.multilevel_aggregation);
  j.at("tfse_enabled").get_to(c.tfse_enabled);
  j.at("dropout_rate").get_to(c.dropout_rate);
}

}  // namespace yvec::encoder
