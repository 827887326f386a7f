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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "yvec/error.hpp"
#include "yvec/trainer/config.hpp"
#include "yvec/trainer/model.hpp"

namespace yvec::cli {

/// Bad arguments or configuration; maps to exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct RunPaths {
  std::string manifest;
  std::string trials;
  std::string checkpoint;
  std::string out_dir = "run";

  friend bool operator==(const RunPaths&, const RunPaths&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RunPaths, manifest, trials, checkpoint, out_dir)

/// One training run. `model` is a merge patch over the preset's model
/// config (keys "encoder", "tdnn", "am_softmax"); `seed` is the single
/// source of the training seed.
struct RunConfig {
  std::string preset = "yvector-5";
  double width = 1.0;
  nlohmann::json model = nlohmann::json::object();
  trainer::TrainConfig train;
  RunPaths paths;
  std::uint64_t seed = 1;
  std::size_t save_every_epochs = 1;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& given, const nlohmann::json& known,
                           const std::string& where) {
  if (!given.is_object()) {
    throw UsageError("config: '" + where + "' must be a JSON object");
  }
  for (const auto& [key, value] : given.items()) {
    const std::string path = where.empty() ? key : where + "." + key;
    if (!known.contains(key)) throw UsageError("config: unknown key '" + path + "'");
    // an empty object in `known` is free-form here and checked elsewhere
    const auto& k = known.at(key);
    if (value.is_object() && k.is_object() && !k.empty()) reject_unknown(value, k, path);
  }
}

inline nlohmann::json train_keys() {
  nlohmann::json j = trainer::TrainConfig{};
  j.erase("seed");
  return j;
}

}  // namespace detail

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json train = c.train;
  train.erase("seed");
  return {{"preset", c.preset}, {"width", c.width},     {"model", c.model},
          {"train", train},     {"paths", c.paths},     {"seed", c.seed},
          {"save_every_epochs", c.save_every_epochs}};
}

/// Parses a run config, rejecting keys it does not know.
inline RunConfig parse_run_config(const nlohmann::json& j) {
  const nlohmann::json known = to_json(RunConfig{});
  detail::reject_unknown(j, known, "");
  RunConfig c;
  try {
    if (j.contains("preset")) j.at("preset").get_to(c.preset);
    if (j.contains("width")) j.at("width").get_to(c.width);
    if (j.contains("model")) c.model = j.at("model");
    if (j.contains("train")) {
      detail::reject_unknown(j.at("train"), detail::train_keys(), "train");
      nlohmann::json t = c.train;
      t.merge_patch(j.at("train"));
      t.get_to(c.train);
    }
    if (j.contains("paths")) {
      nlohmann::json p = c.paths;
      p.merge_patch(j.at("paths"));
      p.get_to(c.paths);
    }
    if (j.contains("seed")) j.at("seed").get_to(c.seed);
    if (j.contains("save_every_epochs")) j.at("save_every_epochs").get_to(c.save_every_epochs);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (!c.model.is_object()) throw UsageError("config: 'model' must be a JSON object");
  if (!(c.width > 0)) throw UsageError("config: width must be positive");
  if (c.save_every_epochs == 0) throw UsageError("config: save_every_epochs must be positive");
  c.train.seed = c.seed;
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("config " + path.string() + ": " + e.what());
  }
  return parse_run_config(j);
}

/// Preset geometry with the config's width scale and model patch applied.
inline trainer::ModelConfig resolve_model(const RunConfig& c, std::size_t n_classes) {
  trainer::ModelConfig base;
  try {
    base = trainer::make_model_config(c.preset, n_classes, c.width);
  } catch (const ConfigError& e) {
    throw UsageError(e.what());
  }
  nlohmann::json j = base;
  nlohmann::json known = j;
  known.erase("n_classes");
  detail::reject_unknown(c.model, known, "model");
  j.merge_patch(c.model);
  trainer::ModelConfig out;
  try {
    j.get_to(out);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("config: model: ") + e.what());
  }
  out.n_classes = n_classes;
  return out;
}

}  // namespace yvec::cli
