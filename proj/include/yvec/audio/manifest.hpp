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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/audio/wav.hpp"
#include "yvec/error.hpp"

namespace yvec::audio {

struct ManifestRecord {
  std::string utterance_id;
  std::string speaker_id;
  std::string path;  // relative to the manifest's directory unless absolute
  std::size_t num_samples = 0;
};

/// Utterance records plus a dense speaker -> class index mapping (sorted ids).
class CorpusManifest {
 public:
  CorpusManifest() = default;
  explicit CorpusManifest(std::vector<ManifestRecord> records,
                          std::filesystem::path root = {})
      : records_(std::move(records)), root_(std::move(root)) {
    for (const auto& r : records_) classes_.emplace(r.speaker_id, 0);
    std::size_t next = 0;
    for (auto& [spk, idx] : classes_) idx = next++;
    for (std::size_t i = 0; i < records_.size(); ++i) {
      if (!by_id_.emplace(records_[i].utterance_id, i).second) {
        throw ConfigError("duplicate utterance id " + records_[i].utterance_id);
      }
    }
  }

  const std::vector<ManifestRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  std::size_t num_speakers() const noexcept { return classes_.size(); }
  const std::filesystem::path& root() const noexcept { return root_; }

  std::size_t class_of(const std::string& speaker_id) const {
    auto it = classes_.find(speaker_id);
    if (it == classes_.end()) throw ConfigError("unknown speaker " + speaker_id);
    return it->second;
  }
  const std::map<std::string, std::size_t>& classes() const noexcept { return classes_; }

  bool contains(const std::string& utterance_id) const {
    return by_id_.count(utterance_id) != 0;
  }
  const ManifestRecord& at(const std::string& utterance_id) const {
    auto it = by_id_.find(utterance_id);
    if (it == by_id_.end()) throw ConfigError("unknown utterance " + utterance_id);
    return records_[it->second];
  }

  std::filesystem::path resolve(const ManifestRecord& r) const {
    std::filesystem::path p(r.path);
    return p.is_absolute() ? p : root_ / p;
  }

  /// Loads one record's audio with ids filled in.
  WaveformUtterance load(const ManifestRecord& r) const {
    WaveformUtterance u = read_wav_pcm16(resolve(r));
    u.utterance_id = r.utterance_id;
    u.speaker_id = r.speaker_id;
    return u;
  }

 private:
  std::vector<ManifestRecord> records_;
  std::filesystem::path root_;
  std::map<std::string, std::size_t> classes_;
  std::map<std::string, std::size_t> by_id_;
};

inline nlohmann::json manifest_to_json(const CorpusManifest& m) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : m.records()) {
    arr.push_back({{"utterance_id", r.utterance_id},
                   {"speaker_id", r.speaker_id},
                   {"path", r.path},
                   {"num_samples", r.num_samples}});
  }
  return arr;
}

inline void write_manifest(const std::filesystem::path& path, const CorpusManifest& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write manifest " + path.string());
  out << manifest_to_json(m).dump(2) << '\n';
}

/// Parses a manifest and checks that every referenced file exists.
inline CorpusManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  nlohmann::json arr;
  try {
    in >> arr;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
  if (!arr.is_array()) throw FormatError("manifest " + path.string() + " is not a JSON array");
  std::vector<ManifestRecord> records;
  for (const auto& j : arr) {
    try {
      records.push_back({j.at("utterance_id").get<std::string>(),
                         j.at("speaker_id").get<std::string>(),
                         j.at("path").get<std::string>(),
                         j.at("num_samples").get<std::size_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("manifest " + path.string() + ": " + e.what());
    }
  }
  CorpusManifest m(std::move(records), path.parent_path());
  for (const auto& r : m.records()) {
    if (!std::filesystem::exists(m.resolve(r))) {
      throw FormatError("manifest " + path.string() + ": missing file " +
                        m.resolve(r).string());
    }
  }
  return m;
}

}  // namespace yvec::audio
