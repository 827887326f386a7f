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
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/error.hpp"

namespace yvec::aggregator {

struct SpeakerEmbedding {
  std::string utterance_id;
  std::vector<float> vector;
};

inline double norm(const std::vector<float>& v) {
  double s = 0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

/// dot(a, b) / (|a| |b|), accumulated in double.
inline double cosine_score(const SpeakerEmbedding& a, const SpeakerEmbedding& b) {
  if (a.vector.size() != b.vector.size()) {
    throw ScoringError("embedding dimensions differ: " + a.utterance_id + " has " +
                       std::to_string(a.vector.size()) + ", " + b.utterance_id + " has " +
                       std::to_string(b.vector.size()));
  }
  const double na = norm(a.vector), nb = norm(b.vector);
  if (!(na > 0)) throw ScoringError("zero-norm embedding for utterance " + a.utterance_id);
  if (!(nb > 0)) throw ScoringError("zero-norm embedding for utterance " + b.utterance_id);
  double dot = 0;
  for (std::size_t i = 0; i < a.vector.size(); ++i) {
    dot += static_cast<double>(a.vector[i]) * b.vector[i];
  }
  return std::clamp(dot / (na * nb), -1.0, 1.0);
}

// ---- serialisation --------------------------------------------------------

inline void write_embeddings_csv(std::ostream& os, const std::vector<SpeakerEmbedding>& embs) {
  const std::size_t dim = embs.empty() ? 0 : embs.front().vector.size();
  os << "utterance_id";
  for (std::size_t k = 0; k < dim; ++k) os << ",e" << k;
  os << '\n';
  os << std::setprecision(std::numeric_limits<float>::max_digits10);
  for (const auto& e : embs) {
    if (e.utterance_id.find_first_of(",\n") != std::string::npos) {
      throw FormatError("utterance id not representable in CSV: " + e.utterance_id);
    }
    os << e.utterance_id;
    for (float v : e.vector) os << ',' << v;
    os << '\n';
  }
}

inline std::vector<SpeakerEmbedding> read_embeddings_csv(std::istream& is) {
  std::vector<SpeakerEmbedding> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    std::stringstream ss(line);
    SpeakerEmbedding e;
    std::getline(ss, e.utterance_id, ',');
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        e.vector.push_back(std::stof(cell));
      } catch (const std::exception&) {
        throw ParseError("bad embedding value '" + cell + "'", lineno);
      }
    }
    if (!out.empty() && e.vector.size() != out.front().vector.size()) {
      throw ParseError("embedding dimension changes", lineno);
    }
    out.push_back(std::move(e));
  }
  return out;
}

inline nlohmann::json embeddings_to_json(const std::vector<SpeakerEmbedding>& embs) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : embs) rows.push_back({{"utterance_id", e.utterance_id}, {"vector", e.vector}});
  return rows;
}

inline std::vector<SpeakerEmbedding> embeddings_from_json(const nlohmann::json& rows) {
  std::vector<SpeakerEmbedding> out;
  for (const auto& r : rows) {
    out.push_back({r.at("utterance_id").get<std::string>(), r.at("vector").get<std::vector<float>>()});
  }
  return out;
}

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary tables assume little-endian");

inline void put_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}

inline std::uint32_t get_u32(std::istream& is, const char* what) {
  std::uint32_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 4)) {
    throw FormatError(std::string("embedding table truncated reading ") + what);
  }
  return v;
}

}  // namespace detail

inline constexpr char kEmbeddingMagic[4] = {'Y', 'E', 'M', 'B'};

/// "YEMB", count, dim, then per row: id length, id bytes, dim float32 values.
inline void write_embeddings_binary(std::ostream& os, const std::vector<SpeakerEmbedding>& embs) {
  const std::size_t dim = embs.empty() ? 0 : embs.front().vector.size();
  os.write(kEmbeddingMagic, 4);
  detail::put_u32(os, static_cast<std::uint32_t>(embs.size()));
  detail::put_u32(os, static_cast<std::uint32_t>(dim));
  for (const auto& e : embs) {
    if (e.vector.size() != dim) throw ShapeError("embedding dimensions differ in table");
    detail::put_u32(os, static_cast<std::uint32_t>(e.utterance_id.size()));
    os.write(e.utterance_id.data(), static_cast<std::streamsize>(e.utterance_id.size()));
    os.write(reinterpret_cast<const char*>(e.vector.data()),
             static_cast<std::streamsize>(dim * sizeof(float)));
  }
}

inline std::vector<SpeakerEmbedding> read_embeddings_binary(std::istream& is) {
  char magic[4] = {};
  if (!is.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw FormatError("not an embedding table (bad magic)");
  }
  const std::uint32_t count = detail::get_u32(is, "count");
  const std::uint32_t dim = detail::get_u32(is, "dimension");
  std::vector<SpeakerEmbedding> out;
  out.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    SpeakerEmbedding e;
    e.utterance_id.resize(detail::get_u32(is, "id length"));
    e.vector.resize(dim);
    if (!is.read(e.utterance_id.data(), static_cast<std::streamsize>(e.utterance_id.size())) ||
        !is.read(reinterpret_cast<char*>(e.vector.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw FormatError("embedding table truncated in row " + std::to_string(r));
    }
    out.push_back(std::move(e));
  }
  return out;
}

/// Picks the format from the extension: .csv, .json, anything else binary.
inline void save_embeddings(const std::filesystem::path& path,
                            const std::vector<SpeakerEmbedding>& embs) {
  const auto ext = path.extension().string();
  std::ofstream os(path, ext == ".csv" || ext == ".json" ? std::ios::out
                                                         : std::ios::out | std::ios::binary);
  if (!os) throw FormatError("cannot write " + path.string());
  if (ext == ".csv") {
    write_embeddings_csv(os, embs);
  } else if (ext == ".json") {
    os << embeddings_to_json(embs).dump() << '\n';
  } else {
    write_embeddings_binary(os, embs);
  }
  if (!os) throw FormatError("write failed for " + path.string());
}

inline std::vector<SpeakerEmbedding> load_embeddings(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  if (ext == ".csv") return read_embeddings_csv(is);
  if (ext == ".json") {
    try {
      return embeddings_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path.string() + ": " + e.what());
    }
  }
  return read_embeddings_binary(is);
}

}  // namespace yvec::aggregator
