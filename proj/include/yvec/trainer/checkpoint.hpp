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

// Checkpoint file:
//   "YVEC" | u32 version | u64 n | n bytes of JSON {model, train, state}
//   | u32 count | count x blob | u32 count | count x blob (optimizer velocity)
// blob: u32 name length | name | u32 rank | rank x u64 extent | f32 values.
// All integers and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/trainer/trainer.hpp"

namespace yvec::trainer {

inline constexpr char kCheckpointMagic[4] = {'Y', 'V', 'E', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedBlob {
  std::string name;
  Tensor<float> value;
};

struct Checkpoint {
  ModelConfig model;
  TrainConfig train;
  TrainerState state;
  std::vector<NamedBlob> params;
  std::vector<NamedBlob> velocity;  // empty when saved without an optimizer
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoints assume little-endian");

template <typename U>
void put(std::ostream& os, U v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(U));
}

class Reader {
 public:
  Reader(std::istream& is, std::string source) : is_(is), source_(std::move(source)) {}

  template <typename U>
  U get(const char* what) {
    U v{};
    bytes(reinterpret_cast<char*>(&v), sizeof(U), what);
    return v;
  }

  void bytes(char* dst, std::size_t n, const char* what) {
    if (!is_.read(dst, static_cast<std::streamsize>(n))) {
      throw FormatError(source_ + ": checkpoint truncated while reading " + what);
    }
  }

 private:
  std::istream& is_;
  std::string source_;
};

inline void put_blob(std::ostream& os, const std::string& name, const Tensor<float>& t) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(t.shape().size()));
  for (auto d : t.shape()) put<std::uint64_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

inline NamedBlob get_blob(Reader& r) {
  NamedBlob b;
  b.name.resize(r.get<std::uint32_t>("blob name length"));
  r.bytes(b.name.data(), b.name.size(), "blob name");
  const auto rank = r.get<std::uint32_t>("blob rank");
  if (rank == 0 || rank > 8) throw FormatError("checkpoint blob " + b.name + " has bad rank");
  Shape shape(rank);
  std::uint64_t numel = 1;
  for (auto& d : shape) {
    d = r.get<std::uint64_t>("blob shape");
    if (d == 0 || d > (std::uint64_t{1} << 32)) {
      throw FormatError("checkpoint blob " + b.name + " has bad extent");
    }
    numel *= d;
  }
  if (numel > (std::uint64_t{1} << 32)) throw FormatError("checkpoint blob " + b.name + " too large");
  b.value = Tensor<float>(shape);
  r.bytes(reinterpret_cast<char*>(b.value.data()), b.value.numel() * sizeof(float),
          b.name.c_str());
  return b;
}

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os.write(kCheckpointMagic, 4);
  detail::put<std::uint32_t>(os, kCheckpointVersion);
  const std::string meta =
      nlohmann::json{{"model", ck.model}, {"train", ck.train}, {"state", ck.state}}.dump();
  detail::put<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  for (const auto* blobs : {&ck.params, &ck.velocity}) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(blobs->size()));
    for (const auto& b : *blobs) detail::put_blob(os, b.name, b.value);
  }
}

inline Checkpoint read_checkpoint(std::istream& is, const std::string& source = "checkpoint") {
  detail::Reader r(is, source);
  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
    throw FormatError(source + ": not a yvec checkpoint (bad magic)");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  const auto meta_len = r.get<std::uint64_t>("header length");
  if (meta_len > (std::uint64_t{1} << 26)) throw FormatError(source + ": header too large");
  std::string meta(meta_len, '\0');
  r.bytes(meta.data(), meta.size(), "header");
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(meta);
    j.at("model").get_to(ck.model);
    j.at("train").get_to(ck.train);
    j.at("state").get_to(ck.state);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(source + ": bad checkpoint header: " + e.what());
  }
  for (auto* blobs : {&ck.params, &ck.velocity}) {
    const auto n = r.get<std::uint32_t>("blob count");
    for (std::uint32_t i = 0; i < n; ++i) blobs->push_back(detail::get_blob(r));
  }
  return ck;
}

/// Snapshot of a model (and optionally its trainer) as a Checkpoint.
inline Checkpoint make_checkpoint(const Model<float>& model, const TrainConfig& train,
                                  const TrainerState& state,
                                  const SgdMomentum<float>* opt = nullptr) {
  Checkpoint ck{model.config(), train, state, {}, {}};
  const auto& params = model.params();
  for (const auto& p : params) ck.params.push_back({p.name, p.value});
  if (opt) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      ck.velocity.push_back({params[i].name, opt->velocity()[i]});
    }
  }
  return ck;
}

inline Checkpoint make_checkpoint(const Model<float>& model, const Trainer& trainer) {
  return make_checkpoint(model, trainer.config(), trainer.state(), &trainer.optimizer());
}

/// Writes through a temporary file and renames it into place.
inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw FormatError("cannot write " + tmp.string());
    write_checkpoint(os, ck);
    if (!os) throw FormatError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint " + path.string());
  return read_checkpoint(is, path.string());
}

/// Copies blob values into the model, matching names and shapes.
inline void load_parameters(Model<float>& model, const std::vector<NamedBlob>& blobs) {
  auto& params = model.params();
  if (blobs.size() != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(blobs.size()) +
                      " parameters, model has " + std::to_string(params.size()));
  }
  for (const auto& b : blobs) {
    if (!params.contains(b.name)) throw FormatError("checkpoint parameter " + b.name + " unknown");
    auto& p = params.at(b.name);
    if (p.value.shape() != b.value.shape()) {
      throw FormatError("checkpoint parameter " + b.name + " has shape " +
                        shape_str(b.value.shape()) + ", model expects " +
                        shape_str(p.value.shape()));
    }
    p.value = b.value;
  }
}

/// Rebuilds the model stored in a checkpoint.
inline std::unique_ptr<Model<float>> model_from_checkpoint(const Checkpoint& ck) {
  auto model = std::make_unique<Model<float>>(ck.model, ck.train.seed);
  load_parameters(*model, ck.params);
  return model;
}

/// Restores optimizer velocity and position into a trainer built on the
/// checkpoint's model.
inline void resume(Trainer& trainer, const Model<float>& model, const Checkpoint& ck) {
  if (ck.velocity.empty()) throw FormatError("checkpoint holds no optimizer state");
  std::vector<Tensor<float>> velocity(model.params().size());
  for (const auto& b : ck.velocity) {
    velocity.at(model.params().at(b.name).index) = b.value;
  }
  trainer.restore(ck.state, velocity);
}

}  // namespace yvec::trainer
