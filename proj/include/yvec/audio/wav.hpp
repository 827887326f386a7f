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

// RIFF/WAVE PCM s16le mono 16 kHz reader and writer.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "yvec/audio/waveform.hpp"
#include "yvec/error.hpp"

namespace yvec::audio {

namespace detail {

inline std::uint32_t read_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
         (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}
inline std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

}  // namespace detail

/// Decodes an in-memory WAV image. Samples are int16 / 32768.
inline std::vector<float> decode_wav_pcm16(std::span<const std::uint8_t> bytes,
                                           const std::string& name = "<memory>") {
  auto fail = [&](const std::string& why) {
    throw FormatError(name + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) fail("truncated fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      const auto format = detail::read_u16(f);
      const auto channels = detail::read_u16(f + 2);
      const auto rate = detail::read_u32(f + 4);
      const auto bits = detail::read_u16(f + 14);
      if (format != 1) fail("audio format " + std::to_string(format) + " is not PCM (1)");
      if (channels != 1) fail("channel count " + std::to_string(channels) + ", expected mono (1)");
      if (rate != kSampleRate) {
        fail("sample rate " + std::to_string(rate) + " Hz, expected " +
             std::to_string(kSampleRate));
      }
      if (bits != 16) fail("bits per sample " + std::to_string(bits) + ", expected 16");
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) fail("data chunk before fmt chunk");
      if (body + size > bytes.size()) fail("truncated data chunk");
      if (size % 2 != 0) fail("odd data chunk size for 16-bit samples");
      std::vector<float> samples(size / 2);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto raw = static_cast<std::int16_t>(detail::read_u16(bytes.data() + body + 2 * i));
        samples[i] = static_cast<float>(raw) / 32768.0f;
      }
      return samples;
    }
    pos = body + size + (size & 1);
  }
  fail(have_fmt ? "missing data chunk" : "missing fmt chunk");
  return {};
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

/// Reads a mono 16 kHz PCM16 WAV. Ids are left for the caller to fill.
inline WaveformUtterance read_wav_pcm16(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  WaveformUtterance u;
  u.samples = decode_wav_pcm16(bytes, path.string());
  u.utterance_id = path.filename().string();
  return u;
}

/// Rounds to int16 with saturation.
inline std::int16_t quantize_pcm16(float v) {
  const float scaled = std::round(v * 32768.0f);
  if (scaled > 32767.0f) return 32767;
  if (scaled < -32768.0f) return -32768;
  return static_cast<std::int16_t>(scaled);
}

inline std::vector<std::uint8_t> encode_wav_pcm16(std::span<const std::int16_t> pcm) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(pcm.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  detail::put_u32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, kSampleRate);
  detail::put_u32(out, kSampleRate * 2);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  detail::put_u32(out, data_bytes);
  for (std::int16_t s : pcm) detail::put_u16(out, static_cast<std::uint16_t>(s));
  return out;
}

inline void write_wav_pcm16(const std::filesystem::path& path,
                            std::span<const std::int16_t> pcm) {
  const auto bytes = encode_wav_pcm16(pcm);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

}  // namespace yvec::audio
