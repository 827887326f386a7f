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

// Desk-scale synthetic speakers: a band-limited glottal pulse train at a
// speaker-specific F0, a spectral-tilt low-pass, and three cascaded formant
// resonators, with syllable-like amplitude envelopes and additive noise.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "yvec/audio/manifest.hpp"
#include "yvec/audio/wav.hpp"
#include "yvec/error.hpp"
#include "yvec/numerics/rng.hpp"

namespace yvec::audio {

struct Formant {
  double center_hz = 0;
  double bandwidth_hz = 0;
};

struct SynthSpeaker {
  std::string id;
  double f0_hz = 0;
  std::array<Formant, 3> formants{};
  double tilt = 0;  // one-pole low-pass coefficient
};

struct SynthUtterance {
  std::string speaker_id;
  std::string utterance_id;
  double f0_hz = 0;  // F0 after the per-utterance jitter
  std::vector<std::int16_t> pcm;
};

inline std::string synth_speaker_id(std::size_t s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03zu", s);
  return buf;
}

inline std::string synth_utterance_id(std::size_t s, std::size_t u) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "spk%03zu/utt%03zu.wav", s, u);
  return buf;
}

inline SynthSpeaker synth_speaker(std::size_t index, std::uint64_t seed) {
  Rng rng(derive_seed({seed, 0x73706bULL, index}));
  SynthSpeaker s;
  s.id = synth_speaker_id(index);
  s.f0_hz = uniform(rng, 80.0, 300.0);
  s.formants[0] = {uniform(rng, 300.0, 900.0), uniform(rng, 60.0, 160.0)};
  s.formants[1] = {uniform(rng, 900.0, 2400.0), uniform(rng, 80.0, 200.0)};
  s.formants[2] = {uniform(rng, 2400.0, 3800.0), uniform(rng, 100.0, 250.0)};
  s.tilt = uniform(rng, 0.55, 0.9);
  return s;
}

namespace detail {

/// Unit-DC-gain two-pole resonator (Klatt form), applied in place.
inline void resonate(std::vector<double>& x, const Formant& f, double fs) {
  const double c = -std::exp(-2.0 * M_PI * f.bandwidth_hz / fs);
  const double b = 2.0 * std::exp(-M_PI * f.bandwidth_hz / fs) *
                   std::cos(2.0 * M_PI * f.center_hz / fs);
  const double a = 1.0 - b - c;
  double y1 = 0, y2 = 0;
  for (double& v : x) {
    const double y = a * v + b * y1 + c * y2;
    y2 = y1;
    y1 = y;
    v = y;
  }
}

}  // namespace detail

/// One utterance of `speaker`, deterministic in (seed, speaker, index).
inline SynthUtterance synth_utterance(const SynthSpeaker& speaker, std::size_t speaker_index,
                                      std::size_t utt_index, double duration_s,
                                      std::uint64_t seed) {
  const double fs = kSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  if (n == 0) throw ConfigError("synthetic utterance duration must be positive");
  Rng rng(derive_seed({seed, 0x757474ULL, speaker_index, utt_index}));

  SynthUtterance out;
  out.speaker_id = speaker.id;
  out.utterance_id = synth_utterance_id(speaker_index, utt_index);
  out.f0_hz = speaker.f0_hz * (1.0 + uniform(rng, -0.02, 0.02));

  // Band-limited pulse train: closed-form sum of equal-amplitude harmonics.
  const double harmonics = std::floor((fs / 2.0 - 100.0) / out.f0_hz);
  const double dphi = 2.0 * M_PI * out.f0_hz / fs;
  double phi = uniform(rng, 0.0, 2.0 * M_PI);
  std::vector<double> x(n);
  for (double& v : x) {
    const double half = std::sin(0.5 * phi);
    const double dirichlet = std::abs(half) < 1e-9
                                 ? harmonics + 0.5
                                 : std::sin((harmonics + 0.5) * phi) / (2.0 * half);
    v = (dirichlet - 0.5) / harmonics;
    phi = std::fmod(phi + dphi, 2.0 * M_PI);
  }
  double prev = 0;
  for (double& v : x) {
    prev = v + speaker.tilt * prev;
    v = prev;
  }
  for (const auto& f : speaker.formants) {
    detail::resonate(x, {f.center_hz * (1.0 + uniform(rng, -0.02, 0.02)), f.bandwidth_hz}, fs);
  }

  // Syllable envelope: voiced stretches of 150-400 ms between short dips.
  std::vector<double> env(n, 0.05);
  const auto ramp = static_cast<std::size_t>(0.02 * fs);
  std::size_t pos = static_cast<std::size_t>(uniform(rng, 0.0, 0.1) * fs);
  while (pos < n) {
    const auto len = static_cast<std::size_t>(uniform(rng, 0.15, 0.4) * fs);
    const double level = uniform(rng, 0.6, 1.0);
    for (std::size_t i = 0; i < len && pos + i < n; ++i) {
      double w = 1.0;
      if (i < ramp) w = 0.5 - 0.5 * std::cos(M_PI * i / ramp);
      if (len - i < ramp) w = 0.5 - 0.5 * std::cos(M_PI * (len - i) / ramp);
      env[pos + i] = std::max(env[pos + i], level * w);
    }
    pos += len + static_cast<std::size_t>(uniform(rng, 0.05, 0.15) * fs);
  }
  double energy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] *= env[i];
    energy += x[i] * x[i];
  }
  const double rms = std::sqrt(energy / static_cast<double>(n));
  const double noise = uniform(rng, 0.005, 0.02) * rms;
  double peak = 0;
  for (double& v : x) {
    v += noise * normal01(rng);
    peak = std::max(peak, std::abs(v));
  }
  const double gain = peak > 0 ? uniform(rng, 0.3, 0.9) / peak : 0.0;
  out.pcm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.pcm[i] = quantize_pcm16(static_cast<float>(x[i] * gain));
  }
  return out;
}

/// Writes `n_speakers x utts_per_speaker` WAVs under `out_dir` plus
/// `manifest.json`, and returns the manifest.
inline CorpusManifest synth_corpus_generate(std::size_t n_speakers,
                                            std::size_t utts_per_speaker,
                                            double duration_s, std::uint64_t seed,
                                            const std::filesystem::path& out_dir) {
  if (n_speakers < 2) throw ConfigError("synthetic corpus needs at least 2 speakers");
  if (utts_per_speaker < 1) throw ConfigError("need at least one utterance per speaker");
  std::vector<ManifestRecord> records;
  for (std::size_t s = 0; s < n_speakers; ++s) {
    const SynthSpeaker spk = synth_speaker(s, seed);
    std::filesystem::create_directories(out_dir / spk.id);
    for (std::size_t u = 0; u < utts_per_speaker; ++u) {
      SynthUtterance utt = synth_utterance(spk, s, u, duration_s, seed);
      write_wav_pcm16(out_dir / utt.utterance_id, utt.pcm);
      records.push_back({utt.utterance_id, spk.id, utt.utterance_id, utt.pcm.size()});
    }
  }
  CorpusManifest manifest(std::move(records), out_dir);
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

}  // namespace yvec::audio
