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

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <filesystem>
#include <set>
#include <sstream>

#include "yvec/audio/manifest.hpp"
#include "yvec/audio/synth.hpp"
#include "yvec/audio/trials.hpp"
#include "yvec/audio/wav.hpp"
#include "yvec/audio/waveform.hpp"

namespace yvec::audio {
namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("yvec_audio_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> wav_with_header(std::uint16_t format, std::uint16_t channels,
                                          std::uint32_t rate, std::uint16_t bits) {
  auto bytes = encode_wav_pcm16(std::vector<std::int16_t>{1, 2, 3, 4});
  auto put16 = [&](std::size_t at, std::uint16_t v) {
    bytes[at] = v & 0xff;
    bytes[at + 1] = v >> 8;
  };
  put16(20, format);
  put16(22, channels);
  bytes[24] = rate & 0xff;
  bytes[25] = (rate >> 8) & 0xff;
  bytes[26] = (rate >> 16) & 0xff;
  bytes[27] = (rate >> 24) & 0xff;
  put16(34, bits);
  return bytes;
}

TEST(Wav, ZerosAndFullScale) {
  auto dir = temp_dir("wav");
  write_wav_pcm16(dir / "z.wav", std::vector<std::int16_t>(62400, 0));
  auto z = read_wav_pcm16(dir / "z.wav");
  ASSERT_EQ(z.samples.size(), 62400u);
  for (float s : z.samples) ASSERT_EQ(s, 0.0f);

  write_wav_pcm16(dir / "m.wav", std::vector<std::int16_t>{32767, -32768});
  auto m = read_wav_pcm16(dir / "m.wav");
  EXPECT_EQ(m.samples[0], 32767.0f / 32768.0f);
  EXPECT_NEAR(m.samples[0], 0.99997f, 1e-5f);
  EXPECT_EQ(m.samples[1], -1.0f);
  EXPECT_EQ(m.sample_rate, kSampleRate);
}

TEST(Wav, RejectsWrongLayoutNamingTheField) {
  auto expect_reject = [](const std::vector<std::uint8_t>& bytes, const std::string& field) {
    try {
      decode_wav_pcm16(bytes);
      FAIL() << "expected rejection mentioning " << field;
    } catch (const FormatError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_reject(wav_with_header(1, 2, 16000, 16), "channel count");
  expect_reject(wav_with_header(1, 1, 8000, 16), "sample rate");
  expect_reject(wav_with_header(3, 1, 16000, 16), "audio format");
  expect_reject(wav_with_header(1, 1, 16000, 24), "bits per sample");
  auto truncated = encode_wav_pcm16(std::vector<std::int16_t>(10, 7));
  truncated.resize(truncated.size() - 4);
  expect_reject(truncated, "truncated");
  expect_reject(std::vector<std::uint8_t>{'R', 'I', 'F', 'X'}, "RIFF");
}

TEST(Wav, QuantizationRoundTrip) {
  Rng rng(9);
  std::vector<std::int16_t> pcm(1000);
  for (auto& s : pcm) s = static_cast<std::int16_t>(uniform_index(rng, 65536) - 32768);
  auto back = decode_wav_pcm16(encode_wav_pcm16(pcm));
  for (std::size_t i = 0; i < pcm.size(); ++i) ASSERT_EQ(quantize_pcm16(back[i]), pcm[i]);
}

WaveformUtterance utt(std::vector<float> s) {
  WaveformUtterance u;
  u.samples = std::move(s);
  u.utterance_id = "u";
  return u;
}

TEST(Normalize, Examples) {
  EXPECT_EQ(normalize_by_max(utt({0.5f, -1.0f})).samples, (std::vector<float>{0.5f, -1.0f}));
  EXPECT_EQ(normalize_by_max(utt({0.25f, -0.5f})).samples, (std::vector<float>{0.5f, -1.0f}));
  auto z = normalize_by_max(utt({0.f, 0.f, 0.f}));
  EXPECT_TRUE(z.silent);
  EXPECT_EQ(z.samples, (std::vector<float>{0.f, 0.f, 0.f}));
  WaveformUtterance bad = utt({1.f});
  bad.sample_rate = 44100;
  EXPECT_THROW(normalize_by_max(bad), FormatError);
}

TEST(Normalize, IdempotentAndUnitPeak) {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    std::vector<float> s(1 + uniform_index(rng, 300));
    const double amp = uniform(rng, 1e-3, 3.0);
    for (auto& v : s) v = static_cast<float>(uniform(rng, -amp, amp));
    auto once = normalize_by_max(utt(s));
    auto twice = normalize_by_max(once);
    ASSERT_EQ(once.samples, twice.samples);
    float peak = 0;
    for (float v : once.samples) peak = std::max(peak, std::abs(v));
    ASSERT_EQ(peak, 1.0f);
  }
}

TEST(Crop, ExactLengthIsIdentity) {
  Rng rng(1);
  std::vector<float> s(62400);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i);
  EXPECT_EQ(random_crop(s, 62400, rng), s);
}

TEST(Crop, OneExtraSampleGivesTwoUniformOffsets) {
  std::vector<float> s(62401);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i);
  Rng rng(77);
  std::map<float, int> starts;
  for (int i = 0; i < 2000; ++i) starts[random_crop(s, 62400, rng)[0]]++;
  ASSERT_EQ(starts.size(), 2u);
  EXPECT_TRUE(starts.count(0.f) && starts.count(1.f));
  EXPECT_NEAR(starts[0.f] / 2000.0, 0.5, 0.05);
}

TEST(Crop, ShortUtteranceIsTiled) {
  std::vector<float> s(1000);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i);
  Rng rng(1);
  auto c = random_crop(s, 62400, rng);
  ASSERT_EQ(c.size(), 62400u);
  // 62 full copies and a 400-sample partial: 63 repetitions truncated.
  EXPECT_EQ(62400 / 1000 + 1, 63);
  for (std::size_t i = 0; i < c.size(); ++i) ASSERT_EQ(c[i], static_cast<float>(i % 1000));
  EXPECT_THROW(random_crop(std::vector<float>{}, 10, rng), EmptySequenceError);
}

TEST(Crop, LengthAlwaysExact) {
  Rng rng(4);
  for (int i = 0; i < 300; ++i) {
    std::vector<float> s(1 + uniform_index(rng, 5000), 0.5f);
    const std::size_t len = 1 + uniform_index(rng, 4000);
    ASSERT_EQ(random_crop(s, len, rng).size(), len);
    ASSERT_EQ(center_crop(s, len).size(), len);
  }
}

TEST(Crop, CenterCropIsCentered) {
  std::vector<float> s(10);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i);
  EXPECT_EQ(center_crop(s, 4), (std::vector<float>{3, 4, 5, 6}));
}

TEST(Synth, SameSeedGivesByteIdenticalCorpus) {
  auto a = temp_dir("synth_a"), b = temp_dir("synth_b");
  auto ma = synth_corpus_generate(3, 2, 0.5, 99, a);
  auto mb = synth_corpus_generate(3, 2, 0.5, 99, b);
  ASSERT_EQ(ma.size(), mb.size());
  EXPECT_EQ(read_file_bytes(a / "manifest.json"), read_file_bytes(b / "manifest.json"));
  for (const auto& r : ma.records()) {
    EXPECT_EQ(read_file_bytes(a / r.path), read_file_bytes(b / r.path)) << r.path;
  }
  auto c = temp_dir("synth_c");
  synth_corpus_generate(3, 2, 0.5, 100, c);
  EXPECT_NE(read_file_bytes(a / ma.records()[0].path), read_file_bytes(c / ma.records()[0].path));
}

TEST(Synth, CountsAndClasses) {
  auto dir = temp_dir("synth_count");
  auto m = synth_corpus_generate(2, 2, 0.25, 5, dir);
  EXPECT_EQ(m.size(), 4u);
  EXPECT_EQ(m.num_speakers(), 2u);
  std::set<std::size_t> classes;
  for (const auto& r : m.records()) classes.insert(m.class_of(r.speaker_id));
  EXPECT_EQ(classes, (std::set<std::size_t>{0, 1}));
  auto loaded = load_manifest(dir / "manifest.json");
  EXPECT_EQ(loaded.size(), 4u);
  EXPECT_EQ(loaded.load(loaded.records()[0]).samples.size(), 4000u);
  EXPECT_THROW(synth_corpus_generate(1, 2, 0.25, 5, dir), ConfigError);
}

TEST(Synth, ManifestRejectsMissingFile) {
  auto dir = temp_dir("synth_missing");
  auto m = synth_corpus_generate(2, 1, 0.1, 5, dir);
  fs::remove(dir / m.records()[0].path);
  EXPECT_THROW(load_manifest(dir / "manifest.json"), FormatError);
}

// Oracle: the strongest bin of a 4096-point DFT lies on a harmonic of F0.
TEST(Synth, DominantPeakSitsOnAHarmonicOfF0) {
  constexpr std::size_t kN = 4096;
  const double bin_hz = 16000.0 / kN;
  for (std::size_t s = 0; s < 8; ++s) {
    const auto spk = synth_speaker(s, 123);
    const auto u = synth_utterance(spk, s, 0, 1.0, 123);
    const std::size_t start = (u.pcm.size() - kN) / 2;
    std::vector<double> frame(kN);
    for (std::size_t n = 0; n < kN; ++n) {
      const double hann = 0.5 - 0.5 * std::cos(2 * M_PI * n / (kN - 1));
      frame[n] = hann * u.pcm[start + n];
    }
    std::size_t best = 1;
    double best_mag = -1;
    for (std::size_t k = 1; k <= kN / 2; ++k) {
      std::complex<double> acc = 0;
      for (std::size_t n = 0; n < kN; ++n) {
        acc += frame[n] * std::polar(1.0, -2 * M_PI * double(k * n % kN) / kN);
      }
      if (std::abs(acc) > best_mag) best_mag = std::abs(acc), best = k;
    }
    const double peak_hz = best * bin_hz;
    const double harmonic = std::max(1.0, std::round(peak_hz / u.f0_hz)) * u.f0_hz;
    EXPECT_LE(std::abs(peak_hz - harmonic) / bin_hz, 2.0)
        << "speaker " << s << " f0 " << u.f0_hz << " peak " << peak_hz;
    EXPECT_GE(spk.f0_hz, 80.0);
    EXPECT_LE(spk.f0_hz, 300.0);
  }
}

TEST(Trials, ParseExamples) {
  std::istringstream in("1 a/u1.wav a/u2.wav\n0 a/u1.wav b/u1.wav\n\n");
  auto trials = parse_trial_list(in);
  ASSERT_EQ(trials.size(), 2u);
  EXPECT_TRUE(trials[0].is_target());
  EXPECT_EQ(trials[0].enroll, "a/u1.wav");
  EXPECT_EQ(trials[0].test, "a/u2.wav");
  EXPECT_FALSE(trials[1].is_target());
  EXPECT_EQ(trials[1].line, 2u);
}

TEST(Trials, ParseErrorsReportLine) {
  std::istringstream bad_label("1 a b\n2 x y\n");
  try {
    parse_trial_list(bad_label);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream short_line("1 a\n");
  EXPECT_THROW(parse_trial_list(short_line), ParseError);
}

TEST(Trials, GeneratedListsHaveBothKinds) {
  Rng rng(8);
  for (int i = 0; i < 50; ++i) {
    const std::size_t spk = 2 + uniform_index(rng, 6), utts = 2 + uniform_index(rng, 4);
    std::vector<ManifestRecord> recs;
    for (std::size_t s = 0; s < spk; ++s) {
      for (std::size_t u = 0; u < utts; ++u) {
        recs.push_back({synth_utterance_id(s, u), synth_speaker_id(s), "", 1});
      }
    }
    auto trials = generate_trials(recs, 2 + uniform_index(rng, 40), i);
    bool target = false, nontarget = false;
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& t : trials) {
      (t.is_target() ? target : nontarget) = true;
      EXPECT_NE(t.enroll, t.test);
      EXPECT_TRUE(pairs.emplace(t.enroll, t.test).second);
    }
    EXPECT_TRUE(target && nontarget);
  }
}

}  // namespace
}  // namespace yvec::audio
