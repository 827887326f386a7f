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
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "yvec/audio/manifest.hpp"
#include "yvec/error.hpp"
#include "yvec/numerics/rng.hpp"

namespace yvec::audio {

enum class TrialLabel { kNontarget = 0, kTarget = 1 };

struct Trial {
  TrialLabel label = TrialLabel::kNontarget;
  std::string enroll;
  std::string test;
  std::size_t line = 0;  // 1-based source line, 0 when generated

  bool is_target() const noexcept { return label == TrialLabel::kTarget; }
};

/// Parses `<label 0|1> <enroll-id> <test-id>` lines. Blank lines are skipped.
inline std::vector<Trial> parse_trial_list(std::istream& in) {
  std::vector<Trial> trials;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream fields(line);
    std::string label, enroll, test, extra;
    if (!(fields >> label)) continue;
    if (!(fields >> enroll >> test)) {
      throw ParseError("expected '<label> <enroll> <test>', got '" + line + "'", lineno);
    }
    if (fields >> extra) throw ParseError("trailing field '" + extra + "'", lineno);
    Trial t;
    if (label == "1") {
      t.label = TrialLabel::kTarget;
    } else if (label == "0") {
      t.label = TrialLabel::kNontarget;
    } else {
      throw ParseError("unknown label '" + label + "' (expected 0 or 1)", lineno);
    }
    t.enroll = std::move(enroll);
    t.test = std::move(test);
    t.line = lineno;
    trials.push_back(std::move(t));
  }
  return trials;
}

inline std::vector<Trial> parse_trial_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open trial list " + path.string());
  return parse_trial_list(in);
}

inline void write_trial_list(std::ostream& out, const std::vector<Trial>& trials) {
  for (const auto& t : trials) {
    out << (t.is_target() ? '1' : '0') << ' ' << t.enroll << ' ' << t.test << '\n';
  }
}

/// Draws a balanced list (half target, half nontarget) of distinct ordered
/// pairs from the records. Falls short only when the manifest cannot supply
/// enough distinct pairs of a kind.
inline std::vector<Trial> generate_trials(const std::vector<ManifestRecord>& records,
                                          std::size_t n_trials, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_speaker;
  for (const auto& r : records) by_speaker[r.speaker_id].push_back(r.utterance_id);
  std::vector<std::string> speakers;
  std::size_t target_pairs = 0;
  for (const auto& [spk, utts] : by_speaker) {
    speakers.push_back(spk);
    target_pairs += utts.size() * (utts.size() - 1);
  }
  if (speakers.size() < 2) {
    throw ConfigError("trial generation needs at least two speakers");
  }
  if (target_pairs == 0) {
    throw ConfigError("trial generation needs a speaker with two utterances");
  }
  Rng rng(derive_seed({seed, 0x747269616cULL}));
  const std::size_t n_target = std::min(n_trials - n_trials / 2, target_pairs);
  const std::size_t n_nontarget = n_trials / 2;

  std::set<std::pair<std::string, std::string>> seen;
  std::vector<Trial> out;
  auto pick = [&](const std::vector<std::string>& v) -> const std::string& {
    return v[uniform_index(rng, v.size())];
  };
  std::size_t guard = 0;
  std::size_t made_target = 0, made_nontarget = 0;
  const std::size_t limit = 100 * (n_trials + 1);
  while ((made_target < n_target || made_nontarget < n_nontarget) && guard++ < limit) {
    const bool want_target =
        made_target < n_target && (made_nontarget >= n_nontarget || (out.size() % 2 == 0));
    Trial t;
    if (want_target) {
      const auto& utts = by_speaker[pick(speakers)];
      if (utts.size() < 2) continue;
      t.enroll = pick(utts);
      t.test = pick(utts);
      if (t.enroll == t.test) continue;
      t.label = TrialLabel::kTarget;
    } else {
      const std::string& a = pick(speakers);
      const std::string& b = pick(speakers);
      if (a == b) continue;
      t.enroll = pick(by_speaker[a]);
      t.test = pick(by_speaker[b]);
      t.label = TrialLabel::kNontarget;
    }
    if (!seen.emplace(t.enroll, t.test).second) continue;
    (want_target ? made_target : made_nontarget)++;
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace yvec::audio
