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
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/aggregator/embedding.hpp"
#include "yvec/audio/trials.hpp"
#include "yvec/numerics/parallel.hpp"
#include "yvec/numerics/rng.hpp"

namespace yvec::evaluator {

struct TrialScoreSet {
  std::vector<double> scores;
  std::vector<bool> targets;
  // Ids are kept for the score file; empty when built from raw scores.
  std::vector<std::string> enroll;
  std::vector<std::string> test;

  std::size_t size() const noexcept { return scores.size(); }
  std::size_t n_target() const { return static_cast<std::size_t>(std::count(targets.begin(), targets.end(), true)); }
  std::size_t n_nontarget() const { return size() - n_target(); }

  void add(double score, bool target) {
    scores.push_back(score);
    targets.push_back(target);
  }
};

struct DcfConfig {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.01;
};

struct OperatingPoint {
  double threshold = 0;  // accept when score >= threshold
  double frr = 0;
  double far = 0;
};

struct EerResult {
  double eer = 0;
  double threshold = 0;
};

struct DcfResult {
  double min_dcf = 0;  // normalised
  double threshold = 0;
};

struct ConfidenceInterval {
  double low = 0;
  double high = 0;
};

/// Cosine score per trial, in trial order.
inline TrialScoreSet score_trials(
    const std::vector<audio::Trial>& trials,
    const std::map<std::string, aggregator::SpeakerEmbedding>& embeddings) {
  TrialScoreSet out;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const auto& t = trials[i];
    const std::size_t line = t.line ? t.line : i + 1;
    for (const auto* id : {&t.enroll, &t.test}) {
      if (!embeddings.count(*id)) {
        throw ScoringError("trial line " + std::to_string(line) + ": no embedding for " + *id);
      }
    }
    out.add(aggregator::cosine_score(embeddings.at(t.enroll), embeddings.at(t.test)),
            t.is_target());
    out.enroll.push_back(t.enroll);
    out.test.push_back(t.test);
  }
  return out;
}

namespace detail {

inline void require_both_classes(const TrialScoreSet& s, const char* what) {
  if (s.targets.size() != s.scores.size()) throw ScoringError("scores and labels differ in length");
  for (double v : s.scores) {
    if (!std::isfinite(v)) throw ScoringError(std::string(what) + ": non-finite score");
  }
  const std::size_t nt = s.n_target();
  if (nt == 0 || nt == s.size()) {
    throw ScoringError(std::string(what) + " needs at least one target and one nontarget trial");
  }
}

}  // namespace detail

/// Operating points at every unique score plus a final reject-all point
/// (threshold +inf), thresholds ascending.
inline std::vector<OperatingPoint> roc_points(const TrialScoreSet& s) {
  detail::require_both_classes(s, "ROC");
  std::vector<std::pair<double, bool>> v(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) v[i] = {s.scores[i], s.targets[i]};
  std::sort(v.begin(), v.end());
  const double nt = static_cast<double>(s.n_target());
  const double nn = static_cast<double>(s.n_nontarget());
  std::vector<OperatingPoint> out;
  std::size_t below_t = 0, below_n = 0;  // counts with score < threshold
  std::size_t i = 0;
  while (i < v.size()) {
    const double th = v[i].first;
    out.push_back({th, below_t / nt, (nn - below_n) / nn});
    for (; i < v.size() && v[i].first == th; ++i) (v[i].second ? below_t : below_n)++;
  }
  out.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return out;
}

/// Equal error rate: the first operating point where FRR >= FAR, linearly
/// interpolated with its predecessor when the two rates do not meet exactly.
inline EerResult eer_from_points(const std::vector<OperatingPoint>& pts) {
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& cur = pts[i];
    if (cur.frr < cur.far) continue;
    if (cur.frr == cur.far || i == 0) return {cur.frr, cur.threshold};
    const auto& prev = pts[i - 1];
    const double d0 = prev.far - prev.frr, d1 = cur.frr - cur.far;
    const double a = d0 / (d0 + d1);
    const double eer = prev.frr + a * (cur.frr - prev.frr);
    const double th = std::isfinite(cur.threshold)
                          ? prev.threshold + a * (cur.threshold - prev.threshold)
                          : prev.threshold;
    return {eer, th};
  }
  throw ScoringError("no EER crossing");  // unreachable: the last point has FRR 1
}

inline EerResult compute_eer(const TrialScoreSet& s) { return eer_from_points(roc_points(s)); }

/// Minimum normalised detection cost over all operating points, including
/// accept-all (lowest score) and reject-all (+inf).
inline DcfResult compute_mindcf(const TrialScoreSet& s, const DcfConfig& cfg = {}) {
  if (!(cfg.c_miss > 0 && cfg.c_fa > 0 && cfg.p_target > 0 && cfg.p_target < 1)) {
    throw ConfigError("DCF costs must be positive and p_target in (0, 1)");
  }
  const auto pts = roc_points(s);
  const double norm = std::min(cfg.c_miss * cfg.p_target, cfg.c_fa * (1 - cfg.p_target));
  DcfResult best{std::numeric_limits<double>::infinity(), 0};
  for (const auto& p : pts) {
    const double dcf =
        (cfg.c_miss * cfg.p_target * p.frr + cfg.c_fa * (1 - cfg.p_target) * p.far) / norm;
    if (dcf < best.min_dcf) best = {dcf, p.threshold};
  }
  return best;
}

/// Percentile bootstrap interval of the EER over whole-trial resamples.
/// Resamples drawing a single class are skipped.
inline ConfidenceInterval bootstrap_eer_ci(const TrialScoreSet& s, std::size_t n_resamples = 1000,
                                           double confidence = 0.95, std::uint64_t seed = 1,
                                           std::size_t threads = 0) {
  if (n_resamples < 100) throw ConfigError("bootstrap needs at least 100 resamples");
  if (!(confidence > 0 && confidence < 1)) throw ConfigError("confidence must lie in (0, 1)");
  detail::require_both_classes(s, "bootstrap");
  const std::size_t n = s.size();
  std::vector<double> eers(n_resamples, std::numeric_limits<double>::quiet_NaN());
  parallel_for(n_resamples, effective_threads(threads), [&](std::size_t r) {
    Rng rng(derive_seed({seed, r}));
    TrialScoreSet b;
    b.scores.reserve(n);
    b.targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(uniform_index(rng, n));
      b.add(s.scores[k], s.targets[k]);
    }
    const std::size_t nt = b.n_target();
    if (nt == 0 || nt == n) return;
    eers[r] = compute_eer(b).eer;
  });
  std::vector<double> kept;
  for (double e : eers) {
    if (!std::isnan(e)) kept.push_back(e);
  }
  if (kept.empty()) throw ScoringError("every bootstrap resample had a single class");
  std::sort(kept.begin(), kept.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(kept.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, kept.size() - 1);
    return kept[lo] + (pos - static_cast<double>(lo)) * (kept[hi] - kept[lo]);
  };
  const double tail = (1 - confidence) / 2;
  return {quantile(tail), quantile(1 - tail)};
}

// ---- reports ---------------------------------------------------------------

struct EvalReport {
  double eer = 0;
  double eer_threshold = 0;
  double min_dcf = 0;
  double dcf_threshold = 0;
  double ci_low = 0;
  double ci_high = 0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
};

inline EvalReport evaluate(const TrialScoreSet& s, const DcfConfig& dcf = {},
                           std::size_t n_resamples = 1000, double confidence = 0.95,
                           std::uint64_t seed = 1) {
  const auto e = compute_eer(s);
  const auto d = compute_mindcf(s, dcf);
  const auto ci = bootstrap_eer_ci(s, n_resamples, confidence, seed);
  return {e.eer, e.threshold, d.min_dcf, d.threshold, ci.low, ci.high, s.n_target(), s.n_nontarget()};
}

inline nlohmann::json to_json(const EvalReport& r) {
  auto finite = [](double v) -> nlohmann::json {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json("inf");
  };
  return {{"eer", r.eer},         {"eer_threshold", finite(r.eer_threshold)},
          {"min_dcf", r.min_dcf}, {"dcf_threshold", finite(r.dcf_threshold)},
          {"ci_low", r.ci_low},   {"ci_high", r.ci_high},
          {"n_target", r.n_target}, {"n_nontarget", r.n_nontarget}};
}

/// `label,enroll,test,score` with six decimals.
inline void write_score_csv(std::ostream& os, const TrialScoreSet& s) {
  os << "label,enroll,test,score\n";
  char buf[64];
  for (std::size_t i = 0; i < s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f", s.scores[i]);
    os << (s.targets[i] ? 1 : 0) << ',' << (i < s.enroll.size() ? s.enroll[i] : "") << ','
       << (i < s.test.size() ? s.test[i] : "") << ',' << buf << '\n';
  }
}

inline void write_roc_csv(std::ostream& os, const std::vector<OperatingPoint>& pts) {
  os << "threshold,far,frr\n";
  char buf[96];
  for (const auto& p : pts) {
    if (std::isfinite(p.threshold)) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.threshold, p.far, p.frr);
    } else {
      std::snprintf(buf, sizeof buf, "inf,%.6f,%.6f\n", p.far, p.frr);
    }
    os << buf;
  }
}

}  // namespace yvec::evaluator
