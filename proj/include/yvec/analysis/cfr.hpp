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

// Cumulative frequency response (CFR) of learned first-layer filters:
// CFR = sum_k |F_k| / ||F_k||_2 over a 256-point transform's 129 bins.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "yvec/error.hpp"
#include "yvec/numerics/tape.hpp"

namespace yvec::analysis {

inline constexpr std::size_t kDftSize = 256;
inline constexpr std::size_t kBins = kDftSize / 2 + 1;
inline constexpr double kBinHz = 16000.0 / kDftSize;
inline constexpr double kDbFloor = -120.0;

using Spectrum = std::array<double, kBins>;

inline double bin_hz(std::size_t k) { return static_cast<double>(k) * kBinHz; }

namespace detail {

struct Twiddles {
  std::array<double, kDftSize> cos{}, sin{};
  Twiddles() {
    for (std::size_t i = 0; i < kDftSize; ++i) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / kDftSize;
      cos[i] = std::cos(a);
      sin[i] = std::sin(a);
    }
  }
};

inline const Twiddles& twiddles() {
  static const Twiddles t;
  return t;
}

}  // namespace detail

/// |DFT_256| of a zero-padded filter at bins 0..128, by direct summation.
inline Spectrum dft_magnitude_256(std::span<const double> filter) {
  if (filter.empty()) throw ConfigError("dft_magnitude_256: empty filter");
  if (filter.size() > kDftSize) {
    throw ConfigError("dft_magnitude_256: filter of length " + std::to_string(filter.size()) +
                      " exceeds 256 taps");
  }
  const auto& tw = detail::twiddles();
  Spectrum out{};
  for (std::size_t k = 0; k < kBins; ++k) {
    double re = 0, im = 0;
    for (std::size_t n = 0; n < filter.size(); ++n) {
      const std::size_t idx = (k * n) % kDftSize;
      re += filter[n] * tw.cos[idx];
      im -= filter[n] * tw.sin[idx];
    }
    out[k] = std::hypot(re, im);
  }
  return out;
}

struct CfrResult {
  std::string source;
  Spectrum linear{};
  Spectrum db{};
  std::size_t filters_used = 0;
  std::size_t filters_skipped = 0;  // all-zero filters
};

inline double to_db(double linear) {
  return linear > 0 ? std::max(kDbFloor, 20.0 * std::log10(linear)) : kDbFloor;
}

inline CfrResult cfr(const std::vector<std::vector<double>>& filters, std::string source = "") {
  CfrResult r;
  r.source = std::move(source);
  for (const auto& f : filters) {
    const auto mag = dft_magnitude_256(f);
    double norm = 0;
    for (double m : mag) norm += m * m;
    norm = std::sqrt(norm);
    if (norm == 0) {
      ++r.filters_skipped;
      continue;
    }
    for (std::size_t k = 0; k < kBins; ++k) r.linear[k] += mag[k] / norm;
    ++r.filters_used;
  }
  if (r.filters_used == 0) {
    throw NumericError("cfr" + (r.source.empty() ? std::string() : " for " + r.source) +
                       ": every filter is all-zero");
  }
  for (std::size_t k = 0; k < kBins; ++k) r.db[k] = to_db(r.linear[k]);
  return r;
}

struct FlatnessStats {
  double peak_minus_mean_db = 0;
  double stddev_db = 0;
  double argmax_hz = 0;
};

/// Statistics of the dB curve over bins whose frequency lies in [lo, hi].
inline FlatnessStats flatness_stats(const CfrResult& c, double lo_hz = 0, double hi_hz = 8000) {
  if (!(lo_hz >= 0 && hi_hz <= 8000 && lo_hz <= hi_hz)) {
    throw ConfigError("flatness band must lie within [0, 8000] Hz");
  }
  std::vector<std::size_t> bins;
  for (std::size_t k = 0; k < kBins; ++k) {
    if (bin_hz(k) >= lo_hz && bin_hz(k) <= hi_hz) bins.push_back(k);
  }
  if (bins.empty()) throw ConfigError("flatness band contains no frequency bin");
  double mean = 0;
  std::size_t best = bins.front();
  for (auto k : bins) {
    mean += c.db[k];
    if (c.db[k] > c.db[best]) best = k;
  }
  mean /= static_cast<double>(bins.size());
  double var = 0;
  for (auto k : bins) var += (c.db[k] - mean) * (c.db[k] - mean);
  return {c.db[best] - mean, std::sqrt(var / static_cast<double>(bins.size())), bin_hz(best)};
}

/// First-layer filters of each encoder branch ([C x 1 x K] weights), one CFR
/// per branch plus a pooled "all" curve.
template <typename T>
std::vector<CfrResult> encoder_cfr(const ParameterSet<T>& params, const std::string& label = "") {
  std::vector<std::vector<double>> pooled;
  std::vector<CfrResult> out;
  for (std::size_t b = 1;; ++b) {
    const std::string name = "encoder.branch" + std::to_string(b) + ".filter.weight";
    if (!params.contains(name)) break;
    const auto& w = params.at(name).value;
    const std::size_t c = w.dim(0), k = w.dim(2);
    if (w.dim(1) != 1) throw ShapeError(name + " is not a first-layer filter bank");
    std::vector<std::vector<double>> filters(c, std::vector<double>(k));
    for (std::size_t i = 0; i < c; ++i) {
      for (std::size_t j = 0; j < k; ++j) filters[i][j] = static_cast<double>(w[i * k + j]);
    }
    pooled.insert(pooled.end(), filters.begin(), filters.end());
    out.push_back(cfr(filters, label + "branch" + std::to_string(b)));
  }
  if (pooled.empty()) throw ConfigError("no encoder branch filters found");
  out.push_back(cfr(pooled, label + "all"));
  return out;
}

/// `freq_hz,cfr_linear,cfr_db,source`, one row per bin per curve.
inline void write_cfr_csv(std::ostream& os, const std::vector<CfrResult>& curves) {
  os << "freq_hz,cfr_linear,cfr_db,source\n";
  char buf[96];
  for (const auto& c : curves) {
    for (std::size_t k = 0; k < kBins; ++k) {
      std::snprintf(buf, sizeof buf, "%.1f,%.9g,%.6f,", bin_hz(k), c.linear[k], c.db[k]);
      os << buf << c.source << '\n';
    }
  }
}

}  // namespace yvec::analysis
