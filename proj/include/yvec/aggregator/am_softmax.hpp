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
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "yvec/encoder/encoder.hpp"
#include "yvec/numerics/tape.hpp"

namespace yvec::aggregator {

struct AmSoftmaxConfig {
  double scale = 30.0;
  double margin = 0.35;

  friend bool operator==(const AmSoftmaxConfig&, const AmSoftmaxConfig&) = default;
};

inline void validate(const AmSoftmaxConfig& c) {
  if (!(c.scale > 0)) throw ConfigError("am-softmax scale must be positive");
  if (!(c.margin >= 0 && c.margin < 1)) throw ConfigError("am-softmax margin must lie in [0, 1)");
}

inline void to_json(nlohmann::json& j, const AmSoftmaxConfig& c) {
  j = {{"scale", c.scale}, {"margin", c.margin}};
}
inline void from_json(const nlohmann::json& j, AmSoftmaxConfig& c) {
  j.at("scale").get_to(c.scale);
  j.at("margin").get_to(c.margin);
}

/// Class weight matrix [C x D].
template <typename T>
Parameter<T>& register_classifier(ParameterSet<T>& set, std::size_t n_classes, std::size_t dim,
                                  Rng& rng) {
  if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
  return set.add("head.am.weight", encoder::detail::fan_in_uniform<T>({n_classes, dim}, dim, rng));
}

namespace detail {

template <typename T>
T safe_norm(const T* v, std::size_t n) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::max(std::sqrt(s), T(1e-12));
}

}  // namespace detail

/// Cosines between length-normalised rows of `features` [B x D] and class
/// weights [C x D]; returns [B x C].
template <typename T>
Tensor<T> cosine_logits(const Tensor<T>& features, const Tensor<T>& weight) {
  const std::size_t d = weight.dim(1), c = weight.dim(0);
  if (features.numel() % d != 0 || features.numel() == 0) {
    throw ShapeError("am-softmax: features " + shape_str(features.shape()) +
                     " do not match class weights " + shape_str(weight.shape()));
  }
  const std::size_t b = features.numel() / d;
  Tensor<T> out({b, c});
  std::vector<T> wn(c);
  for (std::size_t j = 0; j < c; ++j) wn[j] = detail::safe_norm(weight.data() + j * d, d);
  for (std::size_t i = 0; i < b; ++i) {
    const T* f = features.data() + i * d;
    const T fn = detail::safe_norm(f, d);
    for (std::size_t j = 0; j < c; ++j) {
      out[i * c + j] = kernels::dot(f, weight.data() + j * d, d) / (fn * wn[j]);
    }
  }
  return out;
}

/// Additive-margin softmax averaged over the batch. `features` holds B rows of
/// D values ([B x D], or [D] for a single sample).
template <typename T>
Var<T> am_softmax_loss(const Var<T>& features, const Var<T>& weight,
                       const std::vector<std::size_t>& labels, const AmSoftmaxConfig& cfg) {
  validate(cfg);
  if (weight.shape().size() != 2) throw ShapeError("am-softmax: class weights must be [C x D]");
  const std::size_t c = weight.dim(0), d = weight.dim(1);
  auto cos = std::make_shared<Tensor<T>>(cosine_logits(features.value(), weight.value()));
  const std::size_t b = cos->dim(0);
  if (labels.size() != b) {
    throw ShapeError("am-softmax: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(b) + " samples");
  }
  for (std::size_t i = 0; i < b; ++i) {
    if (labels[i] >= c) {
      throw ConfigError("am-softmax: label " + std::to_string(labels[i]) + " out of range for " +
                        std::to_string(c) + " classes");
    }
  }
  const T s = static_cast<T>(cfg.scale), m = static_cast<T>(cfg.margin);
  // softmax probabilities, kept for backward
  auto prob = std::make_shared<Tensor<T>>(Shape{b, c});
  double total = 0;
  std::vector<T> z(c);
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t jmax = 0;
    for (std::size_t j = 0; j < c; ++j) {
      z[j] = s * ((*cos)[i * c + j] - (j == labels[i] ? m : T(0)));
      if (z[j] > z[jmax]) jmax = j;
    }
    // log-sum-exp as zmax + log1p(rest) keeps tiny losses from rounding to 0
    T rest = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j != jmax) rest += std::exp(z[j] - z[jmax]);
    }
    for (std::size_t j = 0; j < c; ++j) {
      (*prob)[i * c + j] = std::exp(z[j] - z[jmax]) / (T(1) + rest);
    }
    total += static_cast<double>(z[jmax] - z[labels[i]]) + std::log1p(static_cast<double>(rest));
  }
  Tensor<T> out({1}, std::vector<T>{static_cast<T>(total / static_cast<double>(b))});

  return features.tape()->push(
      std::move(out), {features, weight},
      [features, weight, labels, cos, prob, b, c, d, s](Tape<T>& tape, std::size_t self) {
        const T g = tape.upstream(self)[0] / static_cast<T>(b);
        const T* fv = features.value().data();
        const T* wv = weight.value().data();
        std::vector<T> wnorm(c);
        for (std::size_t j = 0; j < c; ++j) wnorm[j] = detail::safe_norm(wv + j * d, d);
        // dL/dcos for every (i, j)
        std::vector<T> gc(b * c);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < c; ++j) {
            gc[i * c + j] = g * s * ((*prob)[i * c + j] - (j == labels[i] ? T(1) : T(0)));
          }
        }
        // cos_ij = <f_i, w_j> / (|f_i| |w_j|)
        // d cos / d f_i = w_j / (|f_i||w_j|) - cos_ij f_i / |f_i|^2
        std::vector<T> dfv, dwv;
        if (features.requires_grad()) dfv.assign(b * d, T(0));
        if (weight.requires_grad()) dwv.assign(c * d, T(0));
        for (std::size_t i = 0; i < b; ++i) {
          const T* f = fv + i * d;
          const T fn = detail::safe_norm(f, d);
          for (std::size_t j = 0; j < c; ++j) {
            const T gij = gc[i * c + j];
            if (gij == T(0)) continue;
            const T cij = (*cos)[i * c + j];
            const T* w = wv + j * d;
            const T inv = T(1) / (fn * wnorm[j]);
            if (!dfv.empty()) {
              T* df = dfv.data() + i * d;
              const T a = gij * inv, bcoef = gij * cij / (fn * fn);
              for (std::size_t k = 0; k < d; ++k) df[k] += a * w[k] - bcoef * f[k];
            }
            if (!dwv.empty()) {
              T* dw = dwv.data() + j * d;
              const T a = gij * inv, bcoef = gij * cij / (wnorm[j] * wnorm[j]);
              for (std::size_t k = 0; k < d; ++k) dw[k] += a * f[k] - bcoef * w[k];
            }
          }
        }
        if (!dfv.empty()) {
          T* dst = tape.grad_slot(features.id()).data();
          for (std::size_t k = 0; k < dfv.size(); ++k) dst[k] += dfv[k];
        }
        if (!dwv.empty()) {
          T* dst = tape.grad_slot(weight.id()).data();
          for (std::size_t k = 0; k < dwv.size(); ++k) dst[k] += dwv[k];
        }
      });
}

}  // namespace yvec::aggregator
