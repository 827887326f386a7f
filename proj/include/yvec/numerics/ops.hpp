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

// Differentiable operations. Every op computes its forward value eagerly and
// records a backward closure on the tape when any input needs a gradient.
// Feature maps are [channels x frames], row-major.

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "yvec/error.hpp"
#include "yvec/numerics/kernels.hpp"
#include "yvec/numerics/rng.hpp"
#include "yvec/numerics/tape.hpp"
#include "yvec/numerics/tensor.hpp"

namespace yvec::ops {

namespace detail {

inline void require_rank(const Shape& s, std::size_t rank, std::string_view op) {
  if (s.size() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + shape_str(s));
  }
}

inline void require_same(const Shape& a, const Shape& b, std::string_view op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) +
                     " vs " + shape_str(b));
  }
}

/// Output length of a valid (unpadded) sliding window.
inline std::size_t valid_length(std::size_t length, std::size_t span,
                                std::size_t stride) {
  return (length - span) / stride + 1;
}

template <typename T>
void im2col(const T* x, std::size_t cin, std::size_t len, std::size_t k,
            std::size_t stride, std::size_t dilation, std::size_t lout, T* cols) {
  for (std::size_t c = 0; c < cin; ++c) {
    const T* row = x + c * len;
    for (std::size_t j = 0; j < k; ++j) {
      T* dst = cols + (c * k + j) * lout;
      const T* src = row + j * dilation;
      if (stride == 1) {
        std::copy(src, src + lout, dst);
      } else {
        for (std::size_t t = 0; t < lout; ++t) dst[t] = src[t * stride];
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, std::size_t cin, std::size_t len, std::size_t k,
                std::size_t stride, std::size_t dilation, std::size_t lout,
                T* dx) {
  for (std::size_t c = 0; c < cin; ++c) {
    T* row = dx + c * len;
    for (std::size_t j = 0; j < k; ++j) {
      const T* src = cols + (c * k + j) * lout;
      T* dst = row + j * dilation;
      if (stride == 1) {
        for (std::size_t t = 0; t < lout; ++t) dst[t] += src[t];
      } else {
        for (std::size_t t = 0; t < lout; ++t) dst[t * stride] += src[t];
      }
    }
  }
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  T* d = dst.data();
  const T* s = src.data();
  for (std::size_t i = 0; i < dst.numel(); ++i) d[i] += s[i];
}

}  // namespace detail

/// Valid 1-d convolution: x [Cin x L], w [Cout x Cin x K], b [Cout].
/// Lout = floor((L - span) / stride) + 1 with span = (K - 1) * dilation + 1.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& w, const Var<T>& b,
              std::size_t stride, std::size_t dilation = 1,
              std::string_view layer = "conv1d") {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  detail::require_rank(xs, 2, layer);
  detail::require_rank(ws, 3, layer);
  if (stride == 0 || dilation == 0) {
    throw ConfigError(std::string(layer) + ": stride and dilation must be >= 1");
  }
  const std::size_t cin = xs[0], len = xs[1];
  const std::size_t cout = ws[0], k = ws[2];
  if (ws[1] != cin) {
    throw ShapeError(std::string(layer) + ": kernel expects " +
                     std::to_string(ws[1]) + " input channels, input has " +
                     std::to_string(cin));
  }
  if (b.value().numel() != cout) {
    throw ShapeError(std::string(layer) + ": bias must have " +
                     std::to_string(cout) + " values");
  }
  const std::size_t span = (k - 1) * dilation + 1;
  if (len < span) {
    throw InputTooShortError(std::string(layer) + ": input length " +
                             std::to_string(len) + " shorter than kernel span " +
                             std::to_string(span));
  }
  const std::size_t lout = detail::valid_length(len, span, stride);
  const std::size_t J = cin * k;
  const bool direct = (k == 1 && stride == 1 && dilation == 1);

  Tensor<T> out({cout, lout});
  const T* bias = b.value().data();
  for (std::size_t o = 0; o < cout; ++o) {
    std::fill(out.data() + o * lout, out.data() + (o + 1) * lout, bias[o]);
  }
  std::vector<T> cols;
  const T* colp = x.value().data();
  if (!direct) {
    cols.resize(J * lout);
    detail::im2col(x.value().data(), cin, len, k, stride, dilation, lout,
                   cols.data());
    colp = cols.data();
  }
  kernels::gemm_nn(cout, lout, J, w.value().data(), colp, out.data());

  return x.tape()->push(
      std::move(out), {x, w, b},
      [x, w, b, cin, len, cout, k, stride, dilation, lout, J, direct](
          Tape<T>& tape, std::size_t self) {
        const Tensor<T>& gout = tape.upstream(self);
        std::vector<T> cols;
        const T* colp = x.value().data();
        if (w.requires_grad()) {
          if (!direct) {
            cols.resize(J * lout);
            detail::im2col(x.value().data(), cin, len, k, stride, dilation,
                           lout, cols.data());
            colp = cols.data();
          }
          kernels::gemm_nt(cout, J, lout, gout.data(), colp,
                           tape.grad_slot(w.id()).data());
        }
        if (b.requires_grad()) {
          T* db = tape.grad_slot(b.id()).data();
          for (std::size_t o = 0; o < cout; ++o) {
            const T* g = gout.data() + o * lout;
            T s = 0;
            for (std::size_t t = 0; t < lout; ++t) s += g[t];
            db[o] += s;
          }
        }
        if (x.requires_grad()) {
          T* dx = tape.grad_slot(x.id()).data();
          if (direct) {
            kernels::gemm_tn(cout, J, lout, w.value().data(), gout.data(), dx);
          } else {
            std::vector<T> dcols(J * lout, T(0));
            kernels::gemm_tn(cout, J, lout, w.value().data(), gout.data(),
                             dcols.data());
            detail::col2im_add(dcols.data(), cin, len, k, stride, dilation,
                               lout, dx);
          }
        }
      });
}

/// Per-channel windowed maximum. Gradient goes to the first argmax in a window.
template <typename T>
Var<T> maxpool1d(const Var<T>& x, std::size_t window, std::size_t stride) {
  detail::require_rank(x.shape(), 2, "maxpool1d");
  if (window == 0 || stride == 0) {
    throw ConfigError("maxpool1d: window and stride must be >= 1");
  }
  const std::size_t c = x.dim(0), len = x.dim(1);
  if (len < window) {
    throw InputTooShortError("maxpool1d: input length " + std::to_string(len) +
                             " shorter than window " + std::to_string(window));
  }
  const std::size_t lout = detail::valid_length(len, window, stride);
  Tensor<T> out({c, lout});
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(c * lout);
  const T* xv = x.value().data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t t = 0; t < lout; ++t) {
      const std::size_t base = ch * len + t * stride;
      std::size_t best = base;
      for (std::size_t j = 1; j < window; ++j) {
        if (xv[base + j] > xv[best]) best = base + j;
      }
      out[ch * lout + t] = xv[best];
      (*argmax)[ch * lout + t] = static_cast<std::uint32_t>(best);
    }
  }
  return x.tape()->push(std::move(out), {x},
                        [x, argmax](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < argmax->size(); ++i) {
                            dx[(*argmax)[i]] += g[i];
                          }
                        });
}

/// Mean over frames: [F x T] -> [F x 1].
template <typename T>
Var<T> avgpool_time(const Var<T>& x) {
  detail::require_rank(x.shape(), 2, "avgpool_time");
  const std::size_t f = x.dim(0), t = x.dim(1);
  if (t == 0) throw EmptySequenceError("avgpool_time: no frames");
  Tensor<T> out({f, 1});
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < f; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < t; ++j) s += xv[i * t + j];
    out[i] = s / static_cast<T>(t);
  }
  return x.tape()->push(std::move(out), {x},
                        [x, f, t](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          T* dx = tape.grad_slot(x.id()).data();
                          const T inv = T(1) / static_cast<T>(t);
                          for (std::size_t i = 0; i < f; ++i) {
                            for (std::size_t j = 0; j < t; ++j) {
                              dx[i * t + j] += g[i] * inv;
                            }
                          }
                        });
}

template <typename T>
Var<T> leaky_relu(const Var<T>& x, T slope) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = v > T(0) ? v : slope * v;
  return x.tape()->push(std::move(out), {x},
                        [x, slope](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          const T* xv = x.value().data();
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < g.numel(); ++i) {
                            dx[i] += xv[i] > T(0) ? g[i] : slope * g[i];
                          }
                        });
}

template <typename T>
Var<T> relu(const Var<T>& x) {
  return leaky_relu(x, T(0));
}

template <typename T>
T sigmoid_value(T v) {
  // Branches keep exp() from overflowing for large |v|.
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <typename T>
Var<T> sigmoid(const Var<T>& x) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v = sigmoid_value(v);
  auto* tape = x.tape();
  const std::size_t self_id = tape->size();
  return tape->push(std::move(out), {x},
                    [x, self_id](Tape<T>& tape, std::size_t self) {
                      const Tensor<T>& g = tape.upstream(self);
                      const T* y = tape.value(self_id).data();
                      T* dx = tape.grad_slot(x.id()).data();
                      for (std::size_t i = 0; i < g.numel(); ++i) {
                        dx[i] += g[i] * y[i] * (T(1) - y[i]);
                      }
                    });
}

/// Normalizes every frame (column) over the channel axis, then applies a
/// per-channel gain and bias. eps sits inside the square root.
template <typename T>
Var<T> layer_norm_channels(const Var<T>& x, const Var<T>& gain,
                           const Var<T>& bias, T eps = T(1e-5)) {
  detail::require_rank(x.shape(), 2, "layer_norm_channels");
  const std::size_t f = x.dim(0), t = x.dim(1);
  if (gain.value().numel() != f || bias.value().numel() != f) {
    throw ShapeError("layer_norm_channels: gain/bias must have " +
                     std::to_string(f) + " values");
  }
  const T* xv = x.value().data();
  auto xhat = std::make_shared<std::vector<T>>(f * t);
  auto inv_std = std::make_shared<std::vector<T>>(t);
  std::vector<T> mean(t, T(0)), var(t, T(0));
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < t; ++j) mean[j] += xv[i * t + j];
  }
  for (auto& m : mean) m /= static_cast<T>(f);
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      const T d = xv[i * t + j] - mean[j];
      var[j] += d * d;
    }
  }
  for (std::size_t j = 0; j < t; ++j) {
    (*inv_std)[j] = T(1) / std::sqrt(var[j] / static_cast<T>(f) + eps);
  }
  Tensor<T> out({f, t});
  const T* gv = gain.value().data();
  const T* bv = bias.value().data();
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < t; ++j) {
      const T h = (xv[i * t + j] - mean[j]) * (*inv_std)[j];
      (*xhat)[i * t + j] = h;
      out[i * t + j] = h * gv[i] + bv[i];
    }
  }
  return x.tape()->push(
      std::move(out), {x, gain, bias},
      [x, gain, bias, f, t, xhat, inv_std](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.upstream(self);
        const T* h = xhat->data();
        if (gain.requires_grad()) {
          T* dg = tape.grad_slot(gain.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            T s = 0;
            for (std::size_t j = 0; j < t; ++j) s += g[i * t + j] * h[i * t + j];
            dg[i] += s;
          }
        }
        if (bias.requires_grad()) {
          T* db = tape.grad_slot(bias.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            T s = 0;
            for (std::size_t j = 0; j < t; ++j) s += g[i * t + j];
            db[i] += s;
          }
        }
        if (x.requires_grad()) {
          const T* gv = gain.value().data();
          std::vector<T> mean_dh(t, T(0)), mean_dh_h(t, T(0));
          for (std::size_t i = 0; i < f; ++i) {
            for (std::size_t j = 0; j < t; ++j) {
              const T dh = g[i * t + j] * gv[i];
              mean_dh[j] += dh;
              mean_dh_h[j] += dh * h[i * t + j];
            }
          }
          const T inv_f = T(1) / static_cast<T>(f);
          T* dx = tape.grad_slot(x.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            for (std::size_t j = 0; j < t; ++j) {
              const T dh = g[i * t + j] * gv[i];
              dx[i * t + j] += (*inv_std)[j] *
                               (dh - mean_dh[j] * inv_f -
                                h[i * t + j] * mean_dh_h[j] * inv_f);
            }
          }
        }
      });
}

/// weight [Dout x Din] times x (Din values) plus bias. An [Din x 1] input
/// yields [Dout x 1]; anything else yields [Dout].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  detail::require_rank(weight.shape(), 2, "linear");
  const std::size_t dout = weight.dim(0), din = weight.dim(1);
  if (x.value().numel() != din) {
    throw ShapeError("linear: weight " + shape_str(weight.shape()) +
                     " cannot multiply input " + shape_str(x.shape()));
  }
  if (bias.value().numel() != dout) {
    throw ShapeError("linear: bias must have " + std::to_string(dout) + " values");
  }
  const bool column = x.shape().size() == 2 && x.dim(1) == 1;
  Tensor<T> out(column ? Shape{dout, 1} : Shape{dout});
  const T* wv = weight.value().data();
  const T* xv = x.value().data();
  const T* bv = bias.value().data();
  for (std::size_t o = 0; o < dout; ++o) {
    out[o] = kernels::dot(wv + o * din, xv, din) + bv[o];
  }
  return x.tape()->push(
      std::move(out), {x, weight, bias},
      [x, weight, bias, dout, din](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.upstream(self);
        if (weight.requires_grad()) {
          T* dw = tape.grad_slot(weight.id()).data();
          const T* xv = x.value().data();
          for (std::size_t o = 0; o < dout; ++o) {
            kernels::axpy(g[o], xv, dw + o * din, din);
          }
        }
        if (bias.requires_grad()) {
          T* db = tape.grad_slot(bias.id()).data();
          for (std::size_t o = 0; o < dout; ++o) db[o] += g[o];
        }
        if (x.requires_grad()) {
          T* dx = tape.grad_slot(x.id()).data();
          const T* wv = weight.value().data();
          for (std::size_t o = 0; o < dout; ++o) {
            kernels::axpy(g[o], wv + o * din, dx, din);
          }
        }
      });
}

/// Inverted dropout: survivors are scaled by 1/(1-rate) during training, so
/// inference is the identity.
template <typename T>
Var<T> dropout(const Var<T>& x, double rate, bool training, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " +
                      std::to_string(rate));
  }
  if (!training || rate == 0.0) return x;
  const T scale = static_cast<T>(1.0 / (1.0 - rate));
  auto mask = std::make_shared<std::vector<T>>(x.value().numel());
  Tensor<T> out = x.value();
  for (std::size_t i = 0; i < mask->size(); ++i) {
    (*mask)[i] = uniform01(rng) < rate ? T(0) : scale;
    out[i] *= (*mask)[i];
  }
  return x.tape()->push(std::move(out), {x},
                        [x, mask](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < mask->size(); ++i) {
                            dx[i] += g[i] * (*mask)[i];
                          }
                        });
}

/// y[f, t] = x[f, t] * gate[f]; gate holds F values.
template <typename T>
Var<T> scale_rows(const Var<T>& x, const Var<T>& gate) {
  detail::require_rank(x.shape(), 2, "scale_rows");
  const std::size_t f = x.dim(0), t = x.dim(1);
  if (gate.value().numel() != f) {
    throw ShapeError("scale_rows: gate has " +
                     std::to_string(gate.value().numel()) + " values for " +
                     std::to_string(f) + " rows");
  }
  Tensor<T> out = x.value();
  const T* gv = gate.value().data();
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] *= gv[i];
  }
  return x.tape()->push(
      std::move(out), {x, gate}, [x, gate, f, t](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.upstream(self);
        const T* xv = x.value().data();
        const T* gv = gate.value().data();
        if (gate.requires_grad()) {
          T* dg = tape.grad_slot(gate.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            dg[i] += kernels::dot(g.data() + i * t, xv + i * t, t);
          }
        }
        if (x.requires_grad()) {
          T* dx = tape.grad_slot(x.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            kernels::axpy(gv[i], g.data() + i * t, dx + i * t, t);
          }
        }
      });
}

/// y[f, t] = x[f, t] * gate[t]; gate holds T values.
template <typename T>
Var<T> scale_cols(const Var<T>& x, const Var<T>& gate) {
  detail::require_rank(x.shape(), 2, "scale_cols");
  const std::size_t f = x.dim(0), t = x.dim(1);
  if (gate.value().numel() != t) {
    throw ShapeError("scale_cols: gate has " +
                     std::to_string(gate.value().numel()) + " values for " +
                     std::to_string(t) + " frames");
  }
  Tensor<T> out = x.value();
  const T* gv = gate.value().data();
  for (std::size_t i = 0; i < f; ++i) {
    for (std::size_t j = 0; j < t; ++j) out[i * t + j] *= gv[j];
  }
  return x.tape()->push(
      std::move(out), {x, gate}, [x, gate, f, t](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.upstream(self);
        const T* xv = x.value().data();
        const T* gv = gate.value().data();
        if (gate.requires_grad()) {
          T* dg = tape.grad_slot(gate.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            for (std::size_t j = 0; j < t; ++j) dg[j] += g[i * t + j] * xv[i * t + j];
          }
        }
        if (x.requires_grad()) {
          T* dx = tape.grad_slot(x.id()).data();
          for (std::size_t i = 0; i < f; ++i) {
            for (std::size_t j = 0; j < t; ++j) dx[i * t + j] += g[i * t + j] * gv[j];
          }
        }
      });
}

/// Keeps the first `frames` columns.
template <typename T>
Var<T> truncate_time(const Var<T>& x, std::size_t frames) {
  detail::require_rank(x.shape(), 2, "truncate_time");
  const std::size_t f = x.dim(0), t = x.dim(1);
  if (frames > t || frames == 0) {
    throw ShapeError("truncate_time: cannot keep " + std::to_string(frames) +
                     " of " + std::to_string(t) + " frames");
  }
  if (frames == t) return x;
  Tensor<T> out({f, frames});
  for (std::size_t i = 0; i < f; ++i) {
    std::copy(x.value().data() + i * t, x.value().data() + i * t + frames,
              out.data() + i * frames);
  }
  return x.tape()->push(std::move(out), {x},
                        [x, f, t, frames](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < f; ++i) {
                            for (std::size_t j = 0; j < frames; ++j) {
                              dx[i * t + j] += g[i * frames + j];
                            }
                          }
                        });
}

/// Stacks [F_i x T] maps along channels, in argument order.
template <typename T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  if (parts.size() == 1) return parts.front();
  const std::size_t t = parts.front().dim(1);
  std::size_t total = 0;
  for (const auto& p : parts) {
    detail::require_rank(p.shape(), 2, "concat_channels");
    if (p.dim(1) != t) {
      throw ShapeError("concat_channels: frame counts differ (" +
                       std::to_string(p.dim(1)) + " vs " + std::to_string(t) + ")");
    }
    total += p.dim(0);
  }
  Tensor<T> out({total, t});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().numel(),
              out.data() + offset);
    offset += p.value().numel();
  }
  return parts.front().tape()->push(
      std::move(out), parts, [parts](Tape<T>& tape, std::size_t self) {
        const Tensor<T>& g = tape.upstream(self);
        std::size_t offset = 0;
        for (const auto& p : parts) {
          const std::size_t n = p.value().numel();
          if (p.requires_grad()) {
            T* dx = tape.grad_slot(p.id()).data();
            for (std::size_t i = 0; i < n; ++i) dx[i] += g[offset + i];
          }
          offset += n;
        }
      });
}

/// Per-channel mean and population standard deviation over frames:
/// [D x T] -> [2D], means first. eps sits inside the square root.
template <typename T>
Var<T> stat_pool(const Var<T>& x, T eps = T(1e-10)) {
  detail::require_rank(x.shape(), 2, "stat_pool");
  const std::size_t d = x.dim(0), t = x.dim(1);
  if (t == 0) throw EmptySequenceError("stat_pool: no frames");
  Tensor<T> out({2 * d});
  const T* xv = x.value().data();
  for (std::size_t i = 0; i < d; ++i) {
    T s = 0;
    for (std::size_t j = 0; j < t; ++j) s += xv[i * t + j];
    const T mean = s / static_cast<T>(t);
    T v = 0;
    for (std::size_t j = 0; j < t; ++j) {
      const T dv = xv[i * t + j] - mean;
      v += dv * dv;
    }
    out[i] = mean;
    out[d + i] = std::sqrt(v / static_cast<T>(t) + eps);
  }
  auto* tape = x.tape();
  const std::size_t self_id = tape->size();
  return tape->push(std::move(out), {x},
                    [x, d, t, self_id](Tape<T>& tape, std::size_t self) {
                      const Tensor<T>& g = tape.upstream(self);
                      const Tensor<T>& y = tape.value(self_id);
                      const T* xv = x.value().data();
                      T* dx = tape.grad_slot(x.id()).data();
                      const T inv_t = T(1) / static_cast<T>(t);
                      for (std::size_t i = 0; i < d; ++i) {
                        const T mean = y[i];
                        const T gm = g[i] * inv_t;
                        const T gs = g[d + i] * inv_t / y[d + i];
                        for (std::size_t j = 0; j < t; ++j) {
                          dx[i * t + j] += gm + gs * (xv[i * t + j] - mean);
                        }
                      }
                    });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "add");
  Tensor<T> out = a.value();
  detail::add_into(out, b.value());
  return a.tape()->push(std::move(out), {a, b},
                        [a, b](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          if (a.requires_grad()) detail::add_into(tape.grad_slot(a.id()), g);
                          if (b.requires_grad()) detail::add_into(tape.grad_slot(b.id()), g);
                        });
}

/// Elementwise product.
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::require_same(a.shape(), b.shape(), "mul");
  Tensor<T> out = a.value();
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] *= b.value()[i];
  return a.tape()->push(std::move(out), {a, b},
                        [a, b](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          if (a.requires_grad()) {
                            T* da = tape.grad_slot(a.id()).data();
                            for (std::size_t i = 0; i < g.numel(); ++i) da[i] += g[i] * b.value()[i];
                          }
                          if (b.requires_grad()) {
                            T* db = tape.grad_slot(b.id()).data();
                            for (std::size_t i = 0; i < g.numel(); ++i) db[i] += g[i] * a.value()[i];
                          }
                        });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  Tensor<T> out = x.value();
  for (auto& v : out.storage()) v *= factor;
  return x.tape()->push(std::move(out), {x},
                        [x, factor](Tape<T>& tape, std::size_t self) {
                          const Tensor<T>& g = tape.upstream(self);
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < g.numel(); ++i) dx[i] += factor * g[i];
                        });
}

/// Sum of all elements as a scalar [1].
template <typename T>
Var<T> sum(const Var<T>& x) {
  T s = 0;
  for (T v : x.value().values()) s += v;
  return x.tape()->push(Tensor<T>({1}, std::vector<T>{s}), {x},
                        [x](Tape<T>& tape, std::size_t self) {
                          const T g = tape.upstream(self)[0];
                          for (auto& v : tape.grad_slot(x.id()).storage()) v += g;
                        });
}

/// Squared L2 norm as a scalar [1].
template <typename T>
Var<T> sum_squares(const Var<T>& x) {
  const auto& xv = x.value();
  const T s = kernels::dot(xv.data(), xv.data(), xv.numel());
  return x.tape()->push(Tensor<T>({1}, std::vector<T>{s}), {x},
                        [x](Tape<T>& tape, std::size_t self) {
                          const T g = tape.upstream(self)[0];
                          const T* xv = x.value().data();
                          T* dx = tape.grad_slot(x.id()).data();
                          for (std::size_t i = 0; i < x.value().numel(); ++i) {
                            dx[i] += T(2) * g * xv[i];
                          }
                        });
}

template <typename T>
Var<T> reshape(const Var<T>& x, Shape shape) {
  Tensor<T> out = x.value().reshaped(std::move(shape));
  return x.tape()->push(std::move(out), {x},
                        [x](Tape<T>& tape, std::size_t self) {
                          detail::add_into(tape.grad_slot(x.id()), tape.upstream(self));
                        });
}

}  // namespace yvec::ops
