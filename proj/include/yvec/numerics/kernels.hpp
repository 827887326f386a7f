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

// Dense inner loops shared by the differentiable ops. All loops have a fixed
// evaluation order so results never depend on the caller's threading.

#include <algorithm>
#include <cstddef>
#include <cstring>
#include <vector>

namespace yvec::kernels {

/// Eight-lane dot product. Lane layout is fixed, so the sum is reproducible.
template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T lane[8] = {};
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
  }
  T tail = 0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
         ((lane[4] + lane[5]) + (lane[6] + lane[7])) + tail;
}

template <typename T>
inline void axpy(T alpha, const T* __restrict x, T* __restrict y,
                 std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

namespace detail {

// 32-byte SIMD register via the GCC/Clang vector extension.
template <typename T>
struct Simd {
  using type __attribute__((vector_size(32))) = T;
  static constexpr std::size_t width = 32 / sizeof(T);
};

template <typename V, typename T>
inline V load(const T* p) {
  V v;
  std::memcpy(&v, p, sizeof(V));
  return v;
}

template <typename V, typename T>
inline void add_store(T* p, V v) {
  V c = load<V>(p);
  c += v;
  std::memcpy(p, &c, sizeof(V));
}

}  // namespace detail

/// C[M x N] += A[M x K] * B[K x N], all row-major.
///
/// B is processed in kKc x kNc tiles packed strip by strip; a 4-row by
/// two-register block of C is accumulated over one tile and then added to C.
/// The tile grid is fixed, so the summation order of every element is too.
template <typename T>
void gemm_nn(std::size_t M, std::size_t N, std::size_t K, const T* A,
             const T* B, T* C) {
  using V = typename detail::Simd<T>::type;
  constexpr std::size_t W = detail::Simd<T>::width;
  constexpr std::size_t kStrip = 2 * W;
  constexpr std::size_t kKc = 256, kNc = 512;
  std::vector<T> packed(kKc * kNc);
  for (std::size_t n0 = 0; n0 < N; n0 += kNc) {
    const std::size_t nc = std::min(kNc, N - n0);
    const std::size_t strips = nc / kStrip;
    for (std::size_t k0 = 0; k0 < K; k0 += kKc) {
      const std::size_t kc = std::min(kKc, K - k0);
      for (std::size_t s = 0; s < strips; ++s) {
        T* dst = packed.data() + s * kc * kStrip;
        for (std::size_t k = 0; k < kc; ++k) {
          std::memcpy(dst + k * kStrip, B + (k0 + k) * N + n0 + s * kStrip,
                      kStrip * sizeof(T));
        }
      }
      std::size_t m = 0;
      for (; m + 4 <= M; m += 4) {
        const T* a0 = A + (m + 0) * K + k0;
        const T* a1 = A + (m + 1) * K + k0;
        const T* a2 = A + (m + 2) * K + k0;
        const T* a3 = A + (m + 3) * K + k0;
        for (std::size_t s = 0; s < strips; ++s) {
          V c00{}, c01{}, c10{}, c11{}, c20{}, c21{}, c30{}, c31{};
          const T* b = packed.data() + s * kc * kStrip;
          for (std::size_t k = 0; k < kc; ++k, b += kStrip) {
            const V b0 = detail::load<V>(b);
            const V b1 = detail::load<V>(b + W);
            c00 += a0[k] * b0;
            c01 += a0[k] * b1;
            c10 += a1[k] * b0;
            c11 += a1[k] * b1;
            c20 += a2[k] * b0;
            c21 += a2[k] * b1;
            c30 += a3[k] * b0;
            c31 += a3[k] * b1;
          }
          T* c = C + m * N + n0 + s * kStrip;
          detail::add_store(c, c00);
          detail::add_store(c + W, c01);
          detail::add_store(c + N, c10);
          detail::add_store(c + N + W, c11);
          detail::add_store(c + 2 * N, c20);
          detail::add_store(c + 2 * N + W, c21);
          detail::add_store(c + 3 * N, c30);
          detail::add_store(c + 3 * N + W, c31);
        }
      }
      for (; m < M; ++m) {
        const T* a = A + m * K + k0;
        for (std::size_t s = 0; s < strips; ++s) {
          V c0{}, c1{};
          const T* b = packed.data() + s * kc * kStrip;
          for (std::size_t k = 0; k < kc; ++k, b += kStrip) {
            c0 += a[k] * detail::load<V>(b);
            c1 += a[k] * detail::load<V>(b + W);
          }
          T* c = C + m * N + n0 + s * kStrip;
          detail::add_store(c, c0);
          detail::add_store(c + W, c1);
        }
      }
      // ragged columns of this tile
      for (std::size_t n = n0 + strips * kStrip; n < n0 + nc; ++n) {
        for (std::size_t mm = 0; mm < M; ++mm) {
          const T* a = A + mm * K + k0;
          T acc = 0;
          for (std::size_t k = 0; k < kc; ++k) acc += a[k] * B[(k0 + k) * N + n];
          C[mm * N + n] += acc;
        }
      }
    }
  }
}

/// C[M x K] += A[M x N] * B[K x N]^T. B is transposed once so the blocked
/// gemm_nn loop does the work.
template <typename T>
void gemm_nt(std::size_t M, std::size_t K, std::size_t N, const T* A,
             const T* B, T* C) {
  std::vector<T> bt(K * N);
  constexpr std::size_t kBlock = 64;
  for (std::size_t k0 = 0; k0 < K; k0 += kBlock) {
    const std::size_t k1 = (K - k0 < kBlock) ? K : k0 + kBlock;
    for (std::size_t n0 = 0; n0 < N; n0 += kBlock) {
      const std::size_t n1 = (N - n0 < kBlock) ? N : n0 + kBlock;
      for (std::size_t k = k0; k < k1; ++k) {
        for (std::size_t n = n0; n < n1; ++n) bt[n * K + k] = B[k * N + n];
      }
    }
  }
  gemm_nn(M, K, N, A, bt.data(), C);
}

/// C[K x N] += A[M x K]^T * B[M x N].
template <typename T>
void gemm_tn(std::size_t M, std::size_t K, std::size_t N, const T* A,
             const T* B, T* C) {
  constexpr std::size_t kTile = 512;
  for (std::size_t n0 = 0; n0 < N; n0 += kTile) {
    const std::size_t nn = (N - n0 < kTile) ? N - n0 : kTile;
    for (std::size_t k = 0; k < K; ++k) {
      T* __restrict c = C + k * N + n0;
      std::size_t m = 0;
      for (; m + 4 <= M; m += 4) {
        const T a0 = A[(m + 0) * K + k];
        const T a1 = A[(m + 1) * K + k];
        const T a2 = A[(m + 2) * K + k];
        const T a3 = A[(m + 3) * K + k];
        const T* __restrict b0 = B + (m + 0) * N + n0;
        const T* __restrict b1 = B + (m + 1) * N + n0;
        const T* __restrict b2 = B + (m + 2) * N + n0;
        const T* __restrict b3 = B + (m + 3) * N + n0;
        for (std::size_t j = 0; j < nn; ++j) {
          c[j] += (a0 * b0[j] + a1 * b1[j]) + (a2 * b2[j] + a3 * b3[j]);
        }
      }
      for (; m < M; ++m) axpy(A[m * K + k], B + m * N + n0, c, nn);
    }
  }
}

}  // namespace yvec::kernels
