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
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace yvec {

/// True when YVEC_STRICT_DETERMINISM=1: everything runs single-lane.
inline bool strict_determinism() {
  const char* v = std::getenv("YVEC_STRICT_DETERMINISM");
  return v && std::string(v) == "1";
}

/// Worker count: requested (0 = hardware), forced to 1 in strict mode.
inline std::size_t effective_threads(std::size_t requested) {
  if (strict_determinism()) return 1;
  if (requested == 0) {
    requested = std::thread::hardware_concurrency();
  }
  return requested == 0 ? 1 : requested;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers with a static
/// interleaved split. The first exception is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  if (threads > n) threads = n;
  std::exception_ptr error;
  std::mutex mu;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += threads) fn(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace yvec
