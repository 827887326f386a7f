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

#include <span>
#include <vector>

#include "yvec/error.hpp"
#include "yvec/numerics/tape.hpp"

namespace yvec {

/// Heavy-ball SGD on raw spans: v <- momentum * v + grad; p <- p - lr * v.
template <typename T>
void sgd_momentum_step(std::span<T> params, std::span<const T> grads,
                       std::span<T> velocity, T lr, T momentum) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw ShapeError("sgd_momentum_step: params, grads and velocity differ in size");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grads[i];
    params[i] -= lr * velocity[i];
  }
}

/// SGD with momentum over a whole ParameterSet. Owns the velocity buffers.
template <typename T>
class SgdMomentum {
 public:
  SgdMomentum() = default;
  explicit SgdMomentum(const ParameterSet<T>& params) { reset(params); }

  void reset(const ParameterSet<T>& params) {
    velocity_.clear();
    for (const auto& p : params) velocity_.emplace_back(p.value.shape());
  }

  /// Applies one update from the given gradients.
  void step(ParameterSet<T>& params, const GradBuffer<T>& grads, T lr,
            T momentum) {
    check(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      sgd_momentum_step<T>(params[i].value.values(), grads[i].values(),
                           velocity_[i].values(), lr, momentum);
    }
  }

  /// Applies one update from Parameter::grad.
  void step(ParameterSet<T>& params, T lr, T momentum) {
    check(params);
    for (std::size_t i = 0; i < params.size(); ++i) {
      sgd_momentum_step<T>(params[i].value.values(), params[i].grad.values(),
                           velocity_[i].values(), lr, momentum);
    }
  }

  std::vector<Tensor<T>>& velocity() noexcept { return velocity_; }
  const std::vector<Tensor<T>>& velocity() const noexcept { return velocity_; }

 private:
  void check(const ParameterSet<T>& params) const {
    if (velocity_.size() != params.size()) {
      throw ContractError("optimizer state does not match the parameter set");
    }
  }

  std::vector<Tensor<T>> velocity_;
};

}  // namespace yvec
