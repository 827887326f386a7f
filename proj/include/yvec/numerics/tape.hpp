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

// Reverse-mode differentiation on a Wengert list. Nodes are appended in
// evaluation order, so walking the list backwards is a reverse topological
// order and every node is visited once.

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "yvec/error.hpp"
#include "yvec/numerics/tensor.hpp"

namespace yvec {

/// Trainable leaf: a named value with an accumulated gradient.
template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  std::size_t index = 0;  // position inside its ParameterSet

  void zero_grad() {
    if (grad.shape() != value.shape()) grad = Tensor<T>(value.shape());
    else grad.fill(T(0));
  }
};

/// Ordered, name-addressable parameter collection with stable addresses.
template <typename T>
class ParameterSet {
 public:
  Parameter<T>& add(std::string name, Tensor<T> value) {
    if (by_name_.count(name)) throw ConfigError("duplicate parameter " + name);
    auto& p = params_.emplace_back();
    p.name = std::move(name);
    p.value = std::move(value);
    p.grad = Tensor<T>(p.value.shape());
    p.index = params_.size() - 1;
    by_name_.emplace(p.name, p.index);
    return p;
  }

  std::size_t size() const noexcept { return params_.size(); }
  Parameter<T>& operator[](std::size_t i) { return params_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return params_[i]; }

  Parameter<T>& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ConfigError("unknown parameter " + name);
    return params_[it->second];
  }
  const Parameter<T>& at(const std::string& name) const {
    return const_cast<ParameterSet*>(this)->at(name);
  }
  bool contains(const std::string& name) const { return by_name_.count(name); }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

  std::size_t total_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.numel();
    return n;
  }

 private:
  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> by_name_;
};

/// Per-parameter gradient accumulator, indexed like a ParameterSet. Lets
/// independent tapes run concurrently without touching Parameter::grad.
template <typename T>
class GradBuffer {
 public:
  GradBuffer() = default;
  explicit GradBuffer(const ParameterSet<T>& params) {
    grads_.reserve(params.size());
    for (const auto& p : params) grads_.emplace_back(p.value.shape());
  }
  Tensor<T>& operator[](std::size_t i) { return grads_[i]; }
  const Tensor<T>& operator[](std::size_t i) const { return grads_[i]; }
  std::size_t size() const noexcept { return grads_.size(); }
  void zero() {
    for (auto& g : grads_) g.fill(T(0));
  }

 private:
  std::vector<Tensor<T>> grads_;
};

template <typename T>
class Tape;

/// Handle to a node on a tape.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t dim(std::size_t i) const { return value().dim(i); }
  bool requires_grad() const;
  Tape<T>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> value) { return push_leaf(std::move(value), false); }
  Var<T> variable(Tensor<T> value) { return push_leaf(std::move(value), true); }

  /// Leaf bound to a parameter. The value is referenced, not copied, so the
  /// parameter must outlive the tape and stay unmodified until backward ends.
  Var<T> param(const Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<T>(this, it->second);
    Node n;
    n.ref = &p.value;
    n.requires_grad = true;
    n.leaf = true;
    n.param = &p;
    nodes_.push_back(std::move(n));
    param_nodes_.emplace(&p, nodes_.size() - 1);
    return Var<T>(this, nodes_.size() - 1);
  }

  /// Records an op result. `parents` decide whether the node needs a grad.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> parents,
              BackwardFn fn) {
    return push(std::move(value), std::vector<Var<T>>(parents), std::move(fn));
  }

  Var<T> push(Tensor<T> value, const std::vector<Var<T>>& parents,
              BackwardFn fn) {
    bool rg = false;
    for (const auto& p : parents) {
      if (p.tape() != this) throw ContractError("mixing vars from different tapes");
      rg = rg || nodes_[p.id()].requires_grad;
    }
    Node n;
    n.own = std::move(value);
    n.requires_grad = rg;
    if (rg) n.backward = std::move(fn);
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_[id].value(); }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient slot of a node, allocated (zeroed) on first use.
  Tensor<T>& grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (n.grad.empty()) n.grad = Tensor<T>(n.value().shape());
    return n.grad;
  }

  /// Gradient of a leaf after backward; zeros if nothing reached it.
  const Tensor<T>& grad(const Var<T>& v) { return grad_slot(v.id()); }

  /// Gradient in the incoming direction for the node currently being
  /// back-propagated.
  const Tensor<T>& upstream(std::size_t id) const { return nodes_[id].grad; }

  /// Populates gradients of every requires-grad leaf reachable from `loss`.
  /// Parameter gradients go to `sink` when given, else to Parameter::grad.
  /// Leaf gradients accumulate across calls; interior ones are recomputed.
  void backward(const Var<T>& loss, GradBuffer<T>* sink = nullptr) {
    if (loss.tape() != this) throw ContractError("loss belongs to another tape");
    if (value(loss.id()).numel() != 1) {
      throw ContractError("backward needs a scalar loss, got shape " +
                          shape_str(value(loss.id()).shape()));
    }
    for (std::size_t i = 0; i <= loss.id(); ++i) {
      Node& n = nodes_[i];
      if (!n.leaf && !n.grad.empty()) n.grad.fill(T(0));
    }
    if (!nodes_[loss.id()].requires_grad) return;
    // Param leaves get fresh slots so a previous call is not re-added.
    for (auto& [p, id] : param_nodes_) {
      if (!nodes_[id].grad.empty()) nodes_[id].grad.fill(T(0));
    }
    grad_slot(loss.id())[0] += T(1);
    for (std::size_t i = loss.id() + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.empty()) continue;
      if (n.backward) n.backward(*this, i);
    }
    for (auto& [p, id] : param_nodes_) {
      const Node& n = nodes_[id];
      if (n.grad.empty()) continue;
      Tensor<T>& dst =
          sink ? (*sink)[p->index] : const_cast<Parameter<T>*>(p)->grad;
      if (dst.shape() != p->value.shape()) {
        throw ShapeError("gradient sink shape mismatch for " + p->name);
      }
      T* d = dst.data();
      const T* s = n.grad.data();
      for (std::size_t k = 0; k < dst.numel(); ++k) d[k] += s[k];
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> own;
    const Tensor<T>* ref = nullptr;
    Tensor<T> grad;
    bool requires_grad = false;
    bool leaf = false;
    const Parameter<T>* param = nullptr;
    BackwardFn backward;
    const Tensor<T>& value() const { return ref ? *ref : own; }
  };

  Var<T> push_leaf(Tensor<T> value, bool requires_grad) {
    Node n;
    n.own = std::move(value);
    n.requires_grad = requires_grad;
    n.leaf = true;
    nodes_.push_back(std::move(n));
    return Var<T>(this, nodes_.size() - 1);
  }

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> param_nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return tape_->value(id_);
}

template <typename T>
bool Var<T>::requires_grad() const {
  return tape_->requires_grad(id_);
}

}  // namespace yvec
