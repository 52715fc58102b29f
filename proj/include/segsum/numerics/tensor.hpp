// Copyright 2026 The Segsum Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "segsum/error.hpp"

namespace segsum::numerics {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

class ShapeError : public NumericError {
 public:
  ShapeError(const std::string& op, const std::string& detail)
      : NumericError(op + ": shape mismatch " + detail) {}
};

namespace detail {

inline bool& grad_enabled_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

inline bool grad_enabled() { return detail::grad_enabled_flag(); }

// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled_flag()) {
    detail::grad_enabled_flag() = false;
  }
  ~NoGradGuard() { detail::grad_enabled_flag() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Pushes this node's gradient into its parents' gradient buffers.
  std::function<void(Node&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Handle to a dense row-major array that may participate in a recorded
// computation graph. Copies share the underlying storage.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    auto node = std::make_shared<Node<T>>();
    node->value.assign(shape_size(shape), T(0));
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from(Shape shape, std::vector<T> values,
                     bool requires_grad = false) {
    if (shape_size(shape) != values.size()) {
      throw ShapeError("tensor", shape_string(shape) + " with " +
                                     std::to_string(values.size()) +
                                     " values");
    }
    auto node = std::make_shared<Node<T>>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return from({1}, {value}, requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }

  // Rank-1 tensors are treated as a single row.
  std::size_t rows() const {
    return rank() >= 2 ? node_->shape[rank() - 2] : 1;
  }
  std::size_t cols() const { return rank() ? node_->shape.back() : 1; }

  std::span<const T> values() const { return node_->value; }
  std::span<T> mutable_values() { return node_->value; }
  const T* data() const { return node_->value.data(); }
  T* mutable_data() { return node_->value.data(); }

  T at(std::size_t r, std::size_t c) const {
    return node_->value[r * cols() + c];
  }
  T item() const {
    if (size() != 1) {
      throw ShapeError("item", shape_string(shape()) + " is not a scalar");
    }
    return node_->value[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag) { node_->requires_grad = flag; }

  bool has_grad() const { return node_->grad.size() == node_->value.size(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& shared_node() const { return node_; }

  // Reverse-mode sweep from a scalar root. Every producing operation in the
  // graph runs its adjoint exactly once.
  void backward() const {
    if (size() != 1) {
      throw ShapeError("backward", "root " + shape_string(shape()) +
                                       " is not a scalar");
    }
    std::vector<Node<T>*> order;
    std::unordered_set<Node<T>*> visited;
    std::vector<std::pair<Node<T>*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [current, next_parent] = stack.back();
      if (next_parent < current->parents.size()) {
        Node<T>* parent = current->parents[next_parent++].get();
        if (parent->requires_grad && visited.insert(parent).second) {
          stack.emplace_back(parent, 0);
        }
        continue;
      }
      order.push_back(current);
      stack.pop_back();
    }
    node_->ensure_grad();
    node_->grad[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node<T>* current = *it;
      if (current->backward && current->grad.size() == current->value.size()) {
        current->backward(*current);
      }
    }
  }

 private:
  std::shared_ptr<Node<T>> node_;
};

// Builds an operation result. The adjoint is only recorded when graph
// recording is on and some input requires a gradient.
template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& input : inputs) {
      if (input.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& input : inputs) node->parents.push_back(input.shared_node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template <typename T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& input : inputs) {
      if (input.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& input : inputs) node->parents.push_back(input.shared_node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

// Gradient buffer of a parent, or nullptr when it does not need one.
template <typename T>
T* grad_sink(Node<T>& parent) {
  if (!parent.requires_grad) return nullptr;
  parent.ensure_grad();
  return parent.grad.data();
}

}  // namespace segsum::numerics
