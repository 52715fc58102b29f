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

#include <cmath>
#include <cstdint>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "segsum/numerics/tensor.hpp"

namespace segsum::numerics {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  std::vector<T> first_moment;
  std::vector<T> second_moment;
};

// Named, insertion-ordered parameter collection owned by a model.
template <typename T>
class ParameterSet {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> tensor) {
    if (index_.count(name)) {
      throw NumericError("parameter '" + name + "' registered twice");
    }
    tensor.set_requires_grad(true);
    index_[name] = params_.size();
    params_.push_back(Parameter<T>{name, std::move(tensor), {}, {}});
    return params_.back().tensor;
  }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  std::size_t coordinate_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
  }

  // Global L2 norm of all gradients.
  double grad_norm() const {
    double acc = 0;
    for (const auto& p : params_) {
      if (!p.tensor.has_grad()) continue;
      for (T g : p.tensor.grad()) acc += static_cast<double>(g) * g;
    }
    return std::sqrt(acc);
  }

  void scale_grads(double factor) {
    for (auto& p : params_) {
      if (!p.tensor.has_grad()) continue;
      for (T& g : p.tensor.mutable_grad()) g = static_cast<T>(g * factor);
    }
  }

  std::size_t size() const { return params_.size(); }
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

 private:
  // Deque keeps Parameter addresses stable as the set grows.
  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers live on the parameters.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamOptions options = {}) : options_(options) {}

  void step(ParameterSet<T>& params) {
    ++steps_;
    const double correction1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
    const double correction2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
    for (auto& p : params) {
      if (!p.tensor.has_grad()) continue;
      const std::size_t n = p.tensor.size();
      if (p.first_moment.size() != n) {
        p.first_moment.assign(n, T(0));
        p.second_moment.assign(n, T(0));
      }
      auto values = p.tensor.mutable_values();
      auto grads = p.tensor.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const double g = grads[i];
        const double m = options_.beta1 * p.first_moment[i] + (1.0 - options_.beta1) * g;
        const double v = options_.beta2 * p.second_moment[i] + (1.0 - options_.beta2) * g * g;
        p.first_moment[i] = static_cast<T>(m);
        p.second_moment[i] = static_cast<T>(v);
        const double m_hat = m / correction1;
        const double v_hat = v / correction2;
        values[i] = static_cast<T>(values[i] - options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps));
      }
    }
  }

  std::int64_t steps() const { return steps_; }
  AdamOptions& options() { return options_; }

 private:
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

}  // namespace segsum::numerics
