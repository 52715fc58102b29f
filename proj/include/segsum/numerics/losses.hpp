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
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "segsum/numerics/ops.hpp"

namespace segsum::numerics {

// Mean cross entropy against a smoothed one-hot target: 1 - epsilon on the
// target id and epsilon / (V - 1) on every other id. Rows whose target is
// `ignore_id` contribute nothing.
template <typename T>
Tensor<T> cross_entropy_label_smoothed(const Tensor<T>& logits,
                                       std::span<const int> targets,
                                       double epsilon, int ignore_id) {
  const std::size_t rows = logits.rows(), vocab = logits.cols();
  detail::require(targets.size() == rows, "cross_entropy",
                  shape_string(logits.shape()) + " with " +
                      std::to_string(targets.size()) + " targets");
  if (epsilon < 0.0 || epsilon >= 1.0) {
    throw NumericError("cross_entropy: smoothing factor outside [0, 1)");
  }
  // A single-token vocabulary has nowhere to spread the smoothing mass.
  const T on_target = vocab > 1 ? T(1.0 - epsilon) : T(1);
  const T off_target = vocab > 1 ? T(epsilon / static_cast<double>(vocab - 1)) : T(0);
  std::size_t counted = 0;
  for (int t : targets) {
    if (t == ignore_id) continue;
    detail::require(t >= 0 && static_cast<std::size_t>(t) < vocab, "cross_entropy",
                    "target " + std::to_string(t) + " outside vocabulary of " +
                        std::to_string(vocab));
    ++counted;
  }
  if (counted == 0) throw NumericError("cross_entropy: no non-ignored positions");

  // Softmax rows are kept for the adjoint.
  std::vector<T> probs(rows * vocab, T(0));
  T total = 0;
  for (std::size_t i = 0; i < rows; ++i) {
    if (targets[i] == ignore_id) continue;
    const T* z = logits.data() + i * vocab;
    T peak = z[0];
    for (std::size_t v = 1; v < vocab; ++v) peak = std::max(peak, z[v]);
    T denom = 0;
    for (std::size_t v = 0; v < vocab; ++v) denom += std::exp(z[v] - peak);
    const T lse = peak + std::log(denom);
    T row_loss = 0;
    for (std::size_t v = 0; v < vocab; ++v) {
      const T q = static_cast<std::size_t>(targets[i]) == v ? on_target : off_target;
      row_loss += q * (lse - z[v]);
      probs[i * vocab + v] = std::exp(z[v] - lse);
    }
    total += row_loss;
  }
  const T inv_count = T(1) / static_cast<T>(counted);
  std::vector<int> saved(targets.begin(), targets.end());
  return make_result<T>(
      "cross_entropy", {1}, {total * inv_count}, {logits},
      [rows, vocab, on_target, off_target, inv_count, ignore_id,
       probs = std::move(probs), saved = std::move(saved)](Node<T>& self) {
        T* g = grad_sink(*self.parents[0]);
        if (!g) return;
        const T upstream = self.grad[0] * inv_count;
        for (std::size_t i = 0; i < rows; ++i) {
          if (saved[i] == ignore_id) continue;
          for (std::size_t v = 0; v < vocab; ++v) {
            const T q = static_cast<std::size_t>(saved[i]) == v ? on_target : off_target;
            g[i * vocab + v] += upstream * (probs[i * vocab + v] - q);
          }
        }
      });
}

// Mean binary cross entropy of logistic outputs against 0/1 labels.
template <typename T>
Tensor<T> binary_cross_entropy_with_logits(const Tensor<T>& logits,
                                           std::span<const int> labels) {
  detail::require(logits.size() == labels.size() && !labels.empty(),
                  "binary_cross_entropy",
                  shape_string(logits.shape()) + " with " +
                      std::to_string(labels.size()) + " labels");
  const std::size_t n = labels.size();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T x = logits.data()[i];
    const T y = static_cast<T>(labels[i]);
    total += std::max(x, T(0)) - x * y + std::log1p(std::exp(-std::abs(x)));
  }
  std::vector<int> saved(labels.begin(), labels.end());
  const T inv_n = T(1) / static_cast<T>(n);
  return make_result<T>("binary_cross_entropy", {1}, {total * inv_n}, {logits},
                        [n, inv_n, saved = std::move(saved)](Node<T>& self) {
    Node<T>& parent = *self.parents[0];
    T* g = grad_sink(parent);
    if (!g) return;
    for (std::size_t i = 0; i < n; ++i) {
      const T x = parent.value[i];
      const T sig = T(1) / (T(1) + std::exp(-x));
      g[i] += self.grad[0] * inv_n * (sig - static_cast<T>(saved[i]));
    }
  });
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace segsum::numerics
