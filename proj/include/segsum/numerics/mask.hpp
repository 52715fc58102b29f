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
#include <cstdint>
#include <vector>

#include "segsum/numerics/tensor.hpp"

namespace segsum::numerics {

// Dense binary matrix; 1 marks an admissible (row, column) pair.
struct Mask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(std::size_t r, std::size_t c, std::uint8_t fill = 1)
      : rows(r), cols(c), bits(r * c, fill) {}

  static Mask ones(std::size_t r, std::size_t c) { return Mask(r, c, 1); }

  static Mask causal(std::size_t n) {
    Mask mask(n, n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, 1);
    }
    return mask;
  }

  // Every row admits exactly the columns flagged in `keep`.
  static Mask broadcast_row(std::size_t r, const std::vector<std::uint8_t>& keep) {
    Mask mask(r, keep.size(), 0);
    for (std::size_t i = 0; i < r; ++i) {
      std::copy(keep.begin(), keep.end(), mask.bits.begin() + i * keep.size());
    }
    return mask;
  }

  std::uint8_t operator()(std::size_t r, std::size_t c) const {
    return bits[r * cols + c];
  }
  void set(std::size_t r, std::size_t c, std::uint8_t v) { bits[r * cols + c] = v; }
  const std::uint8_t* row(std::size_t r) const { return bits.data() + r * cols; }

  bool row_empty(std::size_t r) const {
    for (std::size_t c = 0; c < cols; ++c) {
      if (bits[r * cols + c]) return false;
    }
    return true;
  }

  bool operator==(const Mask&) const = default;
};

// Elementwise AND of two same-shaped masks.
inline Mask intersect(const Mask& a, const Mask& b) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw ShapeError("mask_intersect",
                     shape_string({a.rows, a.cols}) + " vs " +
                         shape_string({b.rows, b.cols}));
  }
  Mask out(a.rows, a.cols, 0);
  for (std::size_t i = 0; i < a.bits.size(); ++i) out.bits[i] = a.bits[i] & b.bits[i];
  return out;
}

}  // namespace segsum::numerics
