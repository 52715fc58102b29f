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

#include <algorithm>
#include <span>
#include <vector>

#include "segsum/numerics/mask.hpp"

namespace segsum::model {

// Target-by-source indicator of "same section". Row i admits the source
// tokens of the section assigned to target position i.
struct SegMask {
  numerics::Mask mask;
  std::vector<int> row_sections;  // after clamping
  std::vector<bool> fallback_rows;

  std::size_t rows() const { return mask.rows; }
  std::size_t cols() const { return mask.cols; }
  std::uint8_t operator()(std::size_t i, std::size_t j) const { return mask(i, j); }
};

// Target sections beyond the last source section are clamped to it; a row
// whose section owns no source token becomes all ones.
inline SegMask build_seg_mask(std::span<const int> src_section_of_token,
                              std::span<const int> tgt_section_of_token) {
  SegMask seg;
  const std::size_t rows = tgt_section_of_token.size();
  const std::size_t cols = src_section_of_token.size();
  seg.mask = numerics::Mask(rows, cols, 0);
  seg.fallback_rows.assign(rows, false);
  int max_src = 0;
  for (int s : src_section_of_token) max_src = std::max(max_src, s);
  for (std::size_t i = 0; i < rows; ++i) {
    const int section = std::min(tgt_section_of_token[i], max_src);
    seg.row_sections.push_back(section);
    bool any = false;
    for (std::size_t j = 0; j < cols; ++j) {
      if (src_section_of_token[j] == section) {
        seg.mask.set(i, j, 1);
        any = true;
      }
    }
    if (!any) {
      seg.fallback_rows[i] = true;
      std::fill_n(seg.mask.bits.begin() + i * cols, cols, std::uint8_t{1});
    }
  }
  return seg;
}

}  // namespace segsum::model
