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
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "segsum/corpus/document.hpp"
#include "segsum/error.hpp"

namespace segsum::baselines {

// Mean paragraphs per section of the news corpus the Even default mimics
// (40.31 paragraphs over 3.17 sections).
inline constexpr double kDefaultParagraphsPerSection = 40.31 / 3.17;

struct TextTilingParams {
  std::size_t block_size = 2;       // paragraphs on each side of a gap
  std::size_t smoothing_width = 3;  // moving-average window over gap scores
  // Boundaries need depth > mean - cutoff_stddevs * stddev.
  double cutoff_stddevs = 0.5;
};

// Splits M paragraphs into N near-equal sections, larger sections first.
inline std::vector<int> even_segmenter(std::size_t m, std::size_t n) {
  if (n < 1) throw UsageError("even: section count must be >= 1");
  if (n > m) {
    throw UsageError("even: " + std::to_string(n) + " sections requested for " +
                     std::to_string(m) + " paragraphs");
  }
  std::vector<int> boundaries;
  const std::size_t base = m / n, extra = m % n;
  std::size_t end = 0;
  for (std::size_t s = 0; s + 1 < n; ++s) {
    end += base + (s < extra ? 1 : 0);
    boundaries.push_back(static_cast<int>(end));
  }
  return boundaries;
}

inline std::size_t even_default_sections(std::size_t m,
                                         double paragraphs_per_section = kDefaultParagraphsPerSection) {
  const auto n = static_cast<std::size_t>(std::lround(static_cast<double>(m) / paragraphs_per_section));
  return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(m, 1));
}

// Cosine similarity of the term-frequency vectors of the paragraph blocks
// on either side of every gap g = 1..M-1 (gap g follows paragraph g).
inline std::vector<double> gap_similarities(const corpus::Document& doc, std::size_t block_size) {
  const std::size_t m = doc.paragraphs.size();
  std::vector<double> scores;
  auto counts = [&](std::size_t begin, std::size_t end) {
    std::map<std::string, double> tf;
    for (std::size_t p = begin; p < end; ++p) {
      for (const auto& t : doc.paragraphs[p]) tf[t] += 1.0;
    }
    return tf;
  };
  for (std::size_t g = 1; g < m; ++g) {
    const std::size_t left_begin = g > block_size ? g - block_size : 0;
    const std::size_t right_end = std::min(m, g + block_size);
    const auto left = counts(left_begin, g);
    const auto right = counts(g, right_end);
    double dot = 0, nl = 0, nr = 0;
    for (const auto& [t, c] : left) {
      nl += c * c;
      auto it = right.find(t);
      if (it != right.end()) dot += c * it->second;
    }
    for (const auto& [t, c] : right) nr += c * c;
    scores.push_back(nl > 0 && nr > 0 ? dot / std::sqrt(nl * nr) : 0.0);
  }
  return scores;
}

inline std::vector<double> moving_average(const std::vector<double>& series, std::size_t width) {
  if (width <= 1) return series;
  const std::size_t half = width / 2;
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i > half ? i - half : 0;
    const std::size_t hi = std::min(series.size(), i + half + 1);
    double total = 0;
    for (std::size_t j = lo; j < hi; ++j) total += series[j];
    out[i] = total / static_cast<double>(hi - lo);
  }
  return out;
}

// Depth of each point: climb left and right while scores keep rising and
// add both rises.
inline std::vector<double> depth_scores(const std::vector<double>& scores) {
  std::vector<double> depth(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    double left = scores[i];
    for (std::size_t j = i; j > 0 && scores[j - 1] >= left; --j) left = scores[j - 1];
    double right = scores[i];
    for (std::size_t j = i + 1; j < scores.size() && scores[j] >= right; ++j) right = scores[j];
    depth[i] = (left - scores[i]) + (right - scores[i]);
  }
  return depth;
}

// Paragraph-level TextTiling. Boundaries sit at local minima of the smoothed
// gap similarity whose depth is positive and above the cutoff.
inline std::vector<int> texttiling(const corpus::Document& doc, const TextTilingParams& params = {}) {
  if (params.block_size < 1) throw UsageError("texttiling: block size must be >= 1");
  if (doc.paragraphs.size() < 2) return {};
  const std::vector<double> scores =
      moving_average(gap_similarities(doc, params.block_size), params.smoothing_width);
  const std::vector<double> depth = depth_scores(scores);
  double mean = 0;
  for (double d : depth) mean += d;
  mean /= static_cast<double>(depth.size());
  double var = 0;
  for (double d : depth) var += (d - mean) * (d - mean);
  const double stddev = std::sqrt(var / static_cast<double>(depth.size()));
  const double cutoff = mean - params.cutoff_stddevs * stddev;
  std::vector<int> boundaries;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool valley = (i == 0 || scores[i] <= scores[i - 1]) &&
                        (i + 1 == scores.size() || scores[i] <= scores[i + 1]);
    if (valley && depth[i] > 0.0 && depth[i] > cutoff) boundaries.push_back(static_cast<int>(i) + 1);
  }
  return boundaries;
}

}  // namespace segsum::baselines
