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
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "segsum/corpus/vocabulary.hpp"
#include "segsum/error.hpp"
#include "segsum/model/transformer.hpp"

namespace segsum::decoding {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// GNMT length normalizer ((5 + length) / 6)^alpha.
inline double length_penalty(std::size_t length, double alpha) {
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

struct BeamHypothesis {
  std::vector<int> tokens;  // starts with [BOS]
  double log_prob = 0.0;
  int ysep_count = 0;
  int section = 1;
  bool finished = false;

  std::size_t generated() const { return tokens.size() - 1; }
};

struct BeamOptions {
  std::size_t beam_size = 5;
  double alpha = 0.8;
  std::size_t max_len = 48;  // generated tokens including [EOS]
};

// Heading-count constraint: exactly `required_headings` headings, the first
// describing section `section_offset`.
struct HeadingConstraint {
  int required_headings = 1;
  int section_offset = 1;
};

struct DecodeResult {
  std::vector<int> tokens;  // without [BOS]
  std::vector<std::vector<int>> headings;
  double log_prob = 0.0;
  double score = 0.0;
  bool degenerate = false;  // max_len reached before a constrained [EOS]
};

// Constraint masking applied to a step distribution. Returns the log-prob
// to use for `token` (-inf when forbidden).
inline double constrained_log_prob(int token, double log_prob, int ysep_count,
                                   int required_headings) {
  if (token == corpus::kPad || token == corpus::kBos || token == corpus::kXSep) return kNegInf;
  if (token == corpus::kEos && ysep_count != required_headings - 1) return kNegInf;
  if (token == corpus::kYSep && ysep_count >= required_headings - 1) return kNegInf;
  return log_prob;
}

// Splits a generated sequence on [Y_SEP] (dropping [EOS]) and pads with empty
// headings to `k`.
inline std::vector<std::vector<int>> split_headings(std::span<const int> tokens, int k) {
  std::vector<std::vector<int>> headings(1);
  for (int id : tokens) {
    if (id == corpus::kEos) break;
    if (id == corpus::kYSep) {
      headings.emplace_back();
    } else {
      headings.back().push_back(id);
    }
  }
  while (static_cast<int>(headings.size()) < k) headings.emplace_back();
  return headings;
}

namespace detail {

// Higher score first; ties prefer the lower last token, then the shorter
// hypothesis, then the lexicographically smaller sequence.
inline bool better(double score_a, const std::vector<int>& a, double score_b,
                   const std::vector<int>& b) {
  if (score_a != score_b) return score_a > score_b;
  if (a.back() != b.back()) return a.back() < b.back();
  if (a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

}  // namespace detail

// `scorer(prefix, section)` returns log-probabilities over the vocabulary
// for the token after `prefix`, where `section` is the hypothesis's current
// target section.
template <typename Scorer>
DecodeResult beam_search(Scorer&& scorer, const HeadingConstraint& constraint,
                         const BeamOptions& options) {
  if (options.beam_size < 1) throw UsageError("beam_search: beam_size must be >= 1");
  if (options.max_len < 1) throw UsageError("beam_search: max_len must be >= 1");
  const int k = std::max(1, constraint.required_headings);
  const double final_penalty = length_penalty(options.max_len, options.alpha);

  std::vector<BeamHypothesis> alive(1);
  alive[0].tokens = {corpus::kBos};
  alive[0].section = constraint.section_offset;
  bool have_finished = false;
  BeamHypothesis best_finished;
  double best_finished_score = kNegInf;

  struct Candidate {
    std::size_t parent;
    int token;
    double log_prob;
    std::vector<int> tokens;
  };

  for (std::size_t step = 0; step < options.max_len && !alive.empty(); ++step) {
    std::vector<Candidate> candidates;
    for (std::size_t h = 0; h < alive.size(); ++h) {
      const BeamHypothesis& hyp = alive[h];
      const std::vector<double> step_log_probs = scorer(std::span<const int>(hyp.tokens), hyp.section);
      for (std::size_t v = 0; v < step_log_probs.size(); ++v) {
        const int token = static_cast<int>(v);
        const double lp = constrained_log_prob(token, step_log_probs[v], hyp.ysep_count, k);
        if (lp == kNegInf || std::isnan(lp)) continue;
        Candidate c{h, token, hyp.log_prob + lp, hyp.tokens};
        c.tokens.push_back(token);
        candidates.push_back(std::move(c));
      }
    }
    std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      return detail::better(a.log_prob, a.tokens, b.log_prob, b.tokens);
    });
    if (candidates.size() > options.beam_size) candidates.resize(options.beam_size);

    std::vector<BeamHypothesis> next;
    for (auto& c : candidates) {
      BeamHypothesis hyp;
      const BeamHypothesis& parent = alive[c.parent];
      hyp.tokens = std::move(c.tokens);
      hyp.log_prob = c.log_prob;
      hyp.ysep_count = parent.ysep_count + (c.token == corpus::kYSep ? 1 : 0);
      hyp.section = constraint.section_offset + hyp.ysep_count;
      if (c.token == corpus::kEos) {
        hyp.finished = true;
        const double score = hyp.log_prob / length_penalty(hyp.generated(), options.alpha);
        if (!have_finished ||
            detail::better(score, hyp.tokens, best_finished_score, best_finished.tokens)) {
          best_finished = hyp;
          best_finished_score = score;
          have_finished = true;
        }
      } else {
        next.push_back(std::move(hyp));
      }
    }
    alive = std::move(next);
    // Extending can only lower the log-prob, so an alive hypothesis scores at
    // most log_prob / penalty(max_len).
    if (have_finished) {
      std::erase_if(alive, [&](const BeamHypothesis& hyp) {
        return hyp.log_prob / final_penalty < best_finished_score;
      });
    }
  }

  DecodeResult result;
  const BeamHypothesis* chosen = nullptr;
  if (have_finished) {
    chosen = &best_finished;
    result.score = best_finished_score;
  } else if (!alive.empty()) {
    chosen = &alive.front();  // already ordered best first
    result.degenerate = true;
    result.score = chosen->log_prob / length_penalty(chosen->generated(), options.alpha);
  } else {
    result.degenerate = true;
    result.headings = split_headings({}, k);
    result.score = kNegInf;
    result.log_prob = kNegInf;
    return result;
  }
  result.tokens.assign(chosen->tokens.begin() + 1, chosen->tokens.end());
  result.log_prob = chosen->log_prob;
  result.headings = split_headings(result.tokens, k);
  if (static_cast<int>(result.headings.size()) > k) {
    throw NumericError("beam_search: produced more headings than required");
  }
  return result;
}

// Scorer over a trained model for one source document.
template <typename T>
class ModelScorer {
 public:
  ModelScorer(const model::Transformer<T>& model, const model::EncoderState<T>& encoder,
              std::span<const int> src_section_of_token, int section_offset,
              model::CrossAttentionMode mode = model::CrossAttentionMode::kSegmentationAware)
      : model_(model),
        encoder_(encoder),
        src_sections_(src_section_of_token),
        section_offset_(section_offset),
        mode_(mode) {}

  std::vector<double> operator()(std::span<const int> prefix, int /*section*/) const {
    // The model re-derives row sections from the prefix's [Y_SEP] count,
    // which equals the hypothesis's section bookkeeping.
    return model_.next_token_log_probs(encoder_, src_sections_, prefix, section_offset_, mode_);
  }

 private:
  const model::Transformer<T>& model_;
  const model::EncoderState<T>& encoder_;
  std::span<const int> src_sections_;
  int section_offset_;
  model::CrossAttentionMode mode_;
};

// K = N (or N - 1 when the first section carries no summary), at least 1.
struct RequiredHeadings {
  int count = 1;
  bool clamped = false;
};

inline RequiredHeadings required_headings(std::size_t section_count,
                                          bool first_section_has_summary) {
  const int k = static_cast<int>(section_count) - (first_section_has_summary ? 0 : 1);
  return k >= 1 ? RequiredHeadings{k, false} : RequiredHeadings{1, true};
}

}  // namespace segsum::decoding
