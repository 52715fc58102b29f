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

#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "segsum/decoding.hpp"
#include "test_util.hpp"

namespace segsum::decoding {
namespace {

using corpus::kBos;
using corpus::kEos;
using corpus::kYSep;

// Pseudo-random next-token distribution that depends only on the prefix.
class TableScorer {
 public:
  TableScorer(std::size_t vocab, std::uint64_t seed, double spread = 2.0)
      : vocab_(vocab), seed_(seed), spread_(spread) {}

  std::vector<double> operator()(std::span<const int> prefix, int /*section*/) const {
    std::uint64_t h = 1469598103934665603ULL ^ seed_;
    for (int id : prefix) h = (h ^ static_cast<std::uint64_t>(id + 1)) * 1099511628211ULL;
    numerics::Rng rng(h);
    std::vector<double> z(vocab_);
    for (double& v : z) v = rng.normal(0.0, spread_);
    double peak = *std::max_element(z.begin(), z.end());
    double denom = 0;
    for (double v : z) denom += std::exp(v - peak);
    for (double& v : z) v = v - peak - std::log(denom);
    return z;
  }

 private:
  std::size_t vocab_;
  std::uint64_t seed_;
  double spread_;
};

// Greedy decoding with the same constraint masking, written independently.
std::vector<int> greedy_oracle(const TableScorer& scorer, int k, std::size_t max_len) {
  std::vector<int> prefix = {kBos};
  int ysep = 0;
  for (std::size_t step = 0; step < max_len; ++step) {
    const auto lp = scorer(prefix, 0);
    int best = -1;
    for (std::size_t v = 0; v < lp.size(); ++v) {
      const double c = constrained_log_prob(static_cast<int>(v), lp[v], ysep, k);
      if (c == kNegInf) continue;
      if (best < 0 || c > constrained_log_prob(best, lp[best], ysep, k)) best = static_cast<int>(v);
    }
    prefix.push_back(best);
    if (best == kYSep) ++ysep;
    if (best == kEos) break;
  }
  return {prefix.begin() + 1, prefix.end()};
}

struct Exhaustive {
  double score = kNegInf;
  std::vector<int> tokens;  // with [BOS]
};

// Enumerates every sequence that ends in an admissible [EOS] within max_len.
void enumerate(const TableScorer& scorer, int k, std::size_t max_len, double alpha,
               std::vector<int>& prefix, double log_prob, int ysep, Exhaustive& best) {
  if (prefix.size() - 1 == max_len) return;
  const auto lp = scorer(prefix, 0);
  for (std::size_t v = 0; v < lp.size(); ++v) {
    const int token = static_cast<int>(v);
    const double c = constrained_log_prob(token, lp[v], ysep, k);
    if (c == kNegInf) continue;
    prefix.push_back(token);
    if (token == kEos) {
      const double score = (log_prob + c) / length_penalty(prefix.size() - 1, alpha);
      if (best.tokens.empty() || detail::better(score, prefix, best.score, best.tokens)) {
        best.score = score;
        best.tokens = prefix;
      }
    } else {
      enumerate(scorer, k, max_len, alpha, prefix, log_prob + c, ysep + (token == kYSep),
                best);
    }
    prefix.pop_back();
  }
}

TEST(LengthPenalty, ClosedForms) {
  EXPECT_DOUBLE_EQ(length_penalty(1, 0.7), 1.0);
  EXPECT_DOUBLE_EQ(length_penalty(17, 0.0), 1.0);
  EXPECT_NEAR(length_penalty(5, 1.0), 10.0 / 6.0, 1e-15);
}

TEST(BeamSearch, TwoHeadingsMeansExactlyOneSeparator) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TableScorer scorer(10, seed);
    const auto result = beam_search(scorer, {2, 1}, {5, 0.8, 12});
    if (!result.degenerate) {
      EXPECT_EQ(std::count(result.tokens.begin(), result.tokens.end(), kYSep), 1);
      EXPECT_EQ(result.tokens.back(), kEos);
    }
    EXPECT_EQ(result.headings.size(), 2u);
  }
}

TEST(BeamSearch, HeadingCountAlwaysMatchesConstraint) {
  numerics::Rng rng(17);
  for (std::uint64_t trial = 0; trial < 500; ++trial) {
    const int k = static_cast<int>(rng.uniform_int(1, 4));
    const std::size_t max_len = rng.uniform_int(1, 10);
    const TableScorer scorer(9, trial);
    BeamOptions options{static_cast<std::size_t>(rng.uniform_int(1, 6)), 0.8, max_len};
    const auto result = beam_search(scorer, {k, 1}, options);
    EXPECT_EQ(static_cast<int>(result.headings.size()), k);
    EXPECT_LE(std::count(result.tokens.begin(), result.tokens.end(), kYSep), k - 1);
    EXPECT_LE(result.tokens.size(), max_len);
  }
}

TEST(BeamSearch, WidthOneEqualsGreedy) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const TableScorer scorer(9, seed);
    const int k = 1 + static_cast<int>(seed % 3);
    const auto result = beam_search(scorer, {k, 1}, {1, 0.8, 8});
    EXPECT_EQ(result.tokens, greedy_oracle(scorer, k, 8)) << "seed " << seed;
  }
}

TEST(BeamSearch, FullWidthEqualsExhaustiveSearch) {
  // Three ordinary tokens after the reserved block; [UNK] is also admissible.
  for (std::uint64_t seed = 0; seed < 120; ++seed) {
    for (std::size_t max_len : {4u, 5u}) {
      const int k = 1 + static_cast<int>(seed % 3);
      const double alpha = 0.6 + 0.1 * static_cast<double>(seed % 5);
      const TableScorer scorer(corpus::kReservedCount + 3, seed, 1.0);
      Exhaustive best;
      std::vector<int> prefix = {kBos};
      enumerate(scorer, k, max_len, alpha, prefix, 0.0, 0, best);
      const auto result = beam_search(scorer, {k, 1}, {100000, alpha, max_len});
      ASSERT_FALSE(best.tokens.empty());
      EXPECT_FALSE(result.degenerate);
      EXPECT_EQ(result.tokens, std::vector<int>(best.tokens.begin() + 1, best.tokens.end()))
          << "seed " << seed << " max_len " << max_len;
      EXPECT_NEAR(result.score, best.score, 1e-12);
    }
  }
}

TEST(BeamSearch, LogProbNeverIncreasesAlongHypothesis) {
  const TableScorer scorer(9, 3);
  const auto result = beam_search(scorer, {3, 1}, {4, 0.8, 12});
  std::vector<int> prefix = {kBos};
  double running = 0;
  int ysep = 0;
  for (int token : result.tokens) {
    const double step = constrained_log_prob(token, scorer(prefix, 0)[token], ysep, 3);
    ASSERT_LE(step, 0.0);
    const double next = running + step;
    EXPECT_LE(next, running);
    running = next;
    prefix.push_back(token);
    ysep += token == kYSep;
  }
  EXPECT_NEAR(running, result.log_prob, 1e-12);
}

TEST(BeamSearch, MaxLenReachedGivesPaddedDegenerateResult) {
  const TableScorer scorer(9, 4);
  const auto result = beam_search(scorer, {4, 1}, {3, 0.8, 2});
  EXPECT_TRUE(result.degenerate);
  EXPECT_EQ(result.headings.size(), 4u);
}

TEST(BeamSearch, InvalidWidthIsAnError) {
  const TableScorer scorer(9, 0);
  EXPECT_THROW(beam_search(scorer, {1, 1}, {0, 0.8, 5}), UsageError);
}

TEST(BeamSearch, SectionTracksSeparatorCount) {
  // The scorer records the section it is asked about for each prefix.
  const TableScorer inner(9, 5);
  bool consistent = true;
  auto scorer = [&](std::span<const int> prefix, int section) {
    const int expected = 2 + static_cast<int>(std::count(prefix.begin(), prefix.end(), kYSep));
    consistent = consistent && section == expected;
    return inner(prefix, section);
  };
  beam_search(scorer, {3, 2}, {3, 0.8, 10});
  EXPECT_TRUE(consistent);
}

TEST(SplitHeadings, SplitsOnSeparatorAndPads) {
  const std::vector<int> tokens = {7, 8, kYSep, 9, kEos};
  EXPECT_EQ(split_headings(tokens, 2), (std::vector<std::vector<int>>{{7, 8}, {9}}));
  EXPECT_EQ(split_headings(tokens, 3), (std::vector<std::vector<int>>{{7, 8}, {9}, {}}));
}

TEST(RequiredHeadings, FollowsSummaryFlagAndClamps) {
  EXPECT_EQ(required_headings(3, true).count, 3);
  EXPECT_EQ(required_headings(3, false).count, 2);
  const auto clamped = required_headings(1, false);
  EXPECT_EQ(clamped.count, 1);
  EXPECT_TRUE(clamped.clamped);
}

TEST(ModelScorer, DecodesWithRealModel) {
  const auto docs = corpus::synth_generate(testing::small_synth(5, 2));
  const auto vocab = corpus::build_vocab(docs, 1);
  model::Transformer<double> model(testing::tiny_config(vocab.size(), 1), 3);
  const auto ex = corpus::encode_document(docs[0], vocab, 64, 24);
  const auto pred = model.forward_infer_sections(ex.src_ids, ex.xsep_positions);
  const int k = required_headings(pred.section_count, true).count;
  ModelScorer<double> scorer(model, pred.encoder, pred.src_section_of_token, 1);
  const auto result = beam_search(scorer, {k, 1}, {3, 0.8, 20});
  EXPECT_EQ(static_cast<int>(result.headings.size()), k);
}

}  // namespace
}  // namespace segsum::decoding
