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
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "segsum/corpus/document.hpp"
#include "segsum/numerics/random.hpp"

namespace segsum::corpus {

struct IntRange {
  int lo = 1;
  int hi = 1;

  bool valid() const { return lo >= 1 && lo <= hi; }
};

struct SynthOptions {
  std::size_t n_docs = 500;
  std::size_t n_topics = 50;
  std::size_t vocab_per_topic = 8;
  std::size_t filler_count = 20;
  IntRange sections{2, 4};
  IntRange paras_per_section{1, 3};
  IntRange para_len{4, 8};
  double topic_token_rate = 0.9;
  std::uint64_t seed = 7;
};

inline std::string topic_token(std::size_t topic, std::size_t index) {
  return "t" + std::to_string(topic) + "w" + std::to_string(index);
}

inline std::string filler_token(std::size_t index) { return "f" + std::to_string(index); }

// Heading of every section drawn from `topic`: its first 2-4 vocabulary words.
inline TokenList topic_key_phrase(std::size_t topic, std::size_t vocab_per_topic) {
  const std::size_t length = std::min<std::size_t>(2 + topic % 3, vocab_per_topic);
  TokenList phrase;
  for (std::size_t i = 0; i < length; ++i) phrase.push_back(topic_token(topic, i));
  return phrase;
}

inline void check_synth_options(const SynthOptions& options) {
  if (!options.sections.valid() || !options.paras_per_section.valid() ||
      !options.para_len.valid()) {
    throw DataError("synth: ranges must satisfy 1 <= lo <= hi");
  }
  if (options.n_topics < static_cast<std::size_t>(options.sections.hi)) {
    throw DataError("synth: n_topics (" + std::to_string(options.n_topics) +
                    ") below the largest section count (" +
                    std::to_string(options.sections.hi) + ")");
  }
  if (options.vocab_per_topic < 2) throw DataError("synth: vocab_per_topic must be >= 2");
  if (options.filler_count < 1) throw DataError("synth: filler_count must be >= 1");
}

// Documents whose sections draw distinct topics from `topic_pool` (all
// topics when empty). Pure function of the options.
inline std::vector<Document> synth_generate(const SynthOptions& options,
                                            std::vector<std::size_t> topic_pool = {}) {
  check_synth_options(options);
  if (topic_pool.empty()) {
    topic_pool.resize(options.n_topics);
    std::iota(topic_pool.begin(), topic_pool.end(), std::size_t{0});
  }
  if (topic_pool.size() < static_cast<std::size_t>(options.sections.hi)) {
    throw DataError("synth: topic pool smaller than the largest section count");
  }
  numerics::Rng rng(options.seed);
  std::vector<Document> docs;
  docs.reserve(options.n_docs);
  for (std::size_t d = 0; d < options.n_docs; ++d) {
    Document doc;
    doc.id = "synth-" + std::to_string(options.seed) + "-" + std::to_string(d);
    doc.first_section_has_summary = true;
    const auto n_sections = static_cast<std::size_t>(
        rng.uniform_int(options.sections.lo, options.sections.hi));
    std::vector<std::size_t> pool = topic_pool;
    rng.shuffle(pool);
    for (std::size_t s = 0; s < n_sections; ++s) {
      const std::size_t topic = pool[s];
      const auto n_paras = rng.uniform_int(options.paras_per_section.lo,
                                           options.paras_per_section.hi);
      for (std::int64_t p = 0; p < n_paras; ++p) {
        const auto length = rng.uniform_int(options.para_len.lo, options.para_len.hi);
        TokenList para;
        for (std::int64_t t = 0; t < length; ++t) {
          if (rng.bernoulli(options.topic_token_rate)) {
            para.push_back(topic_token(
                topic, static_cast<std::size_t>(rng.uniform_int(
                           0, static_cast<std::int64_t>(options.vocab_per_topic) - 1))));
          } else {
            para.push_back(filler_token(static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(options.filler_count) - 1))));
          }
        }
        doc.paragraphs.push_back(std::move(para));
      }
      if (s + 1 < n_sections) doc.gold_boundaries.push_back(static_cast<int>(doc.paragraphs.size()));
      doc.gold_summaries.push_back(topic_key_phrase(topic, options.vocab_per_topic));
    }
    docs.push_back(std::move(doc));
  }
  return docs;
}

}  // namespace segsum::corpus
