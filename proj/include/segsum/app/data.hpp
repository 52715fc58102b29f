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

#include <array>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "segsum/corpus/document.hpp"
#include "segsum/corpus/synthetic.hpp"
#include "segsum/error.hpp"
#include "segsum/numerics/random.hpp"

namespace segsum::app {

enum class SplitPolicy {
  // Train, valid and test draw their sections from disjoint topic sets, so
  // no heading key-phrase appears in more than one split.
  kDisjointTopics,
  // All splits share the topic inventory.
  kSharedTopics,
};

inline SplitPolicy parse_split_policy(const std::string& name) {
  if (name == "disjoint-topics") return SplitPolicy::kDisjointTopics;
  if (name == "shared-topics") return SplitPolicy::kSharedTopics;
  throw UsageError("unknown split policy '" + name +
                   "' (options: disjoint-topics, shared-topics)");
}

inline const char* split_policy_name(SplitPolicy policy) {
  return policy == SplitPolicy::kDisjointTopics ? "disjoint-topics" : "shared-topics";
}

// 80/10/10 of `n` documents (or topics), test taking the remainder.
inline std::array<std::size_t, 3> split_sizes(std::size_t n) {
  const std::size_t train = n * 8 / 10, valid = n / 10;
  return {train, valid, n - train - valid};
}

inline constexpr std::array<const char*, 3> kSplitNames = {"train", "valid", "test"};

struct SplitCorpus {
  std::array<std::vector<corpus::Document>, 3> splits;
};

inline SplitCorpus generate_splits(const corpus::SynthOptions& options, SplitPolicy policy) {
  corpus::check_synth_options(options);
  SplitCorpus out;
  const auto doc_sizes = split_sizes(options.n_docs);
  if (policy == SplitPolicy::kSharedTopics) {
    auto docs = corpus::synth_generate(options);
    std::size_t begin = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      out.splits[s].assign(docs.begin() + static_cast<std::ptrdiff_t>(begin),
                           docs.begin() + static_cast<std::ptrdiff_t>(begin + doc_sizes[s]));
      begin += doc_sizes[s];
    }
    return out;
  }
  std::vector<std::size_t> topics(options.n_topics);
  std::iota(topics.begin(), topics.end(), std::size_t{0});
  numerics::Rng rng(options.seed);
  rng.shuffle(topics);
  const auto topic_sizes = split_sizes(options.n_topics);
  std::size_t begin = 0;
  for (std::size_t s = 0; s < 3; ++s) {
    std::vector<std::size_t> pool(topics.begin() + static_cast<std::ptrdiff_t>(begin),
                                  topics.begin() + static_cast<std::ptrdiff_t>(begin + topic_sizes[s]));
    begin += topic_sizes[s];
    if (pool.size() < static_cast<std::size_t>(options.sections.hi)) {
      throw DataError(std::string("generate-data: ") + kSplitNames[s] + " split gets " +
                      std::to_string(pool.size()) + " topics, fewer than the largest section count " +
                      std::to_string(options.sections.hi));
    }
    corpus::SynthOptions split_options = options;
    split_options.n_docs = doc_sizes[s];
    split_options.seed = options.seed + 1 + s;
    out.splits[s] = corpus::synth_generate(split_options, std::move(pool));
  }
  return out;
}

inline std::array<std::filesystem::path, 3> write_splits(const SplitCorpus& corpus,
                                                         const std::filesystem::path& dir) {
  std::array<std::filesystem::path, 3> paths;
  for (std::size_t s = 0; s < 3; ++s) {
    paths[s] = dir / (std::string(kSplitNames[s]) + ".jsonl");
    corpus::save_jsonl(paths[s], corpus.splits[s]);
  }
  return paths;
}

inline std::vector<corpus::Document> load_split(const std::string& path, const char* what,
                                                std::optional<bool> flag) {
  if (path.empty()) throw UsageError(std::string("no ") + what + " corpus given");
  auto docs = corpus::load_jsonl(path, true, flag);
  if (docs.empty()) throw DataError(std::string(what) + " corpus '" + path + "' is empty");
  return docs;
}

}  // namespace segsum::app
