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
#include <array>
#include <charconv>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "segsum/corpus/document.hpp"

namespace segsum::corpus {

// Reserved ids, fixed across save/load.
inline constexpr int kPad = 0;
inline constexpr int kBos = 1;
inline constexpr int kEos = 2;
inline constexpr int kXSep = 3;
inline constexpr int kYSep = 4;
inline constexpr int kUnk = 5;
inline constexpr int kReservedCount = 6;

inline constexpr std::array<std::string_view, kReservedCount> kReservedTokens = {
    "[PAD]", "[BOS]", "[EOS]", "[X_SEP]", "[Y_SEP]", "[UNK]"};

inline bool is_special(int id) { return id >= 0 && id < kReservedCount; }

class Vocabulary {
 public:
  Vocabulary() {
    for (std::string_view token : kReservedTokens) append(std::string(token));
  }

  // Tokens seen at least `min_freq` times, most frequent first; equal
  // frequencies order lexicographically.
  static Vocabulary build(const std::vector<Document>& corpus, std::size_t min_freq = 1) {
    std::map<std::string, std::size_t> counts;
    for (const auto& doc : corpus) {
      for (const auto& para : doc.paragraphs) {
        for (const auto& t : para) ++counts[t];
      }
      for (const auto& summary : doc.gold_summaries) {
        for (const auto& t : summary) ++counts[t];
      }
    }
    std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary vocab;
    for (const auto& [token, count] : ranked) {
      if (count < min_freq) continue;
      if (vocab.contains(token)) continue;
      vocab.append(token);
    }
    return vocab;
  }

  std::size_t size() const { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  int id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw DataError("vocabulary: id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::vector<int> encode(const TokenList& tokens) const {
    std::vector<int> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
  }

  TokenList decode(const std::vector<int>& ids) const {
    TokenList out;
    for (int i : ids) out.push_back(token(i));
    return out;
  }

  // One `token<TAB>id` line per entry, reserved block first.
  std::string serialize() const {
    std::string out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      out += tokens_[i];
      out += '\t';
      out += std::to_string(i);
      out += '\n';
    }
    return out;
  }

  static Vocabulary parse(std::string_view text) {
    Vocabulary vocab;
    vocab.tokens_.clear();
    vocab.ids_.clear();
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
      std::size_t end = text.find('\n', start);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(start, end - start);
      start = end + 1;
      ++line_no;
      if (line.empty()) continue;
      const std::size_t tab = line.rfind('\t');
      if (tab == std::string_view::npos) {
        throw DataError("vocabulary line " + std::to_string(line_no) + ": missing tab");
      }
      std::string token(line.substr(0, tab));
      std::string_view id_text = line.substr(tab + 1);
      int id = -1;
      auto [ptr, ec] = std::from_chars(id_text.data(), id_text.data() + id_text.size(), id);
      if (ec != std::errc() || ptr != id_text.data() + id_text.size()) {
        throw DataError("vocabulary line " + std::to_string(line_no) + ": bad id");
      }
      if (static_cast<std::size_t>(id) != vocab.tokens_.size()) {
        throw DataError("vocabulary line " + std::to_string(line_no) +
                        ": ids must be consecutive from 0");
      }
      if (vocab.contains(token)) {
        throw DataError("vocabulary line " + std::to_string(line_no) + ": duplicate token");
      }
      vocab.append(token);
    }
    for (int i = 0; i < kReservedCount; ++i) {
      if (static_cast<std::size_t>(i) >= vocab.size() ||
          vocab.tokens_[static_cast<std::size_t>(i)] != kReservedTokens[static_cast<std::size_t>(i)]) {
        throw DataError("vocabulary: reserved block missing or reordered");
      }
    }
    return vocab;
  }

  void save(const std::filesystem::path& path) const { atomic_write_file(path, serialize()); }
  static Vocabulary load(const std::filesystem::path& path) { return parse(read_file(path)); }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void append(std::string token) {
    ids_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(std::move(token));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

inline Vocabulary build_vocab(const std::vector<Document>& corpus, std::size_t min_freq = 1) {
  return Vocabulary::build(corpus, min_freq);
}

}  // namespace segsum::corpus
