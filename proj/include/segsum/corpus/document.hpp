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
#include <cctype>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "segsum/error.hpp"
#include "segsum/io.hpp"

namespace segsum::corpus {

using TokenList = std::vector<std::string>;

// A multi-paragraph document with its gold sectioning. Boundary b means
// the section that contains paragraph b (1-based) ends after it.
struct Document {
  std::string id;
  std::vector<TokenList> paragraphs;
  std::vector<int> gold_boundaries;
  std::vector<TokenList> gold_summaries;
  bool first_section_has_summary = false;

  std::size_t paragraph_count() const { return paragraphs.size(); }
  std::size_t section_count() const { return gold_boundaries.size() + 1; }
  std::size_t expected_summary_count() const {
    return first_section_has_summary ? section_count() : section_count() - 1;
  }

  bool operator==(const Document&) const = default;
};

inline std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

// Lowercase whitespace tokenization.
inline TokenList tokenize(std::string_view text) {
  TokenList tokens;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) tokens.push_back(lowercase(token));
  return tokens;
}

// Throws DataError naming the offending field.
inline void validate(const Document& doc) {
  const std::size_t m = doc.paragraphs.size();
  if (m == 0) throw DataError("paragraphs: document has no paragraphs");
  for (std::size_t i = 0; i < m; ++i) {
    if (doc.paragraphs[i].empty()) {
      throw DataError("paragraphs[" + std::to_string(i) + "]: empty paragraph");
    }
  }
  for (std::size_t i = 0; i < doc.gold_boundaries.size(); ++i) {
    const int b = doc.gold_boundaries[i];
    if (i > 0 && b <= doc.gold_boundaries[i - 1]) {
      throw DataError("boundaries: boundaries not ascending");
    }
    if (b < 1 || static_cast<std::size_t>(b) > m - 1) {
      throw DataError("boundaries: value " + std::to_string(b) + " outside [1, " +
                      std::to_string(m - 1) + "]");
    }
  }
  if (doc.gold_summaries.size() != doc.expected_summary_count()) {
    throw DataError("summaries: expected " + std::to_string(doc.expected_summary_count()) +
                    " summaries for " + std::to_string(doc.section_count()) +
                    " sections, found " + std::to_string(doc.gold_summaries.size()));
  }
  for (std::size_t i = 0; i < doc.gold_summaries.size(); ++i) {
    if (doc.gold_summaries[i].empty()) {
      throw DataError("summaries[" + std::to_string(i) + "]: empty summary");
    }
  }
}

namespace detail {

inline TokenList parse_text(const nlohmann::json& value, const std::string& field) {
  if (value.is_string()) return tokenize(value.get<std::string>());
  if (value.is_array()) {
    TokenList tokens;
    for (const auto& item : value) {
      if (!item.is_string()) throw DataError(field + ": tokens must be strings");
      for (auto& t : tokenize(item.get<std::string>())) tokens.push_back(std::move(t));
    }
    return tokens;
  }
  throw DataError(field + ": expected a string or a list of tokens");
}

inline std::vector<TokenList> parse_text_list(const nlohmann::json& value,
                                              const std::string& field) {
  if (!value.is_array()) throw DataError(field + ": expected a list");
  std::vector<TokenList> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(parse_text(value[i], field + "[" + std::to_string(i) + "]"));
  }
  return out;
}

}  // namespace detail

// Unlabeled records (no boundaries or summaries) are accepted when
// `require_labels` is false; they load as single-section documents. A set
// `summary_flag` replaces the record's first_section_has_summary.
inline Document document_from_json(const nlohmann::json& record, bool require_labels = true,
                                   std::optional<bool> summary_flag = std::nullopt) {
  if (!record.is_object()) throw DataError("record: expected a JSON object");
  Document doc;
  if (record.contains("id")) {
    const auto& id = record["id"];
    doc.id = id.is_string() ? id.get<std::string>() : id.dump();
  }
  if (!record.contains("paragraphs")) throw DataError("paragraphs: missing field");
  doc.paragraphs = detail::parse_text_list(record["paragraphs"], "paragraphs");
  if (record.contains("first_section_has_summary")) {
    const auto& flag = record["first_section_has_summary"];
    if (!flag.is_boolean()) throw DataError("first_section_has_summary: expected a boolean");
    doc.first_section_has_summary = flag.get<bool>();
  }
  if (summary_flag) doc.first_section_has_summary = *summary_flag;
  const bool has_labels = record.contains("boundaries") || record.contains("summaries");
  if (require_labels || has_labels) {
    if (!record.contains("boundaries")) throw DataError("boundaries: missing field");
    if (!record.contains("summaries")) throw DataError("summaries: missing field");
    const auto& boundaries = record["boundaries"];
    if (!boundaries.is_array()) throw DataError("boundaries: expected a list");
    for (const auto& b : boundaries) {
      if (!b.is_number_integer()) throw DataError("boundaries: expected integers");
      doc.gold_boundaries.push_back(b.get<int>());
    }
    doc.gold_summaries = detail::parse_text_list(record["summaries"], "summaries");
    validate(doc);
  } else {
    if (doc.paragraphs.empty()) throw DataError("paragraphs: document has no paragraphs");
    for (std::size_t i = 0; i < doc.paragraphs.size(); ++i) {
      if (doc.paragraphs[i].empty()) {
        throw DataError("paragraphs[" + std::to_string(i) + "]: empty paragraph");
      }
    }
  }
  return doc;
}

inline nlohmann::json document_to_json(const Document& doc) {
  nlohmann::json record = nlohmann::json::object();
  if (!doc.id.empty()) record["id"] = doc.id;
  record["paragraphs"] = doc.paragraphs;
  record["boundaries"] = doc.gold_boundaries;
  record["summaries"] = doc.gold_summaries;
  record["first_section_has_summary"] = doc.first_section_has_summary;
  return record;
}

inline std::vector<Document> parse_jsonl(std::string_view text, bool require_labels = true,
                                         std::optional<bool> summary_flag = std::nullopt) {
  std::vector<Document> docs;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    ++line_no;
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": malformed JSON (" + e.what() + ")");
    }
    try {
      docs.push_back(document_from_json(record, require_labels, summary_flag));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (end == text.size()) break;
  }
  return docs;
}

inline std::vector<Document> load_jsonl(const std::filesystem::path& path,
                                        bool require_labels = true,
                                        std::optional<bool> summary_flag = std::nullopt) {
  if (!std::filesystem::exists(path)) {
    throw DataError("corpus file '" + path.string() + "' does not exist");
  }
  return parse_jsonl(read_file(path), require_labels, summary_flag);
}

inline std::string to_jsonl(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& doc : docs) {
    out += document_to_json(doc).dump();
    out += '\n';
  }
  return out;
}

inline void save_jsonl(const std::filesystem::path& path, const std::vector<Document>& docs) {
  atomic_write_file(path, to_jsonl(docs));
}

}  // namespace segsum::corpus
