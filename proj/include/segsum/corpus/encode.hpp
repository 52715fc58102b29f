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
#include <span>
#include <string>
#include <vector>

#include "segsum/corpus/document.hpp"
#include "segsum/corpus/vocabulary.hpp"

namespace segsum::corpus {

// Flat model input for one document. Section ids are 1-based.
struct EncodedExample {
  std::vector<int> src_ids;
  std::vector<int> xsep_positions;
  std::vector<int> src_section_of_token;
  std::vector<int> boundary_labels;
  std::vector<int> tgt_ids;
  std::vector<int> tgt_section_of_token;

  std::size_t paragraph_count = 0;
  std::size_t section_count = 0;
  std::size_t summary_count = 0;
  bool first_section_has_summary = true;
  bool truncated = false;

  // Section that the first summary describes.
  int section_offset() const { return first_section_has_summary ? 1 : 2; }
};

// Per-token section ids for `src_len` tokens given the [X_SEP] positions
// and one break decision per separator. Separators stay in the section of
// the paragraph they terminate.
inline std::vector<int> section_map_from_decisions(std::size_t src_len,
                                                   std::span<const int> xsep_positions,
                                                   std::span<const int> decisions) {
  if (xsep_positions.size() != decisions.size()) {
    throw DataError("section map: " + std::to_string(decisions.size()) + " decisions for " +
                    std::to_string(xsep_positions.size()) + " separators");
  }
  std::vector<int> sections(src_len, 1);
  int current = 1;
  std::size_t next_sep = 0;
  for (std::size_t i = 0; i < src_len; ++i) {
    sections[i] = current;
    if (next_sep < xsep_positions.size() &&
        static_cast<std::size_t>(xsep_positions[next_sep]) == i) {
      if (decisions[next_sep]) ++current;
      ++next_sep;
    }
  }
  return sections;
}

// Target section ids: the first summary's section plus the number of
// [Y_SEP] tokens strictly earlier in the sequence.
inline std::vector<int> target_sections(std::span<const int> tgt_ids, int section_offset) {
  std::vector<int> sections;
  sections.reserve(tgt_ids.size());
  int current = section_offset;
  for (int id : tgt_ids) {
    sections.push_back(current);
    if (id == kYSep) ++current;
  }
  return sections;
}

namespace detail {

inline std::size_t source_length(const Document& doc, std::size_t n_paras) {
  std::size_t len = 0;
  for (std::size_t p = 0; p < n_paras; ++p) len += doc.paragraphs[p].size();
  return len + (n_paras ? n_paras - 1 : 0);
}

// Summaries that survive when only the first `n_sections` sections remain.
inline std::size_t kept_summaries(const Document& doc, std::size_t n_sections) {
  return doc.first_section_has_summary ? n_sections : n_sections - 1;
}

inline std::size_t target_length(const Document& doc, std::size_t n_summaries) {
  std::size_t len = 2;  // [BOS] ... [EOS]
  for (std::size_t s = 0; s < n_summaries; ++s) len += doc.gold_summaries[s].size();
  return len + (n_summaries ? n_summaries - 1 : 0);
}

}  // namespace detail

// Truncation is paragraph-granular: whole paragraphs are dropped from the end
// until the source fits, then whole trailing sections until the target fits.
inline EncodedExample encode_document(const Document& doc, const Vocabulary& vocab,
                                      std::size_t max_src_len, std::size_t max_tgt_len) {
  validate(doc);
  std::size_t n_paras = doc.paragraphs.size();
  while (n_paras > 0 && detail::source_length(doc, n_paras) > max_src_len) --n_paras;
  if (n_paras == 0) {
    throw DataError("encode: first paragraph (" + std::to_string(doc.paragraphs[0].size()) +
                    " tokens) exceeds max_src_len " + std::to_string(max_src_len));
  }
  auto boundaries_below = [&](std::size_t paras) {
    std::vector<int> kept;
    for (int b : doc.gold_boundaries) {
      if (static_cast<std::size_t>(b) < paras) kept.push_back(b);
    }
    return kept;
  };
  std::vector<int> boundaries = boundaries_below(n_paras);
  while (detail::target_length(doc, detail::kept_summaries(doc, boundaries.size() + 1)) >
         max_tgt_len) {
    if (boundaries.empty()) {
      throw DataError("encode: first section's summary exceeds max_tgt_len " +
                      std::to_string(max_tgt_len));
    }
    n_paras = static_cast<std::size_t>(boundaries.back());
    boundaries.pop_back();
  }

  EncodedExample ex;
  ex.paragraph_count = n_paras;
  ex.section_count = boundaries.size() + 1;
  ex.summary_count = detail::kept_summaries(doc, ex.section_count);
  ex.first_section_has_summary = doc.first_section_has_summary;
  ex.truncated = n_paras < doc.paragraphs.size();

  std::size_t next_boundary = 0;
  int section = 1;
  for (std::size_t p = 0; p < n_paras; ++p) {
    for (const auto& token : doc.paragraphs[p]) {
      ex.src_ids.push_back(vocab.id(token));
      ex.src_section_of_token.push_back(section);
    }
    if (p + 1 < n_paras) {
      ex.xsep_positions.push_back(static_cast<int>(ex.src_ids.size()));
      ex.src_ids.push_back(kXSep);
      ex.src_section_of_token.push_back(section);
      const bool is_break = next_boundary < boundaries.size() &&
                            static_cast<std::size_t>(boundaries[next_boundary]) == p + 1;
      ex.boundary_labels.push_back(is_break ? 1 : 0);
      if (is_break) {
        ++next_boundary;
        ++section;
      }
    }
  }

  ex.tgt_ids.push_back(kBos);
  for (std::size_t s = 0; s < ex.summary_count; ++s) {
    if (s) ex.tgt_ids.push_back(kYSep);
    for (const auto& token : doc.gold_summaries[s]) ex.tgt_ids.push_back(vocab.id(token));
  }
  ex.tgt_ids.push_back(kEos);
  ex.tgt_section_of_token = target_sections(ex.tgt_ids, ex.section_offset());
  return ex;
}

// Source side only, for inference on documents without labels. Trailing
// paragraphs are dropped until the source fits; the target is empty.
inline EncodedExample encode_source(const Document& doc, const Vocabulary& vocab,
                                    std::size_t max_src_len) {
  Document source;
  source.id = doc.id;
  source.paragraphs = doc.paragraphs;
  source.first_section_has_summary = false;
  validate(source);
  std::size_t n_paras = source.paragraphs.size();
  while (n_paras > 0 && detail::source_length(source, n_paras) > max_src_len) --n_paras;
  if (n_paras == 0) {
    throw DataError("encode: first paragraph (" + std::to_string(doc.paragraphs[0].size()) +
                    " tokens) exceeds max_src_len " + std::to_string(max_src_len));
  }
  EncodedExample ex;
  ex.paragraph_count = n_paras;
  ex.first_section_has_summary = doc.first_section_has_summary;
  ex.truncated = n_paras < doc.paragraphs.size();
  for (std::size_t p = 0; p < n_paras; ++p) {
    for (const auto& token : doc.paragraphs[p]) {
      ex.src_ids.push_back(vocab.id(token));
      ex.src_section_of_token.push_back(1);
    }
    if (p + 1 < n_paras) {
      ex.xsep_positions.push_back(static_cast<int>(ex.src_ids.size()));
      ex.src_ids.push_back(kXSep);
      ex.src_section_of_token.push_back(1);
      ex.boundary_labels.push_back(0);
    }
  }
  return ex;
}

}  // namespace segsum::corpus
