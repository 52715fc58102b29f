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

#include "segsum/corpus/document.hpp"
#include "segsum/numerics/random.hpp"

namespace segsum::corpus {

// Summarized sections of a corpus, used to rebuild its documents from
// sections drawn across the whole corpus.
class SectionPool {
 public:
  struct Section {
    std::vector<TokenList> paragraphs;
    TokenList summary;
  };

  explicit SectionPool(const std::vector<Document>& docs) {
    for (const auto& doc : docs) {
      std::size_t start = 0;
      for (std::size_t s = 0; s < doc.section_count(); ++s) {
        const std::size_t end = s < doc.gold_boundaries.size()
                                    ? static_cast<std::size_t>(doc.gold_boundaries[s])
                                    : doc.paragraph_count();
        const std::size_t summary = doc.first_section_has_summary ? s : s - 1;
        if (doc.first_section_has_summary || s > 0) {
          sections_.push_back({{doc.paragraphs.begin() + static_cast<std::ptrdiff_t>(start),
                                doc.paragraphs.begin() + static_cast<std::ptrdiff_t>(end)},
                               doc.gold_summaries[summary]});
        }
        start = end;
      }
    }
  }

  std::size_t size() const { return sections_.size(); }

  // A document with the section count of `like` whose summarized sections
  // are drawn uniformly from the pool, with distinct summaries where the
  // pool allows. An unsummarized first section is kept in place.
  Document draw(const Document& like, numerics::Rng& rng) const {
    if (sections_.empty()) return like;
    Document out;
    out.id = like.id;
    out.first_section_has_summary = like.first_section_has_summary;
    if (!like.first_section_has_summary) {
      const std::size_t end = like.gold_boundaries.empty()
                                  ? like.paragraph_count()
                                  : static_cast<std::size_t>(like.gold_boundaries.front());
      out.paragraphs.assign(like.paragraphs.begin(),
                            like.paragraphs.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::vector<std::size_t> chosen;
    for (std::size_t n = like.expected_summary_count(); chosen.size() < n;) {
      std::size_t pick = 0;
      for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        pick = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(size()) - 1));
        bool repeated = false;
        for (std::size_t c : chosen) repeated = repeated || sections_[c].summary == sections_[pick].summary;
        if (!repeated) break;
      }
      chosen.push_back(pick);
    }
    for (std::size_t c : chosen) {
      if (!out.paragraphs.empty()) out.gold_boundaries.push_back(static_cast<int>(out.paragraphs.size()));
      out.paragraphs.insert(out.paragraphs.end(), sections_[c].paragraphs.begin(),
                            sections_[c].paragraphs.end());
      out.gold_summaries.push_back(sections_[c].summary);
    }
    return out;
  }

  std::vector<Document> draw_all(const std::vector<Document>& docs, numerics::Rng& rng) const {
    std::vector<Document> out;
    out.reserve(docs.size());
    for (const auto& doc : docs) out.push_back(draw(doc, rng));
    return out;
  }

 private:
  static constexpr int kMaxAttempts = 64;
  std::vector<Section> sections_;
};

}  // namespace segsum::corpus
