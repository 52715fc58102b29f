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
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "segsum/corpus/document.hpp"
#include "segsum/error.hpp"

namespace segsum::metrics {

using corpus::TokenList;

// M units with the set of boundaries b in [1, M-1]; boundary b separates
// unit b - 1 from unit b (0-based units).
struct Segmentation {
  std::size_t num_units = 0;
  std::vector<int> boundaries;

  Segmentation() = default;
  Segmentation(std::size_t m, std::vector<int> b) : num_units(m), boundaries(std::move(b)) {
    validate();
  }

  void validate() const {
    for (std::size_t i = 0; i < boundaries.size(); ++i) {
      if (boundaries[i] < 1 || static_cast<std::size_t>(boundaries[i]) >= num_units) {
        throw DataError("segmentation: boundary " + std::to_string(boundaries[i]) +
                        " outside [1, " + std::to_string(num_units) + " - 1]");
      }
      if (i && boundaries[i] <= boundaries[i - 1]) {
        throw DataError("segmentation: boundaries must be strictly ascending");
      }
    }
  }

  std::size_t segment_count() const { return boundaries.size() + 1; }
};

// Half the mean reference segment length, rounded, at least 1.
inline std::size_t default_window(const Segmentation& ref) {
  const double k = static_cast<double>(ref.num_units) / (2.0 * static_cast<double>(ref.segment_count()));
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(k)));
}

namespace detail {

// prefix[u] = number of boundaries b <= u, i.e. the segment index of unit u.
inline std::vector<int> boundary_prefix(const Segmentation& s) {
  std::vector<int> prefix(s.num_units, 0);
  std::size_t next = 0;
  int count = 0;
  for (std::size_t u = 0; u < s.num_units; ++u) {
    while (next < s.boundaries.size() && static_cast<std::size_t>(s.boundaries[next]) <= u) {
      ++count;
      ++next;
    }
    prefix[u] = count;
  }
  return prefix;
}

inline std::size_t check_pair(const Segmentation& ref, const Segmentation& hyp,
                              std::optional<std::size_t> k, const char* name) {
  if (ref.num_units != hyp.num_units) {
    throw DataError(std::string(name) + ": unit counts differ (" + std::to_string(ref.num_units) +
                    " vs " + std::to_string(hyp.num_units) + ")");
  }
  const std::size_t window = k ? *k : default_window(ref);
  if (window < 1) throw DataError(std::string(name) + ": window must be >= 1");
  if (ref.num_units <= window) {
    throw DataError(std::string(name) + ": " + std::to_string(ref.num_units) +
                    " units do not exceed window " + std::to_string(window));
  }
  return window;
}

}  // namespace detail

// Fraction of windows (i, i + k) on which ref and hyp disagree about the two
// ends sharing a segment.
inline double pk(const Segmentation& ref, const Segmentation& hyp,
                 std::optional<std::size_t> k = std::nullopt) {
  const std::size_t window = detail::check_pair(ref, hyp, k, "pk");
  const auto r = detail::boundary_prefix(ref);
  const auto h = detail::boundary_prefix(hyp);
  const std::size_t n = ref.num_units - window;
  std::size_t disagree = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool same_ref = r[i] == r[i + window];
    const bool same_hyp = h[i] == h[i + window];
    if (same_ref != same_hyp) ++disagree;
  }
  return static_cast<double>(disagree) / static_cast<double>(n);
}

// Fraction of windows whose boundary counts in (i, i + k] differ.
inline double windiff(const Segmentation& ref, const Segmentation& hyp,
                      std::optional<std::size_t> k = std::nullopt) {
  const std::size_t window = detail::check_pair(ref, hyp, k, "windiff");
  const auto r = detail::boundary_prefix(ref);
  const auto h = detail::boundary_prefix(hyp);
  const std::size_t n = ref.num_units - window;
  std::size_t differ = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r[i + window] - r[i] != h[i + window] - h[i]) ++differ;
  }
  return static_cast<double>(differ) / static_cast<double>(n);
}

struct PRF {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline PRF make_prf(double overlap, double candidate_total, double reference_total) {
  PRF out;
  if (candidate_total <= 0 || reference_total <= 0) return out;
  out.precision = overlap / candidate_total;
  out.recall = overlap / reference_total;
  if (out.precision + out.recall > 0) {
    out.f1 = 2 * out.precision * out.recall / (out.precision + out.recall);
  }
  return out;
}

// Exact boundary matching. Two empty sets agree perfectly.
inline PRF boundary_prf(const std::vector<int>& ref, const std::vector<int>& hyp) {
  if (ref.empty() && hyp.empty()) return PRF{1, 1, 1};
  const std::set<int> r(ref.begin(), ref.end());
  double hit = 0;
  for (int b : hyp) hit += r.count(b);
  return make_prf(hit, static_cast<double>(hyp.size()), static_cast<double>(ref.size()));
}

// Clipped n-gram overlap.
inline PRF rouge_n(const TokenList& candidate, const TokenList& reference, std::size_t n) {
  if (n < 1) throw UsageError("rouge_n: n must be >= 1");
  auto grams = [n](const TokenList& tokens) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
      ++counts[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)];
    }
    return counts;
  };
  const auto cand = grams(candidate);
  const auto ref = grams(reference);
  double overlap = 0, cand_total = 0, ref_total = 0;
  for (const auto& [g, c] : cand) {
    cand_total += c;
    auto it = ref.find(g);
    if (it != ref.end()) overlap += std::min(c, it->second);
  }
  for (const auto& [g, c] : ref) ref_total += c;
  return make_prf(overlap, cand_total, ref_total);
}

inline std::size_t lcs_length(const TokenList& a, const TokenList& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline PRF rouge_l(const TokenList& candidate, const TokenList& reference) {
  return make_prf(static_cast<double>(lcs_length(candidate, reference)),
                  static_cast<double>(candidate.size()), static_cast<double>(reference.size()));
}

// ---------------------------------------------------------------------------
// Run-level evaluation
// ---------------------------------------------------------------------------

enum class RougeMode { kConcat, kAligned };

inline const char* rouge_mode_name(RougeMode mode) {
  return mode == RougeMode::kConcat ? "concat" : "aligned";
}

inline RougeMode parse_rouge_mode(const std::string& name) {
  if (name == "concat") return RougeMode::kConcat;
  if (name == "aligned") return RougeMode::kAligned;
  throw UsageError("unknown rouge mode '" + name + "' (expected concat or aligned)");
}

struct DocumentPrediction {
  std::string id;
  std::vector<int> boundaries;
  std::vector<TokenList> headings;
  bool degenerate = false;
  bool clamped_heading_count = false;
};

struct DocumentScores {
  std::string id;
  double pk = 0, windiff = 0;
  PRF boundary;
  double rouge1 = 0, rouge2 = 0, rougel = 0;
  bool aligned = false;  // heading-by-heading scoring was used
};

struct MetricsReport {
  std::string setting;  // e.g. "gold-segments"
  RougeMode mode = RougeMode::kConcat;
  std::size_t documents = 0;
  double pk = 0, windiff = 0;
  double boundary_precision = 0, boundary_recall = 0, boundary_f1 = 0;
  double rouge1 = 0, rouge2 = 0, rougel = 0;
  std::size_t degenerate_decodes = 0;
  std::size_t clamped_heading_counts = 0;
  std::vector<DocumentScores> per_document;
  std::map<std::string, double> extra;  // e.g. token accuracy
};

inline TokenList join_headings(const std::vector<TokenList>& headings) {
  TokenList out;
  for (const auto& h : headings) out.insert(out.end(), h.begin(), h.end());
  return out;
}

// Segmentation is scored on every gap, including the unsummarized first
// section. Corpus figures are unweighted document means.
inline MetricsReport evaluate_run(const std::vector<corpus::Document>& gold,
                                  const std::vector<DocumentPrediction>& predictions,
                                  RougeMode mode, const std::string& setting = "") {
  if (predictions.size() != gold.size()) {
    throw DataError("evaluate: " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(gold.size()) + " documents");
  }
  MetricsReport report;
  report.setting = setting;
  report.mode = mode;
  report.documents = gold.size();
  for (std::size_t d = 0; d < gold.size(); ++d) {
    const auto& doc = gold[d];
    const auto& pred = predictions[d];
    if (!pred.id.empty() && !doc.id.empty() && pred.id != doc.id) {
      throw DataError("evaluate: missing prediction for document '" + doc.id + "'");
    }
    DocumentScores s;
    s.id = doc.id;
    const Segmentation ref(doc.paragraph_count(), doc.gold_boundaries);
    const Segmentation hyp(doc.paragraph_count(), pred.boundaries);
    if (doc.paragraph_count() > default_window(ref)) {
      s.pk = pk(ref, hyp);
      s.windiff = windiff(ref, hyp);
    }
    s.boundary = boundary_prf(doc.gold_boundaries, pred.boundaries);

    auto score = [&](const TokenList& cand, const TokenList& refs, double weight) {
      s.rouge1 += weight * rouge_n(cand, refs, 1).f1;
      s.rouge2 += weight * rouge_n(cand, refs, 2).f1;
      s.rougel += weight * rouge_l(cand, refs).f1;
    };
    if (mode == RougeMode::kAligned && pred.headings.size() == doc.gold_summaries.size() &&
        !doc.gold_summaries.empty()) {
      s.aligned = true;
      const double w = 1.0 / static_cast<double>(doc.gold_summaries.size());
      for (std::size_t j = 0; j < doc.gold_summaries.size(); ++j) {
        score(pred.headings[j], doc.gold_summaries[j], w);
      }
    } else {
      score(join_headings(pred.headings), join_headings(doc.gold_summaries), 1.0);
    }

    report.pk += s.pk;
    report.windiff += s.windiff;
    report.boundary_precision += s.boundary.precision;
    report.boundary_recall += s.boundary.recall;
    report.boundary_f1 += s.boundary.f1;
    report.rouge1 += s.rouge1;
    report.rouge2 += s.rouge2;
    report.rougel += s.rougel;
    report.degenerate_decodes += pred.degenerate ? 1 : 0;
    report.clamped_heading_counts += pred.clamped_heading_count ? 1 : 0;
    report.per_document.push_back(std::move(s));
  }
  if (report.documents) {
    const double n = static_cast<double>(report.documents);
    for (double* v : {&report.pk, &report.windiff, &report.boundary_precision,
                      &report.boundary_recall, &report.boundary_f1, &report.rouge1,
                      &report.rouge2, &report.rougel}) {
      *v /= n;
    }
  }
  return report;
}

inline nlohmann::ordered_json report_to_json(const MetricsReport& r, bool include_documents = true) {
  nlohmann::ordered_json j;
  j["setting"] = r.setting;
  j["rouge_mode"] = rouge_mode_name(r.mode);
  j["rouge_config"] = "lowercase whitespace tokens, no stemming, no stopword removal";
  j["segmentation_scope"] = "all gaps, including the unsummarized first section";
  j["documents"] = r.documents;
  j["pk"] = r.pk;
  j["windiff"] = r.windiff;
  j["boundary_precision"] = r.boundary_precision;
  j["boundary_recall"] = r.boundary_recall;
  j["boundary_f1"] = r.boundary_f1;
  j["rouge1_f1"] = r.rouge1;
  j["rouge2_f1"] = r.rouge2;
  j["rougel_f1"] = r.rougel;
  j["degenerate_decodes"] = r.degenerate_decodes;
  j["clamped_heading_counts"] = r.clamped_heading_counts;
  for (const auto& [key, value] : r.extra) j[key] = value;
  if (include_documents) {
    auto docs = nlohmann::ordered_json::array();
    for (const auto& s : r.per_document) {
      docs.push_back({{"id", s.id},
                      {"pk", s.pk},
                      {"windiff", s.windiff},
                      {"boundary_f1", s.boundary.f1},
                      {"rouge1_f1", s.rouge1},
                      {"rouge2_f1", s.rouge2},
                      {"rougel_f1", s.rougel},
                      {"aligned", s.aligned}});
    }
    j["per_document"] = docs;
  }
  return j;
}

inline std::string format_fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, value);
  return buf;
}

// Aligned two-column plain-text rendering.
inline std::string report_to_table(const MetricsReport& r) {
  std::vector<std::pair<std::string, std::string>> rows = {
      {"setting", r.setting},
      {"rouge mode", rouge_mode_name(r.mode)},
      {"documents", std::to_string(r.documents)},
      {"Pk", format_fixed(r.pk)},
      {"WinDiff", format_fixed(r.windiff)},
      {"boundary P", format_fixed(r.boundary_precision)},
      {"boundary R", format_fixed(r.boundary_recall)},
      {"boundary F1", format_fixed(r.boundary_f1)},
      {"ROUGE-1 F1", format_fixed(r.rouge1)},
      {"ROUGE-2 F1", format_fixed(r.rouge2)},
      {"ROUGE-L F1", format_fixed(r.rougel)},
      {"degenerate decodes", std::to_string(r.degenerate_decodes)},
      {"clamped heading counts", std::to_string(r.clamped_heading_counts)},
  };
  for (const auto& [key, value] : r.extra) rows.emplace_back(key, format_fixed(value));
  std::size_t width = 0;
  for (const auto& row : rows) width = std::max(width, row.first.size());
  std::string out;
  for (const auto& [key, value] : rows) {
    out += key;
    out.append(width - key.size() + 2, ' ');
    out += value;
    out += '\n';
  }
  return out;
}

}  // namespace segsum::metrics
