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
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "segsum/app/config.hpp"
#include "segsum/app/data.hpp"
#include "segsum/app/train.hpp"
#include "segsum/corpus/encode.hpp"
#include "segsum/decoding.hpp"
#include "segsum/metrics.hpp"
#include "segsum/model/transformer.hpp"

namespace segsum::app {

struct DecodeSettings {
  std::size_t beam_size = 5;
  double alpha = 0.8;
  std::size_t max_len = 48;
  double threshold = 0.5;

  static DecodeSettings from(const RunConfig& c) {
    return {c.beam_size, c.alpha, c.max_decode_len, c.threshold};
  }
};

// One break decision per [X_SEP] from 1-based paragraph boundaries.
inline std::vector<int> decisions_from_boundaries(const corpus::EncodedExample& ex,
                                                  const std::vector<int>& boundaries) {
  std::vector<int> decisions(ex.xsep_positions.size(), 0);
  for (int b : boundaries) {
    if (b >= 1 && static_cast<std::size_t>(b) <= decisions.size()) decisions[b - 1] = 1;
  }
  return decisions;
}

// Decodes the headings of an encoded document whose sections follow
// `decisions`.
template <typename T>
metrics::DocumentPrediction summarize_with_decisions(const model::Transformer<T>& model,
                                                     const model::EncoderState<T>& enc,
                                                     const corpus::EncodedExample& ex,
                                                     const std::vector<int>& decisions,
                                                     const corpus::Vocabulary& vocab,
                                                     const DecodeSettings& settings) {
  const auto sections =
      corpus::section_map_from_decisions(ex.src_ids.size(), ex.xsep_positions, decisions);
  metrics::DocumentPrediction pred;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i]) pred.boundaries.push_back(static_cast<int>(i) + 1);
  }
  const auto k = decoding::required_headings(pred.boundaries.size() + 1,
                                             ex.first_section_has_summary);
  pred.clamped_heading_count = k.clamped;
  const int offset = ex.section_offset();
  const decoding::ModelScorer<T> scorer(model, enc, sections, offset);
  decoding::BeamOptions beam;
  beam.beam_size = settings.beam_size;
  beam.alpha = settings.alpha;
  // The prefix fed back to the decoder never exceeds max_tgt_len.
  beam.max_len = std::min(settings.max_len, model.config().max_tgt_len);
  const auto result = decoding::beam_search(scorer, {k.count, offset}, beam);
  pred.degenerate = result.degenerate;
  for (const auto& heading : result.headings) {
    corpus::TokenList words;
    for (int id : heading) words.push_back(vocab.token(id));
    pred.headings.push_back(std::move(words));
  }
  return pred;
}

// The part of `doc` the model actually sees after truncation.
inline corpus::Document visible_document(const corpus::Document& doc,
                                         const corpus::EncodedExample& ex) {
  if (!ex.truncated && ex.summary_count == doc.gold_summaries.size()) return doc;
  corpus::Document out = doc;
  out.paragraphs.resize(ex.paragraph_count);
  out.gold_boundaries.resize(ex.section_count - 1);
  out.gold_summaries.resize(ex.summary_count);
  return out;
}

enum class SegmentSource { kGold, kPredicted };

inline const char* setting_name(SegmentSource source) {
  return source == SegmentSource::kGold ? "gold-segments" : "predicted-segments";
}

// Teacher-forced heading token accuracy over a set of examples.
template <typename T>
double heading_token_accuracy(const model::Transformer<T>& model,
                              const std::vector<corpus::EncodedExample>& examples) {
  numerics::NoGradGuard no_grad;
  std::size_t correct = 0, total = 0;
  for (const auto& ex : examples) {
    const auto out = model.forward_train(ex);
    correct += out.correct_tokens;
    total += out.target_tokens;
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

template <typename T>
metrics::MetricsReport evaluate_model(const model::Transformer<T>& model,
                                      const corpus::Vocabulary& vocab,
                                      const std::vector<corpus::Document>& docs,
                                      SegmentSource source, const DecodeSettings& settings,
                                      metrics::RougeMode mode) {
  numerics::NoGradGuard no_grad;
  std::vector<corpus::Document> gold;
  std::vector<corpus::EncodedExample> examples;
  std::vector<metrics::DocumentPrediction> preds;
  for (const auto& doc : docs) {
    auto ex = corpus::encode_document(doc, vocab, model.config().max_src_len,
                                      model.config().max_tgt_len);
    const auto enc = model.encode(ex.src_ids);
    std::vector<int> decisions;
    if (source == SegmentSource::kGold) {
      decisions = ex.boundary_labels;
    } else {
      decisions = model.predict_boundaries(enc, ex.xsep_positions, settings.threshold).decisions;
      decisions.resize(ex.xsep_positions.size(), 0);
    }
    auto pred = summarize_with_decisions(model, enc, ex, decisions, vocab, settings);
    pred.id = doc.id;
    preds.push_back(std::move(pred));
    gold.push_back(visible_document(doc, ex));
    examples.push_back(std::move(ex));
  }
  auto report = metrics::evaluate_run(gold, preds, mode, setting_name(source));
  report.extra["heading_token_accuracy"] = heading_token_accuracy(model, examples);
  std::size_t truncated = 0;
  for (const auto& ex : examples) truncated += ex.truncated ? 1 : 0;
  report.extra["truncated_documents"] = static_cast<double>(truncated);
  return report;
}

inline std::vector<SegmentSource> sources_for(const std::string& eval_setting) {
  if (eval_setting == "gold") return {SegmentSource::kGold};
  if (eval_setting == "predicted") return {SegmentSource::kPredicted};
  return {SegmentSource::kGold, SegmentSource::kPredicted};
}

inline std::string report_stem(SegmentSource source) {
  return source == SegmentSource::kGold ? "report_gold" : "report_predicted";
}

// Evaluates the checkpoint in `checkpoint` (a run directory or checkpoint
// file) on `config.test_path` and writes report_<setting>.{json,txt} into
// `config.out_dir`.
inline std::vector<metrics::MetricsReport> evaluate_run_dir(const RunConfig& config,
                                                            const std::filesystem::path& checkpoint,
                                                            std::ostream& log) {
  config.validate();
  const LoadedRun run = load_run(checkpoint);
  model::ModelConfig expected = config.model;
  expected.vocab_size = run.config.vocab_size;
  if (!(expected == run.config)) {
    const auto want = model::to_json(expected), have = model::to_json(run.config);
    for (const auto& [key, value] : want.items()) {
      if (have.at(key) != value) {
        throw UsageError("evaluate: config sets " + key + " = " + value.dump() +
                         " but the checkpoint was trained with " + have.at(key).dump());
      }
    }
  }
  const auto docs = load_split(config.test_path, "test", config.first_section_has_summary);
  const auto mode = metrics::parse_rouge_mode(config.rouge_mode);
  const std::filesystem::path dir = config.out_dir;
  std::filesystem::create_directories(dir);
  std::vector<metrics::MetricsReport> reports;
  for (SegmentSource source : sources_for(config.eval_setting)) {
    auto report =
        evaluate_model(*run.model, run.vocab, docs, source, DecodeSettings::from(config), mode);
    atomic_write_file(dir / (report_stem(source) + ".json"),
                      metrics::report_to_json(report).dump(2) + "\n");
    const std::string table = metrics::report_to_table(report);
    atomic_write_file(dir / (report_stem(source) + ".txt"), table);
    log << table << "\n";
    reports.push_back(std::move(report));
  }
  return reports;
}

// Trains one run per c in `seg_heads` plus a c = max run without the
// segmentation loss, evaluates each and writes ablation.{json,txt}.
inline nlohmann::ordered_json run_ablation(const RunConfig& base,
                                           const std::vector<std::size_t>& seg_heads,
                                           std::ostream& log) {
  struct Variant {
    std::string name;
    RunConfig config;
  };
  std::vector<Variant> variants;
  for (std::size_t c : seg_heads) {
    RunConfig v = base;
    v.model.seg_heads = c;
    variants.push_back({"c" + std::to_string(c), v});
  }
  {
    RunConfig v = base;
    v.model.seg_loss = false;
    variants.push_back({"no_seg_loss_c" + std::to_string(base.model.seg_heads), v});
  }
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  std::string table =
      "variant                  L_seg    boundary_f1  heading_acc  rouge1_gold  rouge1_pred\n";
  for (auto& variant : variants) {
    const std::filesystem::path dir = std::filesystem::path(base.out_dir) / variant.name;
    variant.config.out_dir = dir.string();
    variant.config.eval_setting = "both";
    log << "== " << variant.name << "\n";
    const TrainResult trained = train_run(variant.config, log);
    const auto reports = evaluate_run_dir(variant.config, dir, log);
    nlohmann::ordered_json row;
    row["variant"] = variant.name;
    row["seg_heads"] = variant.config.model.seg_heads;
    row["seg_loss"] = variant.config.model.seg_loss;
    row["best_epoch"] = trained.best_epoch;
    row["train_seg_loss"] = trained.best().has_seg_loss
                                ? nlohmann::ordered_json(trained.best().seg_loss)
                                : nlohmann::ordered_json("absent");
    row["predicted_boundary_f1"] = reports[1].boundary_f1;
    row["heading_token_accuracy"] = reports[0].extra.at("heading_token_accuracy");
    row["rouge1_gold"] = reports[0].rouge1;
    row["rouge1_predicted"] = reports[1].rouge1;
    out.push_back(row);
    std::string name = variant.name;
    name.resize(std::max<std::size_t>(name.size(), 25), ' ');
    std::string seg = trained.best().has_seg_loss ? metrics::format_fixed(trained.best().seg_loss)
                                                  : std::string("absent");
    seg.resize(std::max<std::size_t>(seg.size(), 9), ' ');
    table += name + seg + metrics::format_fixed(reports[1].boundary_f1) + "       " +
             metrics::format_fixed(reports[0].extra.at("heading_token_accuracy")) + "       " +
             metrics::format_fixed(reports[0].rouge1) + "       " +
             metrics::format_fixed(reports[1].rouge1) + "\n";
  }
  atomic_write_file(std::filesystem::path(base.out_dir) / "ablation.json", out.dump(2) + "\n");
  atomic_write_file(std::filesystem::path(base.out_dir) / "ablation.txt", table);
  log << table;
  return out;
}

}  // namespace segsum::app
