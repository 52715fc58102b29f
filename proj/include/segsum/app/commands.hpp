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

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "segsum/app/config.hpp"
#include "segsum/app/data.hpp"
#include "segsum/app/evaluate.hpp"
#include "segsum/app/train.hpp"
#include "segsum/baselines.hpp"
#include "segsum/corpus/document.hpp"
#include "segsum/corpus/encode.hpp"
#include "segsum/corpus/synthetic.hpp"
#include "segsum/error.hpp"
#include "segsum/numerics/grad_check.hpp"

namespace segsum::app {

// generate-data

struct GenerateDataArgs {
  std::string out_dir;
  corpus::SynthOptions synth = [] {
    corpus::SynthOptions o;
    o.n_docs = 625;
    return o;
  }();
  SplitPolicy policy = SplitPolicy::kDisjointTopics;
};

inline std::array<std::filesystem::path, 3> cmd_generate_data(const GenerateDataArgs& args,
                                                              std::ostream& out) {
  if (args.out_dir.empty()) throw UsageError("generate-data: --out is required");
  const SplitCorpus corpus = generate_splits(args.synth, args.policy);
  std::error_code ec;
  std::filesystem::create_directories(args.out_dir, ec);
  if (ec) throw DataError("generate-data: cannot create '" + args.out_dir + "': " + ec.message());
  const auto paths = write_splits(corpus, args.out_dir);
  for (std::size_t s = 0; s < 3; ++s) {
    out << kSplitNames[s] << " " << corpus.splits[s].size() << " " << paths[s].string() << "\n";
  }
  return paths;
}

// segment / summarize

enum class Baseline { kNone, kEven, kTextTiling };

inline Baseline parse_baseline(const std::string& name) {
  if (name.empty()) return Baseline::kNone;
  if (name == "even") return Baseline::kEven;
  if (name == "texttiling") return Baseline::kTextTiling;
  throw UsageError("unknown baseline '" + name + "' (options: even, texttiling)");
}

struct InferenceArgs {
  std::string input;
  std::string baseline;
  std::optional<std::size_t> n;  // Even section count
  double paragraphs_per_section = baselines::kDefaultParagraphsPerSection;
  baselines::TextTilingParams texttiling;
  std::string checkpoint;
  bool gold_segments = false;  // summarize only
  std::optional<bool> first_section_has_summary;
  DecodeSettings decode;
};

inline corpus::Document load_single_document(const InferenceArgs& args, bool require_labels) {
  if (args.input.empty()) throw UsageError("--input is required");
  const auto docs =
      corpus::load_jsonl(args.input, require_labels, args.first_section_has_summary);
  if (docs.size() != 1) {
    throw UsageError("expected exactly one document in '" + args.input + "', found " +
                     std::to_string(docs.size()));
  }
  return docs.front();
}

inline std::vector<int> baseline_boundaries(Baseline baseline, const corpus::Document& doc,
                                            const InferenceArgs& args) {
  if (baseline == Baseline::kEven) {
    const std::size_t n =
        args.n ? *args.n
               : baselines::even_default_sections(doc.paragraph_count(), args.paragraphs_per_section);
    return baselines::even_segmenter(doc.paragraph_count(), n);
  }
  return baselines::texttiling(doc, args.texttiling);
}

inline nlohmann::ordered_json boundaries_json(const std::string& id, const std::vector<int>& b) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["boundaries"] = b;
  return j;
}

inline nlohmann::ordered_json cmd_segment(const InferenceArgs& args, std::ostream& out) {
  const Baseline baseline = parse_baseline(args.baseline);
  const corpus::Document doc = load_single_document(args, false);
  std::vector<int> boundaries;
  bool truncated = false;
  if (baseline != Baseline::kNone) {
    boundaries = baseline_boundaries(baseline, doc, args);
  } else {
    if (args.checkpoint.empty()) {
      throw UsageError("segment: give --baseline (even, texttiling) or --checkpoint");
    }
    const LoadedRun run = load_run(args.checkpoint);
    const auto ex = corpus::encode_source(doc, run.vocab, run.config.max_src_len);
    truncated = ex.truncated;
    const auto enc = run.model->encode(ex.src_ids);
    boundaries = run.model->predict_boundaries(enc, ex.xsep_positions, args.decode.threshold).boundaries;
  }
  auto j = boundaries_json(doc.id, boundaries);
  if (truncated) j["truncated"] = true;
  out << j.dump() << "\n";
  return j;
}

inline nlohmann::ordered_json cmd_summarize(const InferenceArgs& args, std::ostream& out) {
  const Baseline baseline = parse_baseline(args.baseline);
  if (args.checkpoint.empty()) throw UsageError("summarize: --checkpoint is required");
  if (args.gold_segments && baseline != Baseline::kNone) {
    throw UsageError("summarize: --gold-segments and --baseline are exclusive");
  }
  const corpus::Document doc = load_single_document(args, args.gold_segments);
  const LoadedRun run = load_run(args.checkpoint);
  numerics::NoGradGuard no_grad;
  const auto ex = corpus::encode_source(doc, run.vocab, run.config.max_src_len);
  const auto enc = run.model->encode(ex.src_ids);
  std::vector<int> decisions;
  if (args.gold_segments) {
    decisions = decisions_from_boundaries(ex, doc.gold_boundaries);
  } else if (baseline != Baseline::kNone) {
    corpus::Document visible = doc;
    visible.paragraphs.resize(ex.paragraph_count);
    decisions = decisions_from_boundaries(ex, baseline_boundaries(baseline, visible, args));
  } else {
    decisions = run.model->predict_boundaries(enc, ex.xsep_positions, args.decode.threshold).decisions;
    decisions.resize(ex.xsep_positions.size(), 0);
  }
  const auto pred = summarize_with_decisions(*run.model, enc, ex, decisions, run.vocab, args.decode);
  auto j = boundaries_json(doc.id, pred.boundaries);
  auto headings = nlohmann::ordered_json::array();
  for (const auto& h : pred.headings) {
    std::string text;
    for (const auto& w : h) text += (text.empty() ? "" : " ") + w;
    headings.push_back(text);
  }
  j["headings"] = headings;
  j["degenerate"] = pred.degenerate;
  if (pred.clamped_heading_count) j["clamped_heading_count"] = true;
  if (ex.truncated) j["truncated"] = true;
  out << j.dump() << "\n";
  return j;
}

// grad-check

struct GradCheckArgs {
  std::uint64_t seed = 1;
  double h = 1e-5;
  double tolerance = 1e-3;
  std::size_t seg_heads = 1;
  double min_fraction = 0.99;
};

// Double-precision check of the joint loss on a tiny model and a synthetic
// multi-section document.
inline numerics::GradCheckReport run_grad_check(const GradCheckArgs& args) {
  corpus::SynthOptions synth;
  synth.n_docs = 8;
  synth.n_topics = 6;
  synth.vocab_per_topic = 4;
  synth.filler_count = 3;
  synth.sections = {2, 3};
  synth.paras_per_section = {1, 2};
  synth.para_len = {2, 3};
  synth.seed = args.seed;
  const auto docs = corpus::synth_generate(synth);
  const auto vocab = corpus::build_vocab(docs, 1);
  model::ModelConfig config;
  config.n_enc_layers = 2;
  config.n_dec_layers = 2;
  config.d_model = 16;
  config.n_head = 2;
  config.d_ff = 32;
  config.seg_heads = args.seg_heads;
  config.vocab_size = vocab.size();
  config.max_src_len = 32;
  config.max_tgt_len = 16;
  config.dropout = 0.0;
  model::Transformer<double> model(config, args.seed);
  const auto ex = corpus::encode_document(docs.front(), vocab, config.max_src_len,
                                          config.max_tgt_len);
  return numerics::grad_check(
      model.parameters(), [&] { return model.forward_train(ex).loss; }, args.h, args.tolerance);
}

inline nlohmann::ordered_json cmd_grad_check(const GradCheckArgs& args, std::ostream& out) {
  const auto report = run_grad_check(args);
  nlohmann::ordered_json j;
  j["coordinates"] = report.coordinates;
  j["within_tolerance"] = report.within_tolerance;
  j["fraction_within_tolerance"] = report.fraction_within_tolerance();
  j["tolerance"] = report.tolerance;
  j["h"] = args.h;
  j["max_rel_error"] = report.max_rel_error;
  j["mean_rel_error"] = report.mean_rel_error;
  auto params = nlohmann::ordered_json::array();
  for (const auto& p : report.per_parameter) {
    params.push_back({{"name", p.name},
                      {"coordinates", p.coordinates},
                      {"max_rel_error", p.max_rel_error}});
  }
  j["parameters"] = params;
  out << j.dump(2) << "\n";
  if (report.fraction_within_tolerance() < args.min_fraction) {
    throw NumericError("grad-check: only " + metrics::format_fixed(report.fraction_within_tolerance()) +
                       " of coordinates within relative error " + metrics::format_fixed(args.tolerance, 6));
  }
  return j;
}

}  // namespace segsum::app
