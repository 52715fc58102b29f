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
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segsum/app/commands.hpp"
#include "segsum/app/config.hpp"
#include "segsum/app/evaluate.hpp"
#include "segsum/app/train.hpp"
#include "segsum/error.hpp"

namespace segsum::app {

namespace detail {

// String overrides for every RunConfig key, bound to --<key-with-hyphens>.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "JSON run config; flags override its values");
    const nlohmann::ordered_json defaults = to_json(RunConfig{});
    for (const auto& [key, value] : defaults.items()) {
      std::string flag = "--" + key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      if (key == "c") flag += ",--seg-heads";
      cmd.add_option_function<std::string>(
          flag, [this, key = key](const std::string& v) { values[key] = v; },
          "default " + value.dump());
    }
  }

  RunConfig resolve(const RunConfig& base) const {
    RunConfig c = config_path.empty() ? base : load_run_config(config_path, base);
    if (values.empty()) return c;
    const nlohmann::ordered_json defaults = to_json(RunConfig{});
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [key, text] : values) overrides[key] = convert(key, text, defaults.at(key));
    return run_config_from_json(overrides, c);
  }

  static nlohmann::json convert(const std::string& key, const std::string& text,
                                const nlohmann::ordered_json& like) {
    auto bad = [&]() -> UsageError {
      return UsageError("--" + key + ": cannot parse '" + text + "'");
    };
    if (like.is_boolean() || like.is_null()) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      if (like.is_null() && text == "null") return nullptr;
      throw bad();
    }
    if (like.is_string()) return text;
    std::size_t used = 0;
    try {
      if (like.is_number_float()) {
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
      } else if (!text.empty() && text[0] != '-') {
        const unsigned long long v = std::stoull(text, &used);
        if (used == text.size()) return v;
      }
    } catch (const std::exception&) {
    }
    throw bad();
  }
};

}  // namespace detail

// Runs the command line in `args` (without the program name). Errors are
// reported on `err` as one "ERR_<KIND>: message" line and mapped to exit
// codes 1 (usage), 2 (data) and 3 (numeric).
inline int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint document segmentation and section heading generation", "segsum"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every command");

  GenerateDataArgs gen;
  std::string split_policy = "disjoint-topics";
  auto* generate = app.add_subcommand("generate-data", "Write synthetic train/valid/test corpora");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--n-docs", gen.synth.n_docs, "Documents over all splits")
      ->capture_default_str();
  generate->add_option("--seed", gen.synth.seed)->capture_default_str();
  generate->add_option("--split-policy", split_policy,
                       "disjoint-topics or shared-topics")->capture_default_str();
  generate->add_option("--n-topics", gen.synth.n_topics)->capture_default_str();
  generate->add_option("--vocab-per-topic", gen.synth.vocab_per_topic)->capture_default_str();
  generate->add_option("--filler-count", gen.synth.filler_count)->capture_default_str();
  generate->add_option("--min-sections", gen.synth.sections.lo)->capture_default_str();
  generate->add_option("--max-sections", gen.synth.sections.hi)->capture_default_str();
  generate->add_option("--min-paras", gen.synth.paras_per_section.lo)->capture_default_str();
  generate->add_option("--max-paras", gen.synth.paras_per_section.hi)->capture_default_str();
  generate->add_option("--min-para-len", gen.synth.para_len.lo)->capture_default_str();
  generate->add_option("--max-para-len", gen.synth.para_len.hi)->capture_default_str();
  generate->add_option("--topic-token-rate", gen.synth.topic_token_rate)->capture_default_str();

  detail::ConfigFlags train_flags, eval_flags, ablate_flags;
  auto* train = app.add_subcommand("train", "Train a model and keep the best validation checkpoint");
  train_flags.attach(*train);

  std::string eval_checkpoint;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint with gold and predicted segments");
  eval_flags.attach(*evaluate);
  evaluate->add_option("--checkpoint", eval_checkpoint,
                       "Run directory or checkpoint file (default: the run's out directory)");

  std::vector<std::size_t> c_list;
  auto* ablate = app.add_subcommand("ablate-c", "Train and evaluate one run per c, plus one without L_seg");
  ablate_flags.attach(*ablate);
  ablate->add_option("--c-list", c_list, "Comma-separated c values (default 0,n_head/2,n_head)")
      ->delimiter(',');

  InferenceArgs infer;
  std::optional<bool> summary_flag;
  auto add_inference = [&](CLI::App* cmd) {
    cmd->add_option("--input", infer.input, "JSON Lines file holding one document")->required();
    cmd->add_option("--baseline", infer.baseline, "even or texttiling");
    cmd->add_option("--n", infer.n, "Even: number of sections");
    cmd->add_option("--paragraphs-per-section", infer.paragraphs_per_section,
                    "Even: divisor for the default section count")->capture_default_str();
    cmd->add_option("--block-size", infer.texttiling.block_size)->capture_default_str();
    cmd->add_option("--smoothing-width", infer.texttiling.smoothing_width)->capture_default_str();
    cmd->add_option("--cutoff-stddevs", infer.texttiling.cutoff_stddevs)->capture_default_str();
    cmd->add_option("--checkpoint", infer.checkpoint, "Run directory or checkpoint file");
    cmd->add_option("--threshold", infer.decode.threshold)->capture_default_str();
    cmd->add_option("--first-section-has-summary", summary_flag);
  };
  auto* segment = app.add_subcommand("segment", "Print predicted boundaries of one document");
  add_inference(segment);
  auto* summarize = app.add_subcommand("summarize", "Print boundaries and headings of one document");
  add_inference(summarize);
  summarize->add_flag("--gold-segments", infer.gold_segments, "Use the document's own boundaries");
  summarize->add_option("--beam-size", infer.decode.beam_size)->capture_default_str();
  summarize->add_option("--alpha", infer.decode.alpha)->capture_default_str();
  summarize->add_option("--max-decode-len", infer.decode.max_len)->capture_default_str();

  GradCheckArgs gc;
  auto* grad_check = app.add_subcommand("grad-check", "Compare analytic and numeric gradients");
  grad_check->add_option("--seed", gc.seed)->capture_default_str();
  grad_check->add_option("--step", gc.h, "Central difference step h")->capture_default_str();
  grad_check->add_option("--tolerance", gc.tolerance)->capture_default_str();
  grad_check->add_option("--c", gc.seg_heads)->capture_default_str();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    err << error_code(ErrorKind::kUsage) << ": " << message << "\n";
    return static_cast<int>(ErrorKind::kUsage);
  }

  try {
    if (generate->parsed()) {
      gen.policy = parse_split_policy(split_policy);
      cmd_generate_data(gen, out);
    } else if (train->parsed()) {
      train_run(train_flags.resolve({}), out);
    } else if (evaluate->parsed()) {
      RunConfig base;
      std::filesystem::path checkpoint = eval_checkpoint;
      if (eval_flags.config_path.empty() && !checkpoint.empty()) {
        const auto run_dir =
            std::filesystem::is_directory(checkpoint) ? checkpoint : checkpoint.parent_path();
        if (std::filesystem::exists(run_dir / kConfigFile)) {
          base = load_run_config(run_dir / kConfigFile);
        }
      }
      const RunConfig config = eval_flags.resolve(base);
      if (checkpoint.empty()) checkpoint = config.out_dir;
      evaluate_run_dir(config, checkpoint, out);
    } else if (ablate->parsed()) {
      const RunConfig config = ablate_flags.resolve({});
      if (c_list.empty()) {
        c_list = {0, config.model.n_head / 2, config.model.n_head};
        c_list.erase(std::unique(c_list.begin(), c_list.end()), c_list.end());
      }
      for (std::size_t c : c_list) {
        if (c > config.model.n_head) {
          throw UsageError("ablate-c: c = " + std::to_string(c) + " exceeds n_head " +
                           std::to_string(config.model.n_head));
        }
      }
      run_ablation(config, c_list, out);
    } else if (segment->parsed() || summarize->parsed()) {
      infer.first_section_has_summary = summary_flag;
      if (segment->parsed()) {
        cmd_segment(infer, out);
      } else {
        cmd_summarize(infer, out);
      }
    } else if (grad_check->parsed()) {
      cmd_grad_check(gc, out);
    }
  } catch (const Error& e) {
    std::string message = e.what();
    std::replace(message.begin(), message.end(), '\n', ' ');
    err << error_code(e.kind()) << ": " << message << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    err << error_code(ErrorKind::kData) << ": " << e.what() << "\n";
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}

}  // namespace segsum::app
