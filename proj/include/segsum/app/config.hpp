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
#include <string>

#include "json.hpp"
#include "segsum/corpus/vocabulary.hpp"
#include "segsum/error.hpp"
#include "segsum/io.hpp"
#include "segsum/metrics.hpp"
#include "segsum/model/config.hpp"

namespace segsum::app {

// Everything a train or evaluate run depends on, serialized as one flat
// JSON object.
struct RunConfig {
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string out_dir = "run";

  model::ModelConfig model;

  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;
  double clip_norm = 1.0;  // 0 disables clipping
  std::size_t min_freq = 1;
  // Rebuild every training document each epoch from sections drawn across
  // the training corpus.
  bool recombine_sections = false;

  std::size_t beam_size = 5;
  double alpha = 0.8;
  std::size_t max_decode_len = 48;
  double threshold = 0.5;
  std::string rouge_mode = "concat";
  std::string eval_setting = "both";  // gold, predicted or both
  // Unset means every document's own flag is used.
  std::optional<bool> first_section_has_summary;

  // The vocabulary size comes from the corpus, so it is not checked here.
  void validate() const {
    model::ModelConfig m = model;
    if (m.vocab_size == 0) m.vocab_size = corpus::kReservedCount + 1;
    m.validate();
    if (lr <= 0) throw UsageError("config: lr must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) {
      throw UsageError("config: Adam betas must lie in [0, 1)");
    }
    if (batch_size < 1) throw UsageError("config: batch_size must be >= 1");
    if (beam_size < 1) throw UsageError("config: beam_size must be >= 1");
    if (max_decode_len < 1) throw UsageError("config: max_decode_len must be >= 1");
    if (alpha < 0) throw UsageError("config: alpha must be >= 0");
    if (clip_norm < 0) throw UsageError("config: clip_norm must be >= 0");
    if (min_freq < 1) throw UsageError("config: min_freq must be >= 1");
    metrics::parse_rouge_mode(rouge_mode);
    if (eval_setting != "gold" && eval_setting != "predicted" && eval_setting != "both") {
      throw UsageError("config: eval_setting must be gold, predicted or both");
    }
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["train"] = c.train_path;
  j["valid"] = c.valid_path;
  j["test"] = c.test_path;
  j["out"] = c.out_dir;
  const nlohmann::json model_keys = model::to_json(c.model);
  for (const auto& [key, value] : model_keys.items()) {
    if (key != "vocab_size") j[key] = value;
  }
  j["lr"] = c.lr;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["adam_eps"] = c.adam_eps;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["clip_norm"] = c.clip_norm;
  j["min_freq"] = c.min_freq;
  j["recombine_sections"] = c.recombine_sections;
  j["beam_size"] = c.beam_size;
  j["alpha"] = c.alpha;
  j["max_decode_len"] = c.max_decode_len;
  j["threshold"] = c.threshold;
  j["rouge_mode"] = c.rouge_mode;
  j["eval_setting"] = c.eval_setting;
  j["first_section_has_summary"] =
      c.first_section_has_summary ? nlohmann::ordered_json(*c.first_section_has_summary)
                                  : nlohmann::ordered_json(nullptr);
  return j;
}

namespace detail {

template <typename V>
void read_key(const nlohmann::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(std::string("config: key '") + key + "' has the wrong type");
  }
}

}  // namespace detail

// Unknown keys are rejected so that typos do not silently fall back to
// defaults.
inline RunConfig run_config_from_json(const nlohmann::json& j, RunConfig c = {}) {
  if (!j.is_object()) throw UsageError("config: expected a JSON object");
  const nlohmann::ordered_json known = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key) && key != "vocab_size") {
      throw UsageError("config: unknown key '" + key + "'");
    }
  }
  detail::read_key(j, "train", c.train_path);
  detail::read_key(j, "valid", c.valid_path);
  detail::read_key(j, "test", c.test_path);
  detail::read_key(j, "out", c.out_dir);
  c.model = model::model_config_from_json(j, c.model);
  detail::read_key(j, "lr", c.lr);
  detail::read_key(j, "beta1", c.beta1);
  detail::read_key(j, "beta2", c.beta2);
  detail::read_key(j, "adam_eps", c.adam_eps);
  detail::read_key(j, "batch_size", c.batch_size);
  detail::read_key(j, "epochs", c.epochs);
  detail::read_key(j, "seed", c.seed);
  detail::read_key(j, "clip_norm", c.clip_norm);
  detail::read_key(j, "min_freq", c.min_freq);
  detail::read_key(j, "recombine_sections", c.recombine_sections);
  detail::read_key(j, "beam_size", c.beam_size);
  detail::read_key(j, "alpha", c.alpha);
  detail::read_key(j, "max_decode_len", c.max_decode_len);
  detail::read_key(j, "threshold", c.threshold);
  detail::read_key(j, "rouge_mode", c.rouge_mode);
  detail::read_key(j, "eval_setting", c.eval_setting);
  if (j.contains("first_section_has_summary")) {
    const auto& v = j.at("first_section_has_summary");
    if (v.is_null()) {
      c.first_section_has_summary.reset();
    } else if (v.is_boolean()) {
      c.first_section_has_summary = v.get<bool>();
    } else {
      throw UsageError("config: first_section_has_summary must be true, false or null");
    }
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults = {}) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw UsageError("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j, std::move(defaults));
}

}  // namespace segsum::app
