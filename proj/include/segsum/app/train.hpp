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

#include <cmath>
#include <filesystem>
#include <memory>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "segsum/app/config.hpp"
#include "segsum/app/data.hpp"
#include "segsum/corpus/augment.hpp"
#include "segsum/corpus/encode.hpp"
#include "segsum/corpus/vocabulary.hpp"
#include "segsum/metrics.hpp"
#include "segsum/model/transformer.hpp"
#include "segsum/numerics/checkpoint.hpp"
#include "segsum/numerics/optim.hpp"

namespace segsum::app {

// Training precision; gradient checks use double separately.
using Real = float;

inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kVocabFile = "vocab.tsv";
inline constexpr const char* kConfigFile = "config.json";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";

struct EpochStats {
  std::size_t epoch = 0;
  double loss = 0, seg_loss = 0, gen_loss = 0;  // training means
  bool has_seg_loss = true;
  double val_loss = 0;
  double val_boundary_f1 = 0;
  double val_token_accuracy = 0;
};

inline nlohmann::ordered_json to_json(const EpochStats& s) {
  nlohmann::ordered_json j;
  j["epoch"] = s.epoch;
  j["loss"] = s.loss;
  j["seg_loss"] = s.has_seg_loss ? nlohmann::ordered_json(s.seg_loss) : nlohmann::ordered_json(nullptr);
  j["gen_loss"] = s.gen_loss;
  j["val_loss"] = s.val_loss;
  j["val_boundary_f1"] = s.val_boundary_f1;
  j["val_token_accuracy"] = s.val_token_accuracy;
  return j;
}

struct TrainResult {
  std::vector<EpochStats> history;
  std::size_t best_epoch = 0;
  std::filesystem::path run_dir;

  const EpochStats& best() const { return history.at(best_epoch - 1); }
};

inline std::vector<corpus::EncodedExample> encode_all(const std::vector<corpus::Document>& docs,
                                                      const corpus::Vocabulary& vocab,
                                                      const model::ModelConfig& config) {
  std::vector<corpus::EncodedExample> out;
  out.reserve(docs.size());
  for (const auto& doc : docs) {
    try {
      out.push_back(corpus::encode_document(doc, vocab, config.max_src_len, config.max_tgt_len));
    } catch (const DataError& e) {
      throw DataError("document '" + doc.id + "': " + e.what());
    }
  }
  return out;
}

// Gold boundaries of an encoded example, read off its labels.
inline std::vector<int> label_boundaries(const corpus::EncodedExample& ex) {
  std::vector<int> b;
  for (std::size_t i = 0; i < ex.boundary_labels.size(); ++i) {
    if (ex.boundary_labels[i]) b.push_back(static_cast<int>(i) + 1);
  }
  return b;
}

struct Validation {
  double loss = 0;
  double boundary_f1 = 0;     // document mean
  double token_accuracy = 0;  // teacher-forced, over all target tokens
};

// Teacher-forced scores with gold segments and no dropout.
template <typename T>
Validation validate_examples(const model::Transformer<T>& model,
                             const std::vector<corpus::EncodedExample>& examples,
                             double threshold) {
  numerics::NoGradGuard no_grad;
  Validation v;
  std::size_t correct = 0, total = 0;
  for (const auto& ex : examples) {
    const auto out = model.forward_train(ex);
    v.loss += static_cast<double>(out.loss.item());
    correct += out.correct_tokens;
    total += out.target_tokens;
    std::vector<int> decisions, boundaries;
    model::decide_boundaries(out.boundary_probs, threshold, decisions, boundaries);
    v.boundary_f1 += metrics::boundary_prf(label_boundaries(ex), boundaries).f1;
  }
  if (!examples.empty()) {
    v.loss /= static_cast<double>(examples.size());
    v.boundary_f1 /= static_cast<double>(examples.size());
  }
  v.token_accuracy = total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return v;
}

inline std::string checkpoint_config(const model::ModelConfig& config) {
  nlohmann::ordered_json j;
  j["format"] = "segsum-model";
  j["model"] = model::to_json(config);
  return j.dump();
}

inline std::string epoch_line(const EpochStats& s) {
  std::string line = "epoch " + std::to_string(s.epoch) + "  L " + metrics::format_fixed(s.loss);
  line += "  L_seg " + (s.has_seg_loss ? metrics::format_fixed(s.seg_loss) : std::string("absent"));
  line += "  L_gen " + metrics::format_fixed(s.gen_loss);
  line += "  val_L " + metrics::format_fixed(s.val_loss);
  line += "  val_boundary_f1 " + metrics::format_fixed(s.val_boundary_f1);
  line += "  val_token_acc " + metrics::format_fixed(s.val_token_accuracy);
  return line;
}

// Trains on `config.train_path` with teacher forcing and gold sections and
// keeps the checkpoint with the best validation token accuracy plus
// boundary F1 in `config.out_dir`.
inline TrainResult train_run(const RunConfig& config, std::ostream& log) {
  config.validate();
  const auto train_docs = load_split(config.train_path, "train", config.first_section_has_summary);
  const auto valid_docs = load_split(config.valid_path, "valid", config.first_section_has_summary);
  const corpus::Vocabulary vocab = corpus::build_vocab(train_docs, config.min_freq);
  model::ModelConfig mc = config.model;
  mc.vocab_size = vocab.size();
  mc.validate();
  auto train = encode_all(train_docs, vocab, mc);
  const auto valid = encode_all(valid_docs, vocab, mc);

  const std::filesystem::path dir = config.out_dir;
  std::filesystem::create_directories(dir);
  vocab.save(dir / kVocabFile);
  atomic_write_file(dir / kConfigFile, to_json(config).dump(2) + "\n");

  model::Transformer<Real> model(mc, config.seed);
  numerics::Adam<Real> adam({config.lr, config.beta1, config.beta2, config.adam_eps});
  numerics::Rng order_rng(config.seed + 0x5eed0001ULL);
  numerics::Rng dropout_rng(config.seed + 0x5eed0002ULL);
  numerics::Rng recombine_rng(config.seed + 0x5eed0003ULL);
  const corpus::SectionPool pool(train_docs);
  model::ForwardOptions train_opt;
  train_opt.training = true;
  train_opt.rng = &dropout_rng;

  log << "training on " << train.size() << " documents, validating on " << valid.size()
      << ", vocabulary " << vocab.size() << ", parameters "
      << model.parameters().coordinate_count() << "\n";
  if (config.recombine_sections) {
    log << "recombining " << pool.size() << " training sections each epoch\n";
  }

  TrainResult result;
  result.run_dir = dir;
  double best_score = -1;
  std::string log_lines;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.recombine_sections) {
      train = encode_all(pool.draw_all(train_docs, recombine_rng), vocab, mc);
    }
    order_rng.shuffle(order);
    EpochStats stats;
    stats.epoch = epoch;
    stats.has_seg_loss = mc.seg_loss;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const Real inv = Real(1) / static_cast<Real>(end - start);
      model.parameters().zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const auto& ex = train[order[b]];
        auto out = model.forward_train(ex, train_opt);
        const double loss = out.loss.item();
        if (!std::isfinite(loss)) {
          throw NumericError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             ", document " + std::to_string(order[b]) + " (L_seg " +
                             std::to_string(out.seg_loss.item()) + ", L_gen " +
                             std::to_string(out.gen_loss.item()) + ")");
        }
        stats.loss += loss;
        stats.seg_loss += out.seg_loss.item();
        stats.gen_loss += out.gen_loss.item();
        numerics::scale(out.loss, inv).backward();
      }
      if (config.clip_norm > 0) {
        const double norm = model.parameters().grad_norm();
        if (!std::isfinite(norm)) {
          throw NumericError("train: non-finite gradient norm at epoch " + std::to_string(epoch));
        }
        if (norm > config.clip_norm) model.parameters().scale_grads(config.clip_norm / norm);
      }
      adam.step(model.parameters());
    }
    const double n = static_cast<double>(train.size());
    stats.loss /= n;
    stats.seg_loss /= n;
    stats.gen_loss /= n;
    const Validation v = validate_examples(model, valid, config.threshold);
    stats.val_loss = v.loss;
    stats.val_boundary_f1 = v.boundary_f1;
    stats.val_token_accuracy = v.token_accuracy;
    result.history.push_back(stats);
    log << epoch_line(stats) << "\n" << std::flush;
    log_lines += to_json(stats).dump() + "\n";
    atomic_write_file(dir / kTrainLogFile, log_lines);

    const double score = v.token_accuracy + v.boundary_f1;
    if (score > best_score) {
      best_score = score;
      result.best_epoch = epoch;
      numerics::save_checkpoint(dir / kCheckpointFile, model.parameters(), checkpoint_config(mc));
    }
  }
  if (result.best_epoch == 0) throw UsageError("train: epochs must be >= 1");
  log << "best epoch " << result.best_epoch << ", checkpoint " << (dir / kCheckpointFile).string()
      << "\n";
  return result;
}

// A trained model with its vocabulary, as stored in a run directory.
struct LoadedRun {
  model::ModelConfig config;
  corpus::Vocabulary vocab;
  std::unique_ptr<model::Transformer<Real>> model;
};

// `path` is a run directory or a checkpoint file with vocab.tsv beside it.
inline LoadedRun load_run(const std::filesystem::path& path) {
  const std::filesystem::path ckpt =
      std::filesystem::is_directory(path) ? path / kCheckpointFile : path;
  const numerics::CheckpointData data = numerics::load_checkpoint(ckpt);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(data.config_json);
  } catch (const nlohmann::json::parse_error&) {
    throw DataError("checkpoint '" + ckpt.string() + "': embedded config is not JSON");
  }
  if (!meta.contains("model")) throw DataError("checkpoint '" + ckpt.string() + "': no model config");
  LoadedRun run;
  run.config = model::model_config_from_json(meta["model"]);
  run.vocab = corpus::Vocabulary::load(ckpt.parent_path() / kVocabFile);
  if (run.vocab.size() != run.config.vocab_size) {
    throw DataError("checkpoint expects a vocabulary of " + std::to_string(run.config.vocab_size) +
                    " tokens, " + kVocabFile + " has " + std::to_string(run.vocab.size()));
  }
  run.model = std::make_unique<model::Transformer<Real>>(run.config, 0);
  numerics::restore_parameters(data, run.model->parameters());
  return run;
}

}  // namespace segsum::app
