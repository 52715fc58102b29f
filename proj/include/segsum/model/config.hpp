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
#include <string>

#include "json.hpp"
#include "segsum/error.hpp"

namespace segsum::model {

struct ModelConfig {
  std::size_t n_enc_layers = 2;
  std::size_t n_dec_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_head = 4;
  std::size_t d_ff = 0;  // 0 means 4 * d_model
  // Cross-attention heads 0..c-1 of every decoder layer are segmentation-aware.
  std::size_t seg_heads = 2;
  // Encoder self-attention heads 0..k-1 only see their own and adjacent
  // paragraphs.
  std::size_t enc_local_heads = 0;
  bool src_positions = true;  // learned source position embeddings
  std::size_t vocab_size = 0;
  std::size_t max_src_len = 256;
  std::size_t max_tgt_len = 48;
  double label_smoothing = 0.1;
  double dropout = 0.1;
  bool seg_loss = true;
  double seg_loss_weight = 1.0;

  std::size_t d_head() const { return d_model / n_head; }
  std::size_t ffn_width() const { return d_ff ? d_ff : 4 * d_model; }

  void validate() const {
    auto fail = [](const std::string& what) { throw UsageError("model config: " + what); };
    if (n_enc_layers < 1 || n_dec_layers < 1) fail("layer counts must be >= 1");
    if (n_head < 1 || d_model % n_head != 0) {
      fail("d_model " + std::to_string(d_model) + " not divisible by n_head " +
           std::to_string(n_head));
    }
    if (seg_heads > n_head) {
      fail("c = " + std::to_string(seg_heads) + " exceeds n_head " + std::to_string(n_head));
    }
    if (enc_local_heads > n_head) {
      fail("enc_local_heads = " + std::to_string(enc_local_heads) + " exceeds n_head " +
           std::to_string(n_head));
    }
    if (vocab_size < 7) fail("vocab_size must cover the reserved block plus one token");
    if (max_src_len < 1 || max_tgt_len < 2) fail("sequence limits too small");
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) fail("label_smoothing outside [0, 1)");
    if (dropout < 0.0 || dropout >= 1.0) fail("dropout outside [0, 1)");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return nlohmann::json{{"n_enc_layers", c.n_enc_layers},  {"n_dec_layers", c.n_dec_layers},
                        {"d_model", c.d_model},            {"n_head", c.n_head},
                        {"d_ff", c.ffn_width()},           {"c", c.seg_heads},
                        {"enc_local_heads", c.enc_local_heads}, {"src_positions", c.src_positions},
                        {"vocab_size", c.vocab_size},      {"max_src_len", c.max_src_len},
                        {"max_tgt_len", c.max_tgt_len},    {"label_smoothing", c.label_smoothing},
                        {"dropout", c.dropout},            {"seg_loss", c.seg_loss},
                        {"seg_loss_weight", c.seg_loss_weight}};
}

// Missing keys keep their defaults; unknown keys are ignored so a flat run
// config can be passed straight in.
inline ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig c = {}) {
  try {
    auto read = [&](const char* key, auto& field) {
      if (j.contains(key) && !j[key].is_null()) field = j[key].get<std::decay_t<decltype(field)>>();
    };
    read("n_enc_layers", c.n_enc_layers);
    read("n_dec_layers", c.n_dec_layers);
    read("d_model", c.d_model);
    read("n_head", c.n_head);
    read("d_ff", c.d_ff);
    read("c", c.seg_heads);
    read("enc_local_heads", c.enc_local_heads);
    read("src_positions", c.src_positions);
    read("vocab_size", c.vocab_size);
    read("max_src_len", c.max_src_len);
    read("max_tgt_len", c.max_tgt_len);
    read("label_smoothing", c.label_smoothing);
    read("dropout", c.dropout);
    read("seg_loss", c.seg_loss);
    read("seg_loss_weight", c.seg_loss_weight);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("model config: ") + e.what());
  }
  return c;
}

}  // namespace segsum::model
