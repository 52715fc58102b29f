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
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "segsum/corpus/encode.hpp"
#include "segsum/model/config.hpp"
#include "segsum/model/seg_mask.hpp"
#include "segsum/numerics/losses.hpp"
#include "segsum/numerics/ops.hpp"
#include "segsum/numerics/optim.hpp"
#include "segsum/numerics/random.hpp"

namespace segsum::model {

using numerics::Mask;
using numerics::Tensor;

enum class CrossAttentionMode {
  kSegmentationAware,
  // Plain encoder-decoder attention that never looks at a segmentation mask.
  kVanilla,
};

struct ForwardOptions {
  bool training = false;  // enables dropout
  numerics::Rng* rng = nullptr;
  CrossAttentionMode attention = CrossAttentionMode::kSegmentationAware;
};

template <typename T>
struct EncoderState {
  Tensor<T> states;                    // src_len x d_model
  std::vector<std::uint8_t> key_keep;  // 0 at [PAD] positions
};

template <typename T>
struct BoundaryPrediction {
  Tensor<T> logits;  // undefined when there are no separators
  std::vector<double> probs;
  std::vector<int> decisions;
  std::vector<int> boundaries;  // paragraph indices after which a section ends
};

template <typename T>
struct ModelOutput {
  std::vector<double> boundary_probs;
  Tensor<T> token_logits;  // (tgt_len - 1) x vocab
  Tensor<T> seg_loss;
  Tensor<T> gen_loss;
  Tensor<T> loss;
  bool has_seg_loss = false;
  std::size_t correct_tokens = 0;
  std::size_t target_tokens = 0;
};

// Decision i is 1 iff probs[i] > threshold; a 1 at separator i puts a
// boundary after paragraph i + 1.
inline void decide_boundaries(std::span<const double> probs, double threshold,
                              std::vector<int>& decisions, std::vector<int>& boundaries) {
  decisions.clear();
  boundaries.clear();
  for (std::size_t i = 0; i < probs.size(); ++i) {
    decisions.push_back(probs[i] > threshold ? 1 : 0);
    if (decisions.back()) boundaries.push_back(static_cast<int>(i) + 1);
  }
}

template <typename T>
struct SectionPrediction {
  EncoderState<T> encoder;
  BoundaryPrediction<T> boundaries;
  std::vector<int> src_section_of_token;
  std::size_t section_count = 1;
};

// Encoder-decoder transformer with a boundary classifier over [X_SEP]
// outputs and segmentation-aware cross-attention in the first c heads of
// every decoder layer. Pre-layer-norm residual blocks, learned positions,
// output projection tied to the token embedding.
template <typename T>
class Transformer {
 public:
  Transformer(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    numerics::Rng rng(seed);
    const std::size_t d = config_.d_model;
    embed_ = &normal("embed.tokens", {config_.vocab_size, d}, 0.05, rng);
    if (config_.src_positions) {
      src_pos_ = &normal("embed.src_pos", {config_.max_src_len, d}, 0.05, rng);
    }
    tgt_pos_ = &normal("embed.tgt_pos", {config_.max_tgt_len, d}, 0.05, rng);
    for (std::size_t l = 0; l < config_.n_enc_layers; ++l) {
      const std::string p = "enc." + std::to_string(l) + ".";
      enc_.push_back(EncoderLayer{norm(p + "ln1"), attention(p + "self", rng), norm(p + "ln2"),
                                  feed_forward(p + "ffn", rng)});
    }
    enc_final_ = norm("enc.final_ln");
    for (std::size_t l = 0; l < config_.n_dec_layers; ++l) {
      const std::string p = "dec." + std::to_string(l) + ".";
      dec_.push_back(DecoderLayer{norm(p + "ln1"), attention(p + "self", rng), norm(p + "ln2"),
                                  attention(p + "cross", rng), norm(p + "ln3"),
                                  feed_forward(p + "ffn", rng)});
    }
    dec_final_ = norm("dec.final_ln");
    boundary_w_ = &normal("boundary.w", {d, 1}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    boundary_b_ = &zeros("boundary.b", {1});
    out_bias_ = &zeros("out.bias", {config_.vocab_size});
  }

  Transformer(const Transformer&) = delete;
  Transformer& operator=(const Transformer&) = delete;

  const ModelConfig& config() const { return config_; }
  numerics::ParameterSet<T>& parameters() { return params_; }
  const numerics::ParameterSet<T>& parameters() const { return params_; }

  EncoderState<T> encode(std::span<const int> src_ids, const ForwardOptions& opt = {}) const {
    if (src_ids.empty()) throw DataError("encode: empty source");
    if (src_ids.size() > config_.max_src_len) {
      throw DataError("encode: source length " + std::to_string(src_ids.size()) +
                      " exceeds max_src_len " + std::to_string(config_.max_src_len));
    }
    EncoderState<T> out;
    out.key_keep.resize(src_ids.size());
    for (std::size_t i = 0; i < src_ids.size(); ++i) out.key_keep[i] = src_ids[i] != corpus::kPad;
    const Mask keys = Mask::broadcast_row(src_ids.size(), out.key_keep);
    const Mask local = config_.enc_local_heads ? numerics::intersect(keys, paragraph_window(src_ids))
                                               : Mask{};
    std::vector<const Mask*> masks(config_.n_head, &keys);
    for (std::size_t z = 0; z < config_.enc_local_heads; ++z) masks[z] = &local;
    Tensor<T> x = embed(src_ids, config_.src_positions ? src_pos_ : nullptr, opt);
    for (const auto& layer : enc_) {
      Tensor<T> h = layer_norm(x, layer.ln1);
      x = numerics::add(x, drop(self_or_cross(layer.self, h, h, masks), opt));
      x = numerics::add(x, drop(ffn(layer.ffn, layer_norm(x, layer.ln2), opt), opt));
    }
    out.states = layer_norm(x, enc_final_);
    return out;
  }

  // Logistic boundary classifier over the [X_SEP] outputs. A separator is a
  // break iff its probability exceeds `threshold`.
  BoundaryPrediction<T> predict_boundaries(const EncoderState<T>& enc,
                                           std::span<const int> xsep_positions,
                                           double threshold = 0.5) const {
    BoundaryPrediction<T> out;
    if (xsep_positions.empty()) return out;
    for (int pos : xsep_positions) {
      if (pos < 0 || static_cast<std::size_t>(pos) >= enc.states.rows()) {
        throw DataError("predict_boundaries: separator position " + std::to_string(pos) +
                        " outside source");
      }
    }
    Tensor<T> u = numerics::gather_rows(enc.states, xsep_positions);
    out.logits = numerics::add_row(numerics::matmul(u, *boundary_w_), *boundary_b_);
    for (std::size_t i = 0; i < xsep_positions.size(); ++i) {
      out.probs.push_back(numerics::sigmoid(static_cast<double>(out.logits.values()[i])));
    }
    decide_boundaries(out.probs, threshold, out.decisions, out.boundaries);
    return out;
  }

  // Decoder logits for `tgt_input` (teacher-forced prefix). `seg_mask` rows
  // align with decoder positions; it is ignored in vanilla mode.
  Tensor<T> decode(const EncoderState<T>& enc, std::span<const int> tgt_input,
                   const SegMask* seg_mask, const ForwardOptions& opt = {},
                   std::vector<numerics::AttentionTrace<T>>* cross_traces = nullptr) const {
    const std::size_t tq = tgt_input.size(), tk = enc.states.rows();
    if (tq == 0) throw DataError("decode: empty target prefix");
    if (tq > config_.max_tgt_len) {
      throw DataError("decode: target length " + std::to_string(tq) + " exceeds max_tgt_len " +
                      std::to_string(config_.max_tgt_len));
    }
    std::vector<std::uint8_t> tgt_keep(tq);
    for (std::size_t i = 0; i < tq; ++i) tgt_keep[i] = tgt_input[i] != corpus::kPad;
    Mask self_mask = numerics::intersect(Mask::causal(tq), Mask::broadcast_row(tq, tgt_keep));
    for (std::size_t i = 0; i < tq; ++i) self_mask.set(i, i, 1);
    const Mask pad = Mask::broadcast_row(tq, enc.key_keep);

    std::vector<const Mask*> cross_masks(config_.n_head, &pad);
    Mask seg_and_pad;
    if (opt.attention == CrossAttentionMode::kSegmentationAware && config_.seg_heads > 0) {
      if (!seg_mask || seg_mask->rows() != tq || seg_mask->cols() != tk) {
        throw numerics::ShapeError(
            "cross_attention",
            "segmentation mask " +
                (seg_mask ? numerics::shape_string({seg_mask->rows(), seg_mask->cols()})
                          : std::string("missing")) +
                " for " + numerics::shape_string({tq, tk}));
      }
      seg_and_pad = numerics::intersect(seg_mask->mask, pad);
      for (std::size_t i = 0; i < tq; ++i) {
        if (seg_and_pad.row_empty(i)) {
          std::copy_n(pad.row(i), tk, seg_and_pad.bits.begin() + i * tk);
        }
      }
      for (std::size_t h = 0; h < config_.seg_heads; ++h) cross_masks[h] = &seg_and_pad;
    }
    const std::vector<const Mask*> self_masks(config_.n_head, &self_mask);

    Tensor<T> x = embed(tgt_input, tgt_pos_, opt);
    if (cross_traces) cross_traces->clear();
    for (const auto& layer : dec_) {
      Tensor<T> h = layer_norm(x, layer.ln1);
      x = numerics::add(x, drop(self_or_cross(layer.self, h, h, self_masks), opt));
      h = layer_norm(x, layer.ln2);
      numerics::AttentionTrace<T>* trace = nullptr;
      if (cross_traces) trace = &cross_traces->emplace_back();
      x = numerics::add(x, drop(self_or_cross(layer.cross, h, enc.states, cross_masks, trace), opt));
      x = numerics::add(x, drop(ffn(layer.ffn, layer_norm(x, layer.ln3), opt), opt));
    }
    Tensor<T> final_states = layer_norm(x, dec_final_);
    return numerics::add_row(numerics::matmul(final_states, numerics::transpose(*embed_)),
                             *out_bias_);
  }

  // Teacher-forced joint loss L = L_seg + L_gen with gold sections.
  ModelOutput<T> forward_train(const corpus::EncodedExample& ex,
                               const ForwardOptions& opt = {}) const {
    if (ex.tgt_ids.size() < 2) throw DataError("forward_train: target needs [BOS] and [EOS]");
    ModelOutput<T> out;
    EncoderState<T> enc = encode(ex.src_ids, opt);

    out.has_seg_loss = config_.seg_loss;
    out.seg_loss = Tensor<T>::scalar(T(0));
    if (!ex.xsep_positions.empty()) {
      BoundaryPrediction<T> pred = predict_boundaries(enc, ex.xsep_positions);
      out.boundary_probs = pred.probs;
      if (config_.seg_loss) {
        out.seg_loss = numerics::binary_cross_entropy_with_logits(pred.logits, ex.boundary_labels);
        if (config_.seg_loss_weight != 1.0) {
          out.seg_loss = numerics::scale(out.seg_loss, static_cast<T>(config_.seg_loss_weight));
        }
      }
    }

    std::span<const int> tgt(ex.tgt_ids);
    std::span<const int> input = tgt.first(tgt.size() - 1);
    std::span<const int> targets = tgt.subspan(1);
    // Decoder row i predicts token i + 1 and attends to that token's section.
    std::span<const int> row_sections = std::span<const int>(ex.tgt_section_of_token).subspan(1);
    const SegMask seg = build_seg_mask(ex.src_section_of_token, row_sections);
    out.token_logits = decode(enc, input, &seg, opt);
    out.gen_loss = numerics::cross_entropy_label_smoothed(out.token_logits, targets,
                                                          config_.label_smoothing, corpus::kPad);
    out.loss = numerics::add(out.seg_loss, out.gen_loss);

    const std::size_t vocab = out.token_logits.cols();
    for (std::size_t i = 0; i < targets.size(); ++i) {
      if (targets[i] == corpus::kPad) continue;
      const T* row = out.token_logits.data() + i * vocab;
      const auto best = static_cast<int>(std::max_element(row, row + vocab) - row);
      ++out.target_tokens;
      if (best == targets[i]) ++out.correct_tokens;
    }
    return out;
  }

  // Encodes, classifies boundaries and derives the per-token section map.
  SectionPrediction<T> forward_infer_sections(std::span<const int> src_ids,
                                              std::span<const int> xsep_positions,
                                              double threshold = 0.5) const {
    numerics::NoGradGuard no_grad;
    SectionPrediction<T> out;
    out.encoder = encode(src_ids);
    out.boundaries = predict_boundaries(out.encoder, xsep_positions, threshold);
    std::vector<int> decisions = out.boundaries.decisions;
    if (decisions.empty()) decisions.assign(xsep_positions.size(), 0);
    out.src_section_of_token =
        corpus::section_map_from_decisions(src_ids.size(), xsep_positions, decisions);
    out.section_count = out.boundaries.boundaries.size() + 1;
    return out;
  }

  // Log-probabilities of the token following `prefix` (which starts with
  // [BOS]). The segmentation-aware heads of row i attend to section
  // `section_offset` + number of [Y_SEP] in prefix[0..i].
  std::vector<double> next_token_log_probs(const EncoderState<T>& enc,
                                           std::span<const int> src_section_of_token,
                                           std::span<const int> prefix,
                                           int section_offset,
                                           CrossAttentionMode mode =
                                               CrossAttentionMode::kSegmentationAware) const {
    numerics::NoGradGuard no_grad;
    std::vector<int> rows;
    int section = section_offset;
    for (int id : prefix) {
      if (id == corpus::kYSep) ++section;
      rows.push_back(section);
    }
    const SegMask seg = build_seg_mask(src_section_of_token, rows);
    ForwardOptions opt;
    opt.attention = mode;
    Tensor<T> logits = decode(enc, prefix, &seg, opt);
    const std::size_t vocab = logits.cols();
    const T* last = logits.data() + (prefix.size() - 1) * vocab;
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t v = 0; v < vocab; ++v) peak = std::max(peak, static_cast<double>(last[v]));
    double denom = 0;
    for (std::size_t v = 0; v < vocab; ++v) denom += std::exp(static_cast<double>(last[v]) - peak);
    const double lse = peak + std::log(denom);
    std::vector<double> out(vocab);
    for (std::size_t v = 0; v < vocab; ++v) out[v] = static_cast<double>(last[v]) - lse;
    return out;
  }

 private:
  struct Norm {
    Tensor<T>* gamma;
    Tensor<T>* beta;
  };
  struct Attention {
    Tensor<T>*wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
  };
  struct FeedForward {
    Tensor<T>*w1, *b1, *w2, *b2;
  };
  struct EncoderLayer {
    Norm ln1;
    Attention self;
    Norm ln2;
    FeedForward ffn;
  };
  struct DecoderLayer {
    Norm ln1;
    Attention self;
    Norm ln2;
    Attention cross;
    Norm ln3;
    FeedForward ffn;
  };

  Tensor<T>& normal(const std::string& name, numerics::Shape shape, double stddev,
                    numerics::Rng& rng) {
    std::vector<T> values(numerics::shape_size(shape));
    for (T& v : values) v = static_cast<T>(rng.normal(0.0, stddev));
    return params_.add(name, Tensor<T>::from(std::move(shape), std::move(values)));
  }
  Tensor<T>& zeros(const std::string& name, numerics::Shape shape) {
    return params_.add(name, Tensor<T>::zeros(std::move(shape)));
  }
  Tensor<T>& ones(const std::string& name, numerics::Shape shape) {
    std::vector<T> values(numerics::shape_size(shape), T(1));
    return params_.add(name, Tensor<T>::from(std::move(shape), std::move(values)));
  }
  Norm norm(const std::string& prefix) {
    return Norm{&ones(prefix + ".gamma", {config_.d_model}),
                &zeros(prefix + ".beta", {config_.d_model})};
  }
  Attention attention(const std::string& prefix, numerics::Rng& rng) {
    const std::size_t d = config_.d_model;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    Attention a{};
    a.wq = &normal(prefix + ".wq", {d, d}, s, rng);
    a.bq = &zeros(prefix + ".bq", {d});
    a.wk = &normal(prefix + ".wk", {d, d}, s, rng);
    a.bk = &zeros(prefix + ".bk", {d});
    a.wv = &normal(prefix + ".wv", {d, d}, s, rng);
    a.bv = &zeros(prefix + ".bv", {d});
    a.wo = &normal(prefix + ".wo", {d, d}, s, rng);
    a.bo = &zeros(prefix + ".bo", {d});
    return a;
  }
  FeedForward feed_forward(const std::string& prefix, numerics::Rng& rng) {
    const std::size_t d = config_.d_model, f = config_.ffn_width();
    FeedForward ff{};
    ff.w1 = &normal(prefix + ".w1", {d, f}, 1.0 / std::sqrt(static_cast<double>(d)), rng);
    ff.b1 = &zeros(prefix + ".b1", {f});
    ff.w2 = &normal(prefix + ".w2", {f, d}, 1.0 / std::sqrt(static_cast<double>(f)), rng);
    ff.b2 = &zeros(prefix + ".b2", {d});
    return ff;
  }

  static Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    return numerics::add_row(numerics::matmul(x, w), b);
  }
  static Tensor<T> layer_norm(const Tensor<T>& x, const Norm& n) {
    return numerics::layer_norm(x, *n.gamma, *n.beta);
  }
  Tensor<T> drop(const Tensor<T>& x, const ForwardOptions& opt) const {
    if (!opt.training || config_.dropout <= 0.0 || !opt.rng) return x;
    return numerics::dropout(x, config_.dropout, *opt.rng);
  }
  Tensor<T> embed(std::span<const int> ids, const Tensor<T>* pos_table,
                  const ForwardOptions& opt) const {
    Tensor<T> tokens = numerics::embedding_lookup(*embed_, ids);
    if (!pos_table) return drop(tokens, opt);
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) positions[i] = static_cast<int>(i);
    return drop(numerics::add(tokens, numerics::gather_rows(*pos_table, positions)), opt);
  }
  // Keeps (i, j) iff j lies in the paragraph of i or a neighbouring one. A
  // separator sits between the two paragraphs it joins.
  static Mask paragraph_window(std::span<const int> ids) {
    std::vector<long> slot(ids.size());
    long p = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == corpus::kXSep) {
        slot[i] = 2 * p + 1;
        ++p;
      } else {
        slot[i] = 2 * p;
      }
    }
    Mask m(ids.size(), ids.size(), 0);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        if (std::abs(slot[i] - slot[j]) <= 2) m.set(i, j, 1);
      }
    }
    return m;
  }
  Tensor<T> self_or_cross(const Attention& a, const Tensor<T>& query_in,
                          const Tensor<T>& memory, std::span<const Mask* const> masks,
                          numerics::AttentionTrace<T>* trace = nullptr) const {
    Tensor<T> q = linear(query_in, *a.wq, *a.bq);
    Tensor<T> k = linear(memory, *a.wk, *a.bk);
    Tensor<T> v = linear(memory, *a.wv, *a.bv);
    Tensor<T> attended = numerics::multi_head_attention(q, k, v, config_.n_head, masks, trace);
    return linear(attended, *a.wo, *a.bo);
  }
  Tensor<T> ffn(const FeedForward& f, const Tensor<T>& x, const ForwardOptions& opt) const {
    return linear(drop(numerics::gelu(linear(x, *f.w1, *f.b1)), opt), *f.w2, *f.b2);
  }

  ModelConfig config_;
  numerics::ParameterSet<T> params_;
  Tensor<T>* embed_ = nullptr;
  Tensor<T>* src_pos_ = nullptr;
  Tensor<T>* tgt_pos_ = nullptr;
  std::vector<EncoderLayer> enc_;
  Norm enc_final_{};
  std::vector<DecoderLayer> dec_;
  Norm dec_final_{};
  Tensor<T>* boundary_w_ = nullptr;
  Tensor<T>* boundary_b_ = nullptr;
  Tensor<T>* out_bias_ = nullptr;
};

}  // namespace segsum::model
