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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails. Criterion ids given as arguments restrict the
// run to those criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "segsum/app/commands.hpp"
#include "segsum/app/config.hpp"
#include "segsum/app/data.hpp"
#include "segsum/app/evaluate.hpp"
#include "segsum/app/train.hpp"
#include "segsum/corpus/encode.hpp"
#include "segsum/corpus/synthetic.hpp"
#include "segsum/decoding.hpp"
#include "segsum/metrics.hpp"
#include "segsum/model/seg_mask.hpp"
#include "segsum/model/transformer.hpp"
#include "segsum/numerics/random.hpp"

namespace fs = std::filesystem;
using namespace segsum;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fixed(double v, int digits = 4) { return metrics::format_fixed(v, digits); }

// 1. Gradients of the joint loss against central differences.

Outcome gradient_check() {
  app::GradCheckArgs args;
  args.h = 1e-5;
  args.tolerance = 1e-3;
  args.seg_heads = 1;
  const auto start = std::chrono::steady_clock::now();
  const auto report = app::run_grad_check(args);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double fraction = report.fraction_within_tolerance();
  std::size_t tensors_ok = 0;
  for (const auto& p : report.per_parameter) tensors_ok += p.max_rel_error < 1e-3;
  return {fraction >= 0.99 && seconds < 60.0,
          fixed(fraction) + " of " + std::to_string(report.coordinates) +
              " coordinates within 1e-3 (" + std::to_string(tensors_ok) + "/" +
              std::to_string(report.per_parameter.size()) + " tensors fully), " +
              fixed(seconds, 1) + " s"};
}

// 2. Segmentation-aware heads and the c = 0 model.

Outcome mask_exactness() {
  const auto start = std::chrono::steady_clock::now();
  numerics::Rng rng(2718);
  std::size_t pairs = 0, rows_checked = 0, leaks = 0, mismatches = 0;
  for (int trial = 0; trial < 200; ++trial) {
    corpus::SynthOptions synth;
    synth.n_docs = 1;
    synth.n_topics = 8;
    synth.vocab_per_topic = 4;
    synth.filler_count = 3;
    synth.sections = {1, 4};
    synth.paras_per_section = {1, 3};
    synth.para_len = {1, 5};
    synth.seed = 1000 + static_cast<std::uint64_t>(trial);
    const auto docs = corpus::synth_generate(synth);
    const auto vocab = corpus::build_vocab(docs, 1);

    model::ModelConfig config;
    config.n_head = static_cast<std::size_t>(rng.uniform_int(1, 4));
    config.d_model = 4 * config.n_head * static_cast<std::size_t>(rng.uniform_int(1, 2));
    config.n_enc_layers = static_cast<std::size_t>(rng.uniform_int(1, 2));
    config.n_dec_layers = static_cast<std::size_t>(rng.uniform_int(1, 2));
    config.d_ff = 2 * config.d_model;
    config.seg_heads = static_cast<std::size_t>(rng.uniform_int(0, config.n_head));
    config.vocab_size = vocab.size();
    config.max_src_len = 128;
    config.max_tgt_len = 48;
    config.dropout = 0.0;
    const auto ex = corpus::encode_document(docs[0], vocab, config.max_src_len, config.max_tgt_len);
    const std::span<const int> input(ex.tgt_ids.data(), ex.tgt_ids.size() - 1);
    const std::span<const int> rows = std::span<const int>(ex.tgt_section_of_token).subspan(1);
    const model::SegMask seg = model::build_seg_mask(ex.src_section_of_token, rows);
    const std::uint64_t seed = 50 + static_cast<std::uint64_t>(trial);

    model::Transformer<double> aware(config, seed);
    const auto enc = aware.encode(ex.src_ids);
    std::vector<numerics::AttentionTrace<double>> traces;
    aware.decode(enc, input, &seg, {}, &traces);
    for (const auto& trace : traces) {
      for (std::size_t h = 0; h < config.seg_heads; ++h) {
        for (std::size_t i = 0; i < input.size(); ++i) {
          if (seg.fallback_rows[i]) continue;
          ++rows_checked;
          for (std::size_t j = 0; j < ex.src_ids.size(); ++j) {
            if (ex.src_section_of_token[j] != seg.row_sections[i] && trace.prob(h, i, j) != 0.0) {
              ++leaks;
            }
          }
        }
      }
    }

    // Same weights: the parameters do not depend on c.
    model::ForwardOptions vanilla;
    vanilla.attention = model::CrossAttentionMode::kVanilla;
    const auto reference = aware.decode(enc, input, nullptr, vanilla);
    config.seg_heads = 0;
    model::Transformer<double> plain(config, seed);
    const auto plain_enc = plain.encode(ex.src_ids);
    for (const auto& out : {plain.decode(plain_enc, input, &seg),
                            plain.decode(plain_enc, input, nullptr, vanilla)}) {
      if (!std::equal(out.values().begin(), out.values().end(), reference.values().begin(),
                      reference.values().end())) {
        ++mismatches;
      }
    }
    ++pairs;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {leaks == 0 && mismatches == 0 && rows_checked > 0 && seconds < 30.0,
          std::to_string(pairs) + " pairs, " + std::to_string(rows_checked) +
              " aware rows, " + std::to_string(leaks) + " leaked probabilities, " +
              std::to_string(mismatches) + " c=0 mismatches, " + fixed(seconds, 1) + " s"};
}

// 3. Pk and WinDiff against direct window enumeration.

bool separated(const metrics::Segmentation& s, std::size_t i, std::size_t j) {
  for (int b : s.boundaries) {
    if (static_cast<std::size_t>(b) > i && static_cast<std::size_t>(b) <= j) return true;
  }
  return false;
}

int boundaries_between(const metrics::Segmentation& s, std::size_t i, std::size_t j) {
  int n = 0;
  for (int b : s.boundaries) n += static_cast<std::size_t>(b) > i && static_cast<std::size_t>(b) <= j;
  return n;
}

double brute_force(const metrics::Segmentation& ref, const metrics::Segmentation& hyp,
                   std::size_t k, bool windiff) {
  std::size_t bad = 0, total = 0;
  for (std::size_t i = 0; i + k < ref.num_units; ++i, ++total) {
    const bool differs =
        windiff ? boundaries_between(ref, i, i + k) != boundaries_between(hyp, i, i + k)
                : separated(ref, i, i + k) != separated(hyp, i, i + k);
    bad += differs;
  }
  return static_cast<double>(bad) / static_cast<double>(total);
}

metrics::Segmentation random_segmentation(std::size_t m, numerics::Rng& rng, double rate) {
  std::vector<int> b;
  for (std::size_t g = 1; g < m; ++g) {
    if (rng.bernoulli(rate)) b.push_back(static_cast<int>(g));
  }
  return {m, b};
}

Outcome metric_oracles() {
  numerics::Rng rng(31337);
  std::size_t compared = 0, wrong = 0, identity_nonzero = 0;
  while (compared < 1000) {
    const std::size_t m = static_cast<std::size_t>(rng.uniform_int(2, 30));
    const auto ref = random_segmentation(m, rng, 0.1 + 0.5 * rng.uniform());
    const auto hyp = random_segmentation(m, rng, 0.1 + 0.5 * rng.uniform());
    const std::size_t k = metrics::default_window(ref);
    if (m <= k) continue;
    ++compared;
    wrong += metrics::pk(ref, hyp) != brute_force(ref, hyp, k, false);
    wrong += metrics::windiff(ref, hyp) != brute_force(ref, hyp, k, true);
    identity_nonzero += metrics::pk(ref, ref) != 0.0 || metrics::windiff(ref, ref) != 0.0;
  }

  corpus::SynthOptions synth;
  synth.n_docs = 10000;
  const auto docs = corpus::synth_generate(synth);
  std::vector<metrics::DocumentPrediction> preds;
  for (const auto& doc : docs) {
    preds.push_back({doc.id, random_segmentation(doc.paragraph_count(), rng, 0.5).boundaries, {}});
  }
  const double mean_pk = metrics::evaluate_run(docs, preds, metrics::RougeMode::kConcat).pk;
  return {wrong == 0 && identity_nonzero == 0 && std::abs(mean_pk - 0.5) <= 0.05,
          std::to_string(compared) + " pairs, " + std::to_string(wrong) +
              " disagreements, identity nonzero " + std::to_string(identity_nonzero) +
              ", random mean Pk " + fixed(mean_pk) + " over " + std::to_string(docs.size())};
}

// 4. ROUGE hand counts and symmetry.

Outcome rouge_examples() {
  using metrics::TokenList;
  bool ok = true;
  const auto unigram = metrics::rouge_n({"the", "cat", "sat"}, {"the", "cat"}, 1);
  ok = ok && unigram.f1 == 2 * (2.0 / 3.0) * 1.0 / (2.0 / 3.0 + 1.0);
  ok = ok && std::abs(unigram.f1 - 0.8) < 1e-15;
  const auto lcs = metrics::rouge_l({"a", "b", "c", "d"}, {"a", "c", "d"});
  ok = ok && std::abs(lcs.f1 - 6.0 / 7.0) < 1e-15;
  const TokenList same = {"x", "y", "z"};
  ok = ok && metrics::rouge_n(same, same, 1).f1 == 1.0 && metrics::rouge_n(same, same, 2).f1 == 1.0 &&
       metrics::rouge_l(same, same).f1 == 1.0;

  numerics::Rng rng(404);
  const std::vector<std::string> words = {"a", "b", "c", "d", "e"};
  std::size_t swaps = 0, bad_swaps = 0;
  for (int trial = 0; trial < 500; ++trial) {
    TokenList x, y;
    for (auto i = rng.uniform_int(1, 8); i > 0; --i) x.push_back(words[rng.uniform_int(0, 4)]);
    for (auto i = rng.uniform_int(1, 8); i > 0; --i) y.push_back(words[rng.uniform_int(0, 4)]);
    const std::vector<std::pair<metrics::PRF, metrics::PRF>> pairs = {
        {metrics::rouge_n(x, y, 1), metrics::rouge_n(y, x, 1)},
        {metrics::rouge_n(x, y, 2), metrics::rouge_n(y, x, 2)},
        {metrics::rouge_l(x, y), metrics::rouge_l(y, x)}};
    for (const auto& [a, b] : pairs) {
      ++swaps;
      bad_swaps += a.precision != b.recall || a.recall != b.precision;
    }
  }
  return {ok && bad_swaps == 0,
          "unigram F1 " + fixed(unigram.f1, 6) + ", LCS F1 " + fixed(lcs.f1, 6) +
              ", identity 1, " + std::to_string(bad_swaps) + "/" + std::to_string(swaps) +
              " asymmetric swaps"};
}

// 5. Heading-count constraint and exhaustive search.

// Next-token log-probabilities that depend only on the prefix.
std::vector<double> table_scores(std::span<const int> prefix, std::size_t vocab,
                                 std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (int id : prefix) h = (h ^ static_cast<std::uint64_t>(id + 1)) * 1099511628211ULL;
  numerics::Rng rng(h);
  std::vector<double> z(vocab);
  for (double& v : z) v = rng.normal();
  const double peak = *std::max_element(z.begin(), z.end());
  double denom = 0;
  for (double v : z) denom += std::exp(v - peak);
  for (double& v : z) v = v - peak - std::log(denom);
  return z;
}

struct Best {
  double score = decoding::kNegInf;
  std::vector<int> tokens;  // with [BOS]
};

void enumerate(std::size_t vocab, std::uint64_t seed, int k, std::size_t max_len, double alpha,
               std::vector<int>& prefix, double log_prob, int ysep, Best& best) {
  if (prefix.size() - 1 == max_len) return;
  const auto lp = table_scores(prefix, vocab, seed);
  for (std::size_t v = 0; v < vocab; ++v) {
    const int token = static_cast<int>(v);
    const double c = decoding::constrained_log_prob(token, lp[v], ysep, k);
    if (c == decoding::kNegInf) continue;
    prefix.push_back(token);
    if (token == corpus::kEos) {
      const double score = (log_prob + c) / decoding::length_penalty(prefix.size() - 1, alpha);
      if (best.tokens.empty() || decoding::detail::better(score, prefix, best.score, best.tokens)) {
        best.score = score;
        best.tokens = prefix;
      }
    } else {
      enumerate(vocab, seed, k, max_len, alpha, prefix, log_prob + c, ysep + (token == corpus::kYSep),
                best);
    }
    prefix.pop_back();
  }
}

Outcome decoding_constraint() {
  corpus::SynthOptions synth;
  synth.n_docs = 100;
  synth.n_topics = 8;
  synth.vocab_per_topic = 4;
  synth.filler_count = 3;
  synth.sections = {1, 5};
  synth.paras_per_section = {1, 2};
  synth.para_len = {2, 4};
  synth.seed = 5;
  const auto docs = corpus::synth_generate(synth);
  const auto vocab = corpus::build_vocab(docs, 1);
  model::ModelConfig config;
  config.n_enc_layers = 1;
  config.n_dec_layers = 1;
  config.d_model = 16;
  config.n_head = 2;
  config.seg_heads = 1;
  config.vocab_size = vocab.size();
  config.max_src_len = 128;
  config.max_tgt_len = 24;
  config.dropout = 0.0;
  model::Transformer<double> model(config, 9);

  numerics::Rng rng(77);
  std::size_t decodes = 0, matched = 0;
  std::vector<std::size_t> section_counts;
  for (int i = 0; i < 500; ++i) {
    const auto& doc = docs[static_cast<std::size_t>(i) % docs.size()];
    const auto ex = corpus::encode_source(doc, vocab, config.max_src_len);
    const double threshold = rng.uniform();
    const auto pred = model.forward_infer_sections(ex.src_ids, ex.xsep_positions, threshold);
    const bool flag = rng.bernoulli(0.5);
    const int k = decoding::required_headings(pred.section_count, flag).count;
    decoding::ModelScorer<double> scorer(model, pred.encoder, pred.src_section_of_token,
                                         flag ? 1 : 2);
    const decoding::BeamOptions options{static_cast<std::size_t>(rng.uniform_int(1, 4)), 0.8,
                                        static_cast<std::size_t>(rng.uniform_int(1, 23))};
    const auto result = decoding::beam_search(scorer, {k, flag ? 1 : 2}, options);
    ++decodes;
    matched += static_cast<int>(result.headings.size()) == k;
    section_counts.push_back(pred.section_count);
  }
  std::sort(section_counts.begin(), section_counts.end());
  section_counts.erase(std::unique(section_counts.begin(), section_counts.end()),
                       section_counts.end());

  // [EOS], [Y_SEP], [UNK] and two ordinary tokens are admissible.
  const std::size_t table_vocab = corpus::kReservedCount + 2;
  std::size_t instances = 0, equal = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    for (std::size_t max_len = 1; max_len <= 5; ++max_len) {
      const int k = 1 + static_cast<int>(seed % 3);
      if (static_cast<std::size_t>(k) > max_len) continue;
      const double alpha = 0.5 + 0.1 * static_cast<double>(seed % 6);
      Best best;
      std::vector<int> prefix = {corpus::kBos};
      enumerate(table_vocab, seed, k, max_len, alpha, prefix, 0.0, 0, best);
      auto scorer = [&](std::span<const int> p, int) { return table_scores(p, table_vocab, seed); };
      const auto result = decoding::beam_search(scorer, {k, 1}, {1000000, alpha, max_len});
      ++instances;
      equal += !best.tokens.empty() && !result.degenerate &&
               result.tokens == std::vector<int>(best.tokens.begin() + 1, best.tokens.end());
    }
  }
  return {matched == decodes && equal == instances,
          std::to_string(matched) + "/" + std::to_string(decodes) + " decodes with K headings (" +
              std::to_string(section_counts.size()) + " distinct section counts), " +
              std::to_string(equal) + "/" + std::to_string(instances) +
              " full-width beams equal exhaustive search"};
}

// 6-8. Training runs on the synthetic corpus.

struct ToyRun {
  app::TrainResult train;
  std::vector<metrics::MetricsReport> reports;  // gold, predicted
  double train_seconds = 0;
  double total_seconds = 0;
};

app::RunConfig toy_config(const fs::path& data, const fs::path& out, std::size_t c) {
  app::RunConfig config;
  config.train_path = (data / "train.jsonl").string();
  config.valid_path = (data / "valid.jsonl").string();
  config.test_path = (data / "test.jsonl").string();
  config.out_dir = out.string();
  config.seed = 1;
  config.epochs = 20;
  config.model.seg_heads = c;
  config.model.enc_local_heads = config.model.n_head;
  config.model.src_positions = false;
  config.model.dropout = 0.2;
  config.recombine_sections = true;
  return config;
}

ToyRun run_toy(const app::RunConfig& config) {
  std::ostringstream log;
  ToyRun run;
  const auto start = std::chrono::steady_clock::now();
  run.train = app::train_run(config, log);
  const auto trained = std::chrono::steady_clock::now();
  run.reports = app::evaluate_run_dir(config, config.out_dir, log);
  run.train_seconds = std::chrono::duration<double>(trained - start).count();
  run.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

const metrics::MetricsReport& report_for(const ToyRun& run, const std::string& setting) {
  for (const auto& r : run.reports) {
    if (r.setting == setting) return r;
  }
  throw std::runtime_error("no " + setting + " report");
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Criterion {
  int id;
  std::string name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  const fs::path work = fs::absolute("acceptance_work");
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path data = work / "data";

  // Default corpus size and generator, topics shared between the splits.
  app::GenerateDataArgs gen;
  gen.out_dir = data.string();
  gen.policy = app::SplitPolicy::kSharedTopics;
  std::ostringstream quiet;

  ToyRun aware, plain;
  bool toy_ok = false;
  std::string toy_error;
  auto ensure_toy_runs = [&] {
    if (toy_ok || !toy_error.empty()) return;
    try {
      app::cmd_generate_data(gen, quiet);
      aware = run_toy(toy_config(data, work / "c2", 2));
      plain = run_toy(toy_config(data, work / "c0", 0));
      toy_ok = true;
    } catch (const std::exception& e) {
      toy_error = e.what();
    }
  };

  const std::vector<Criterion> criteria = {
      {1, "gradient check", gradient_check},
      {2, "segmentation mask exactness", mask_exactness},
      {3, "Pk/WinDiff oracle equivalence", metric_oracles},
      {4, "ROUGE hand counts", rouge_examples},
      {5, "decoding heading-count constraint", decoding_constraint},
      {6, "toy task: c>0 segments and titles, beats c=0", [&]() -> Outcome {
         ensure_toy_runs();
         if (!toy_ok) return {false, toy_error};
         const auto& pred = report_for(aware, "predicted-segments");
         const double f1 = pred.boundary_f1;
         const double acc = pred.extra.at("heading_token_accuracy");
         const double acc0 = report_for(plain, "predicted-segments").extra.at("heading_token_accuracy");
         const bool fast = aware.train_seconds < 600 && plain.train_seconds < 600;
         return {f1 >= 0.95 && acc >= 0.90 && acc > acc0 && fast,
                 "c=2 boundary F1 " + fixed(f1) + ", heading token accuracy " + fixed(acc) +
                     " vs c=0 " + fixed(acc0) + ", train " + fixed(aware.train_seconds, 0) +
                     " s / " + fixed(plain.train_seconds, 0) + " s for " +
                     std::to_string(aware.train.history.size()) + " epochs"};
       }},
      {7, "gold-segment ROUGE-1 >= predicted-segment ROUGE-1", [&]() -> Outcome {
         ensure_toy_runs();
         if (!toy_ok) return {false, toy_error};
         const double gold = report_for(aware, "gold-segments").rouge1;
         const double pred = report_for(aware, "predicted-segments").rouge1;
         return {gold >= pred, "gold " + fixed(gold) + ", predicted " + fixed(pred)};
       }},
      {8, "determinism of train + evaluate", [&]() -> Outcome {
         try {
           if (!fs::exists(data / "train.jsonl")) app::cmd_generate_data(gen, quiet);
           std::vector<std::string> files = {"report_gold.json", "report_gold.txt",
                                             "report_predicted.json", "report_predicted.txt"};
           std::vector<std::vector<std::string>> contents;
           for (const char* name : {"det_a", "det_b"}) {
             auto config = toy_config(data, work / name, 2);
             config.epochs = 2;
             run_toy(config);
             auto& c = contents.emplace_back();
             for (const auto& f : files) c.push_back(slurp(work / name / f));
           }
           std::size_t identical = 0;
           for (std::size_t i = 0; i < files.size(); ++i) {
             identical += !contents[0][i].empty() && contents[0][i] == contents[1][i];
           }
           return {identical == files.size(), std::to_string(identical) + "/" +
                                                  std::to_string(files.size()) +
                                                  " report files byte-identical"};
         } catch (const std::exception& e) {
           return {false, e.what()};
         }
       }},
  };

  int failures = 0;
  std::size_t ran = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !outcome.pass;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " criterion " << c.id << ": " << c.name
              << " | " << outcome.detail << " | " << fixed(seconds, 1) << " s" << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << (ran - failures) << "/" << ran
            << std::endl;
  return failures ? 1 : 0;
}
