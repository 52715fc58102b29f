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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "segsum/numerics/checkpoint.hpp"
#include "segsum/numerics/grad_check.hpp"
#include "segsum/numerics/losses.hpp"
#include "segsum/numerics/ops.hpp"
#include "segsum/numerics/optim.hpp"
#include "test_util.hpp"

namespace segsum::numerics {
namespace {

using testing::max_fd_error;
using testing::random_tensor;
using testing::weighted_sum;

TEST(CoreOps, MatmulShape) {
  auto a = Tensor<double>::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = Tensor<double>::from({3, 1}, {1, 0, -1});
  auto c = matmul(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 1}));
  EXPECT_DOUBLE_EQ(c.at(0, 0), -2);
  EXPECT_DOUBLE_EQ(c.at(1, 0), -2);
}

TEST(CoreOps, MatmulMismatchNamesOpAndShapes) {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("matmul"), std::string::npos);
    EXPECT_NE(what.find("[2x3]"), std::string::npos);
  }
}

TEST(CoreOps, LayerNormOfConstantRowIsZero) {
  auto x = Tensor<double>::from({1, 4}, {3, 3, 3, 3});
  auto g = Tensor<double>::from({4}, {1, 1, 1, 1});
  auto b = Tensor<double>::zeros({4});
  auto y = layer_norm(x, g, b);
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(CoreOps, SumOfMatmulGradientIsOnesTimesBTransposed) {
  Rng rng(3);
  auto a = random_tensor({3, 4}, rng);
  auto b = random_tensor({4, 2}, rng);
  sum(matmul(a, b)).backward();
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t p = 0; p < 4; ++p) {
      const double expected = b.at(p, 0) + b.at(p, 1);
      EXPECT_NEAR(a.grad()[i * 4 + p], expected, 1e-12);
    }
  }
  EXPECT_LT(max_fd_error([&] { return sum(matmul(a, b)); }, {a, b}), 1e-6);
}

TEST(CoreOps, SharedSubexpressionIsBackpropagatedOnce) {
  auto a = Tensor<double>::from({2}, {1, 2}, true);
  auto b = scale(a, 2.0);
  auto c = add(b, b);
  sum(c).backward();
  EXPECT_DOUBLE_EQ(a.grad()[0], 4.0);
  EXPECT_DOUBLE_EQ(a.grad()[1], 4.0);
}

TEST(CoreOps, NoGradGuardSkipsRecording) {
  auto a = Tensor<double>::from({2}, {1, 2}, true);
  NoGradGuard guard;
  auto b = scale(a, 3.0);
  EXPECT_FALSE(b.requires_grad());
  EXPECT_TRUE(b.node()->parents.empty());
}

// Property: every differentiable op agrees with central differences.
TEST(CoreOps, GradientsMatchFiniteDifferencesOnRandomShapes) {
  Rng rng(11);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t r = rng.uniform_int(1, 8), c = rng.uniform_int(1, 8),
                      k = rng.uniform_int(1, 8);
    auto a = random_tensor({r, k}, rng);
    auto b = random_tensor({k, c}, rng);
    auto x = random_tensor({r, c}, rng);
    auto y = random_tensor({r, c}, rng);
    auto bias = random_tensor({c}, rng);
    auto gamma = random_tensor({c}, rng);
    auto beta = random_tensor({c}, rng);
    const double tol = 1e-3;
    EXPECT_LT(max_fd_error([&] { return weighted_sum(matmul(a, b)); }, {a, b}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(add(x, y)); }, {x, y}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(add_row(x, bias)); }, {x, bias}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(scale(x, 0.7)); }, {x}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(transpose(x)); }, {x}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(gelu(x)); }, {x}), tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(concat_cols<double>({x, y})); }, {x, y}),
              tol);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(slice_cols(x, c / 2, c)); }, {x}), tol);
    if (c > 1) {
      EXPECT_LT(max_fd_error([&] { return weighted_sum(layer_norm(x, gamma, beta)); },
                             {x, gamma, beta}),
                tol);
    }
    std::vector<int> ids;
    for (std::size_t i = 0; i < 5; ++i) ids.push_back(static_cast<int>(rng.uniform_int(0, r - 1)));
    EXPECT_LT(max_fd_error([&] { return weighted_sum(gather_rows(x, ids)); }, {x}), tol);

    Mask mask(r, c, 0);
    for (auto& bit : mask.bits) bit = rng.bernoulli(0.6);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(softmax_masked(x, mask)); }, {x}), tol);

    std::vector<int> targets;
    for (std::size_t i = 0; i < r; ++i) targets.push_back(static_cast<int>(rng.uniform_int(0, c - 1)));
    targets[0] = -1;  // ignored row
    if (r > 1) {
      EXPECT_LT(max_fd_error([&] { return cross_entropy_label_smoothed(x, targets, 0.1, -1); }, {x}),
                tol);
    }
    std::vector<int> labels;
    auto logits = random_tensor({r, 1}, rng);
    for (std::size_t i = 0; i < r; ++i) labels.push_back(rng.bernoulli(0.5));
    EXPECT_LT(max_fd_error([&] { return binary_cross_entropy_with_logits(logits, labels); }, {logits}),
              tol);
  }
}

TEST(CoreOps, AttentionGradientsMatchFiniteDifferences) {
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    const std::size_t heads = rng.uniform_int(1, 2);
    const std::size_t d = heads * rng.uniform_int(1, 4);
    const std::size_t tq = rng.uniform_int(1, 6), tk = rng.uniform_int(1, 6);
    auto q = random_tensor({tq, d}, rng);
    auto k = random_tensor({tk, d}, rng);
    auto v = random_tensor({tk, d}, rng);
    std::vector<Mask> masks(heads, Mask(tq, tk, 0));
    for (auto& m : masks) {
      for (auto& bit : m.bits) bit = rng.bernoulli(0.5);
    }
    std::vector<const Mask*> ptrs;
    for (auto& m : masks) ptrs.push_back(&m);
    EXPECT_LT(max_fd_error([&] { return weighted_sum(multi_head_attention(q, k, v, heads, ptrs)); },
                           {q, k, v}),
              1e-3);
  }
}

TEST(SoftmaxMasked, UniformOverAdmitted) {
  auto x = Tensor<double>::from({1, 3}, {0, 0, 0});
  Mask m(1, 3, 1);
  m.set(0, 2, 0);
  auto p = softmax_masked(x, m);
  EXPECT_DOUBLE_EQ(p.values()[0], 0.5);
  EXPECT_DOUBLE_EQ(p.values()[1], 0.5);
  EXPECT_EQ(p.values()[2], 0.0);
}

TEST(SoftmaxMasked, ClosedForm) {
  auto x = Tensor<double>::from({1, 2}, {0, std::log(2.0)});
  auto p = softmax_masked(x, Mask::ones(1, 2));
  EXPECT_NEAR(p.values()[0], 1.0 / 3, 1e-15);
  EXPECT_NEAR(p.values()[1], 2.0 / 3, 1e-15);
}

TEST(SoftmaxMasked, AllZeroMaskFallsBackToFullSoftmax) {
  Rng rng(2);
  auto x = random_tensor({1, 5}, rng, false);
  auto masked = softmax_masked(x, Mask(1, 5, 0));
  auto full = softmax(x);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(masked.values()[i], full.values()[i]);
}

TEST(SoftmaxMasked, LengthMismatchIsAnError) {
  auto x = Tensor<double>::zeros({1, 3});
  EXPECT_THROW(softmax_masked(x, Mask(1, 2, 1)), ShapeError);
}

// Property: rows sum to one, entries lie in [0, 1], excluded entries and
// their adjoints are exactly zero.
TEST(SoftmaxMasked, RowsAreDistributionsAndMaskedAdjointsVanish) {
  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = rng.uniform_int(1, 6), c = rng.uniform_int(1, 8);
    auto x = random_tensor({r, c}, rng, true, 3.0);
    Mask m(r, c, 0);
    for (auto& bit : m.bits) bit = rng.bernoulli(0.5);
    auto p = softmax_masked(x, m);
    weighted_sum(p).backward();
    for (std::size_t i = 0; i < r; ++i) {
      double total = 0;
      for (std::size_t j = 0; j < c; ++j) {
        const double v = p.at(i, j);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        total += v;
        if (!m.row_empty(i) && !m(i, j)) {
          EXPECT_EQ(v, 0.0);
          EXPECT_EQ(x.grad()[i * c + j], 0.0);
        }
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(CrossEntropy, PeakedLogitsGiveNearZeroLoss) {
  auto logits = Tensor<double>::from({2, 3}, {50, 0, 0, 0, 0, 50});
  const std::vector<int> targets = {0, 2};
  EXPECT_NEAR(cross_entropy_label_smoothed(logits, targets, 0.0, -1).item(), 0.0, 1e-12);
}

TEST(CrossEntropy, UniformLogitsGiveLogVocab) {
  auto logits = Tensor<double>::zeros({3, 4});
  const std::vector<int> targets = {0, 1, 3};
  EXPECT_NEAR(cross_entropy_label_smoothed(logits, targets, 0.0, -1).item(), std::log(4.0), 1e-12);
}

TEST(CrossEntropy, SmoothedValueMatchesHandEvaluatedFormula) {
  const std::vector<double> z = {0.3, -1.2, 2.0, 0.0, 0.5, -0.7, 1.1, 0.25};
  const int target = 2;
  const double eps = 0.1;
  // -sum_v q_v log softmax(z)_v with q = 0.9 on the target, 0.1/7 elsewhere.
  double denom = 0;
  for (double v : z) denom += std::exp(v);
  double expected = 0;
  for (int v = 0; v < 8; ++v) {
    const double q = v == target ? 1 - eps : eps / 7;
    expected -= q * (z[v] - std::log(denom));
  }
  auto logits = Tensor<double>::from({1, 8}, z);
  const std::vector<int> targets = {target};
  EXPECT_NEAR(cross_entropy_label_smoothed(logits, targets, eps, -1).item(), expected, 1e-12);
}

TEST(CrossEntropy, IgnoresPaddingAndRejectsAllIgnored) {
  auto logits = Tensor<double>::from({2, 2}, {0, 0, 9, -9});
  const std::vector<int> one_real = {1, 0};
  const std::vector<int> only_pad = {0, 0};
  EXPECT_NEAR(cross_entropy_label_smoothed(logits, one_real, 0.0, 0).item(), std::log(2.0), 1e-12);
  EXPECT_THROW(cross_entropy_label_smoothed(logits, only_pad, 0.0, 0), NumericError);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::from({3}, {1, -2, 3}));
  w.mutable_grad();
  Adam<double> adam({0.1});
  adam.step(params);
  EXPECT_EQ(std::vector<double>(w.values().begin(), w.values().end()),
            (std::vector<double>{1, -2, 3}));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::scalar(1.0));
  w.mutable_grad()[0] = 1.0;
  Adam<double> adam({0.1});
  adam.step(params);
  // m_hat = 1, v_hat = 1 after bias correction.
  EXPECT_NEAR(w.item(), 1.0 - 0.1 / (1.0 + 1e-8), 1e-15);
}

TEST(Adam, IdenticalStateGivesIdenticalUpdates) {
  auto run = [] {
    ParameterSet<double> params;
    auto& w = params.add("w", Tensor<double>::from({2}, {0.5, -0.5}));
    Adam<double> adam({0.05});
    for (int step = 0; step < 5; ++step) {
      w.mutable_grad()[0] = 0.3 * step;
      w.mutable_grad()[1] = -1.0;
      adam.step(params);
    }
    return std::vector<double>(w.values().begin(), w.values().end());
  };
  EXPECT_EQ(run(), run());
}

TEST(ParameterSet, RejectsDuplicateNames) {
  ParameterSet<double> params;
  params.add("w", Tensor<double>::zeros({1}));
  EXPECT_THROW(params.add("w", Tensor<double>::zeros({1})), NumericError);
}

TEST(GradCheck, LinearModelIsExact) {
  ParameterSet<double> params;
  Rng rng(1);
  auto& w = params.add("w", random_tensor({3, 2}, rng));
  auto& b = params.add("b", random_tensor({2}, rng));
  auto x = random_tensor({4, 3}, rng, false);
  auto report = grad_check(params, [&] { return weighted_sum(add_row(matmul(x, w), b)); }, 1e-5, 1e-3);
  EXPECT_EQ(report.coordinates, 8u);
  EXPECT_LT(report.max_rel_error, 1e-8);
}

TEST(GradCheck, UnusedParameterHasZeroError) {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::from({2}, {1, 2}));
  params.add("unused", Tensor<double>::from({2}, {3, 4}));
  auto report = grad_check(params, [&] { return sum(w); }, 1e-5, 1e-3);
  ASSERT_EQ(report.per_parameter.size(), 2u);
  EXPECT_EQ(report.per_parameter[1].max_rel_error, 0.0);
}

TEST(GradCheck, NonFiniteLossIsAnError) {
  ParameterSet<double> params;
  auto& w = params.add("w", Tensor<double>::from({1}, {0.0}));
  auto blow_up = [&] { return scale(sum(w), std::numeric_limits<double>::infinity()); };
  EXPECT_THROW(grad_check(params, blow_up, 1e-5, 1e-3), NumericError);
}

TEST(Checkpoint, RoundTripPreservesNamesShapesValuesAndConfig) {
  Rng rng(4);
  ParameterSet<float> params;
  params.add("a", Tensor<float>::from({2, 2}, {1.5f, -2.25f, 3e-8f, 7.0f}));
  params.add("b.bias", Tensor<float>::from({3}, {0.1f, 0.2f, 0.3f}));
  const std::string bytes = serialize_checkpoint(params, R"({"d_model":4})");
  EXPECT_EQ(bytes.substr(0, 8), "SEGSUMCK");
  const CheckpointData data = parse_checkpoint(bytes);
  EXPECT_EQ(data.config_json, R"({"d_model":4})");
  EXPECT_EQ(data.real_bytes, 4);
  ParameterSet<float> restored;
  restored.add("a", Tensor<float>::zeros({2, 2}));
  restored.add("b.bias", Tensor<float>::zeros({3}));
  restore_parameters(data, restored);
  for (const char* name : {"a", "b.bias"}) {
    auto src = params.find(name)->tensor.values();
    auto dst = restored.find(name)->tensor.values();
    EXPECT_TRUE(std::equal(src.begin(), src.end(), dst.begin()));
  }
  EXPECT_EQ(serialize_checkpoint(restored, data.config_json), bytes);
}

TEST(Checkpoint, RejectsCorruptInput) {
  ParameterSet<double> params;
  params.add("a", Tensor<double>::zeros({2}));
  std::string bytes = serialize_checkpoint(params, "{}");
  EXPECT_THROW(parse_checkpoint("NOTACKPT" + bytes.substr(8)), DataError);
  EXPECT_THROW(parse_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
  ParameterSet<double> other;
  other.add("a", Tensor<double>::zeros({3}));
  EXPECT_THROW(restore_parameters(parse_checkpoint(bytes), other), DataError);
}

}  // namespace
}  // namespace segsum::numerics
