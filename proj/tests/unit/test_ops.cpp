// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/ops.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"

namespace sedconv::nn {
namespace {

using oracle::Geometry;
using oracle::random_tensor;

Tensor seq(Shape shape, Real start = 1) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = start + Real(i);
  return t;
}

// ---------------------------------------------------------------------------
// Dense convolution

TEST(Conv2d, UnitKernelIsIdentity) {
  std::mt19937_64 rng(1);
  Tensor x = random_tensor({1, 6, 7}, rng);
  DenseConvKernel k{Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), {1, 1}, {0, 0}};
  EXPECT_EQ(conv2d(x, k), x);
}

TEST(Conv2d, AllOnesTwoByTwo) {
  DenseConvKernel k{Tensor({1, 1, 2, 2}, 1.0), Tensor({1}), {1, 1}, {0, 0}};
  Tensor y = conv2d(seq({1, 3, 3}), k);
  EXPECT_EQ(y, Tensor({1, 2, 2}, {12, 16, 24, 28}));
}

TEST(Conv2d, BlockShape) {
  DenseConvKernel k{Tensor({256, 1, 5, 5}), Tensor({256}), {1, 1}, {2, 2}};
  EXPECT_EQ(conv2d(Tensor({1, 1024, 40}), k).shape(), (Shape{256, 1024, 40}));
}

TEST(Conv2d, Errors) {
  DenseConvKernel k{Tensor({2, 3, 3, 3}), Tensor({2}), {1, 1}, {0, 0}};
  EXPECT_THROW(conv2d(Tensor({2, 5, 5}), k), SizeError);  // channel mismatch
  EXPECT_THROW(conv2d(Tensor({3, 2, 5}), k), SizeError);  // kernel taller than input
}

TEST(Conv2d, OutputShapeFormula) {
  for (std::size_t k : {1, 3, 5, 7})
    for (std::size_t s : {1, 2, 3})
      for (std::size_t p : {0, 1, 2, 3}) {
        if (9 + 2 * p < k) continue;
        DenseConvKernel kk{Tensor({1, 1, k, k}), Tensor({1}), {s, s}, {p, p}};
        const std::size_t expect = (9 + 2 * p - k) / s + 1;
        EXPECT_EQ(conv2d(Tensor({1, 9, 9}), kk).shape(), (Shape{1, expect, expect}));
      }
}

struct ConvCase {
  Shape x;
  Shape w;
  Geometry g;
};

// Covers the pointwise, shifted (unit vertical stride) and im2col paths.
std::vector<ConvCase> conv_cases() {
  return {
      {{2, 3, 6, 5}, {4, 3, 1, 1}, {}},
      {{2, 3, 9, 8}, {4, 3, 3, 3}, {1, 1, 1, 1, 1, 1}},
      {{1, 2, 11, 7}, {3, 2, 5, 3}, {1, 1, 2, 0, 1, 1}},
      {{2, 2, 12, 9}, {2, 2, 3, 3}, {2, 1, 1, 1, 1, 1}},
      {{1, 3, 10, 10}, {2, 3, 3, 2}, {2, 3, 0, 1, 1, 1}},
      {{2, 2, 30, 6}, {3, 2, 3, 3}, {1, 1, 10, 0, 10, 1}},
      {{1, 1, 16, 16}, {2, 1, 2, 2}, {1, 2, 0, 0, 3, 2}},
  };
}

TEST(ConvForward, MatchesNaiveOracle) {
  std::mt19937_64 rng(11);
  for (const auto& c : conv_cases()) {
    Tensor x = random_tensor(c.x, rng), w = random_tensor(c.w, rng), b = random_tensor({c.w[0]}, rng);
    ConvGeometry g{{c.g.sh, c.g.sw}, {c.g.ph, c.g.pw}, {c.g.dh, c.g.dw}};
    EXPECT_LT(oracle::max_scaled_error(conv_forward(x, w, b, g), oracle::conv2d(x, w, b, c.g)), 1e-12);
  }
}

TEST(ConvBackward, MatchesNaiveOracle) {
  std::mt19937_64 rng(12);
  for (const auto& c : conv_cases()) {
    Tensor x = random_tensor(c.x, rng), w = random_tensor(c.w, rng);
    ConvGeometry g{{c.g.sh, c.g.sw}, {c.g.ph, c.g.pw}, {c.g.dh, c.g.dw}};
    Tensor y = conv_forward(x, w, {}, g);
    Tensor dy = random_tensor(y.shape(), rng);
    ConvGrads got = conv_backward(x, w, true, dy, g);
    auto ref = oracle::conv2d_backward(x, w, dy, c.g);
    EXPECT_LT(oracle::max_scaled_error(got.input, ref.input), 1e-12);
    EXPECT_LT(oracle::max_scaled_error(got.weights, ref.weights), 1e-12);
    EXPECT_LT(oracle::max_scaled_error(got.bias, ref.bias), 1e-12);
    ConvGrads no_input = conv_backward(x, w, false, dy, g, false);
    EXPECT_TRUE(no_input.input.empty());
    EXPECT_TRUE(no_input.bias.empty());
    EXPECT_EQ(no_input.weights, got.weights);
  }
}

TEST(ConvForward, ResultDoesNotDependOnBufferAddress) {
  std::mt19937_64 rng(13);
  Tensor x = random_tensor({2, 4, 21, 13}, rng), w = random_tensor({5, 4, 3, 3}, rng);
  ConvGeometry g{{1, 1}, {1, 1}, {1, 1}};
  Tensor a = conv_forward(x, w, {}, g);
  std::vector<Tensor> pad;
  for (int i = 1; i < 8; ++i) {
    pad.emplace_back(Shape{std::size_t(i)});  // shift later allocations
    Tensor x2 = x;
    EXPECT_EQ(conv_forward(x2, w, {}, g), a);
  }
}

TEST(Conv2d, TrueConvolutionFlipsKernel) {
  std::mt19937_64 rng(14);
  Tensor x = random_tensor({2, 6, 6}, rng), w = random_tensor({3, 2, 3, 2}, rng);
  DenseConvKernel flipped{w, {}, {1, 1}, {1, 1}, true};
  DenseConvKernel corr{flip_spatial(w), {}, {1, 1}, {1, 1}, false};
  EXPECT_EQ(conv2d(x, flipped), conv2d(x, corr));
}

// ---------------------------------------------------------------------------
// Depthwise-separable convolution

TEST(Depthwise, DeltaKernelCrops) {
  std::mt19937_64 rng(2);
  Tensor x = random_tensor({2, 3, 3}, rng);
  DepthwiseSeparableKernel k;
  k.spatial = Tensor({2, 2, 2}, {1, 0, 0, 0, 1, 0, 0, 0});
  Tensor y = depthwise_conv(x, k);
  ASSERT_EQ(y.shape(), (Shape{2, 2, 2}));
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(y.at({c, i, j}), x.at({c, i, j}));
}

TEST(Depthwise, ChannelsStayIndependent) {
  DepthwiseSeparableKernel k;
  k.spatial = Tensor({2, 2, 2}, {1, 1, 1, 1, 0, 0, 0, 0});
  Tensor x({2, 2, 2}, {1, 2, 3, 4, 1, 2, 3, 4});
  EXPECT_EQ(depthwise_conv(x, k), Tensor({2, 1, 1}, {10, 0}));
}

TEST(Depthwise, BlockShape) {
  DepthwiseSeparableKernel k;
  k.spatial = Tensor({256, 5, 5});
  k.padding = {2, 2};
  EXPECT_EQ(depthwise_conv(Tensor({256, 64, 40}), k).shape(), (Shape{256, 64, 40}));
}

TEST(Depthwise, ChannelMismatch) {
  DepthwiseSeparableKernel k;
  k.spatial = Tensor({3, 3, 3});
  EXPECT_THROW(depthwise_conv(Tensor({2, 5, 5}), k), SizeError);
}

TEST(Depthwise, ZeroingOneInputChannelZeroesOnlyThatOutput) {
  std::mt19937_64 rng(3);
  Tensor x = random_tensor({4, 7, 6}, rng);
  DepthwiseSeparableKernel k;
  k.spatial = random_tensor({4, 3, 3}, rng);
  k.padding = {1, 1};
  Tensor before = depthwise_conv(x, k);
  for (std::size_t i = 0; i < 42; ++i) x[2 * 42 + i] = 0;
  Tensor after = depthwise_conv(x, k);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t i = 0; i < 42; ++i) {
      if (c == 2) EXPECT_EQ(after[c * 42 + i], 0);
      else EXPECT_EQ(after[c * 42 + i], before[c * 42 + i]);
    }
}

struct DwCase {
  Shape x;
  std::size_t kh, kw;
  Geometry g;
};

TEST(DepthwiseForwardBackward, MatchesNaiveOracle) {
  std::mt19937_64 rng(21);
  const std::vector<DwCase> cases{
      {{2, 3, 9, 8}, 3, 3, {1, 1, 1, 1}},
      {{1, 4, 17, 10}, 5, 5, {1, 1, 2, 2}},
      {{2, 2, 12, 9}, 3, 2, {2, 1, 1, 0}},
      {{1, 3, 10, 11}, 3, 3, {1, 2, 0, 1}},
      {{2, 2, 5, 5}, 1, 1, {1, 1, 0, 0}},
      {{1, 2, 20, 7}, 7, 7, {1, 1, 3, 3}},
  };
  for (const auto& c : cases) {
    Tensor x = random_tensor(c.x, rng), k = random_tensor({c.x[1], c.kh, c.kw}, rng);
    Tensor b = random_tensor({c.x[1]}, rng);
    Tensor y = depthwise_forward(x, k, b, {c.g.sh, c.g.sw}, {c.g.ph, c.g.pw});
    EXPECT_LT(oracle::max_scaled_error(y, oracle::depthwise(x, k, b, c.g)), 1e-12);
    Tensor dy = random_tensor(y.shape(), rng);
    ConvGrads got = depthwise_backward(x, k, true, dy, {c.g.sh, c.g.sw}, {c.g.ph, c.g.pw});
    auto ref = oracle::depthwise_backward(x, k, dy, c.g);
    EXPECT_LT(oracle::max_scaled_error(got.input, ref.input), 1e-12);
    EXPECT_LT(oracle::max_scaled_error(got.weights, ref.weights), 1e-12);
    EXPECT_LT(oracle::max_scaled_error(got.bias, ref.bias), 1e-12);
  }
}

TEST(Pointwise, IdentityAndLinearCombination) {
  std::mt19937_64 rng(4);
  Tensor a = random_tensor({1, 4, 4}, rng);
  DepthwiseSeparableKernel k;
  k.pointwise = Tensor({1, 1}, 1.0);
  k.bias_pointwise = Tensor({1});
  EXPECT_EQ(pointwise_conv(a, k), a);

  Tensor ab = random_tensor({2, 3, 3}, rng);
  k.pointwise = Tensor({1, 2}, {2, -1});
  Tensor y = pointwise_conv(ab, k);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_DOUBLE_EQ(y[i], 2 * ab[i] - ab[9 + i]);
}

TEST(Pointwise, EqualsDenseOneByOne) {
  std::mt19937_64 rng(5);
  Tensor x = random_tensor({3, 4, 4}, rng);
  DepthwiseSeparableKernel k;
  k.pointwise = random_tensor({5, 3}, rng);
  k.bias_pointwise = random_tensor({5}, rng);
  DenseConvKernel dense{reshape(k.pointwise, {5, 3, 1, 1}), k.bias_pointwise, {1, 1}, {0, 0}};
  EXPECT_LT(oracle::max_relative_error(pointwise_conv(x, k), conv2d(x, dense)), 1e-12);
  Tensor xb = reshape(x, {1, 3, 4, 4});
  EXPECT_LT(oracle::max_scaled_error(reshape(pointwise_conv(x, k), {1, 5, 4, 4}),
                                     oracle::pointwise(xb, k.pointwise, k.bias_pointwise)),
            1e-12);
}

TEST(Pointwise, ChannelMismatch) {
  DepthwiseSeparableKernel k;
  k.pointwise = Tensor({2, 3});
  k.bias_pointwise = Tensor({2});
  EXPECT_THROW(pointwise_conv(Tensor({2, 3, 3}), k), SizeError);
}

TEST(DwsConv, IsCompositionOfStages) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({3, 8, 8}, rng);
  DepthwiseSeparableKernel k;
  k.spatial = random_tensor({3, 3, 3}, rng);
  k.bias_spatial = random_tensor({3}, rng);
  k.pointwise = random_tensor({4, 3}, rng);
  k.bias_pointwise = random_tensor({4}, rng);
  k.padding = {1, 1};
  EXPECT_EQ(dws_conv(x, k), pointwise_conv(depthwise_conv(x, k), k));
  DenseConvKernel dense{Tensor({4, 3, 3, 3}), Tensor({4}), {1, 1}, {1, 1}};
  EXPECT_EQ(dws_conv(x, k).shape(), conv2d(x, dense).shape());
}

TEST(DwsConv, IsLinearWithoutBias) {
  std::mt19937_64 rng(7);
  Tensor x = random_tensor({3, 6, 6}, rng), y = random_tensor({3, 6, 6}, rng);
  DepthwiseSeparableKernel k;
  k.spatial = random_tensor({3, 3, 3}, rng);
  k.pointwise = random_tensor({2, 3}, rng);
  k.bias_pointwise = Tensor({2});
  k.padding = {1, 1};
  const Real a = 0.7, b = -1.3;
  Tensor lhs = dws_conv(x * a + y * b, k);
  Tensor rhs = dws_conv(x, k) * a + dws_conv(y, k) * b;
  EXPECT_LT(oracle::max_scaled_error(lhs, rhs), 1e-12);
}

// ---------------------------------------------------------------------------
// Dilated convolution

TEST(Dilated, UnitDilationIsBitIdenticalToConv2d) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 10; ++i) {
    Tensor x = random_tensor({2, 3, 12, 10}, rng), w = random_tensor({4, 3, 3, 3}, rng), b = random_tensor({4}, rng);
    DilatedConvKernel dk{w, b, {1, 1}, {1, 0}};
    DenseConvKernel ck{w, b, {1, 1}, {1, 0}};
    EXPECT_EQ(dilated_conv2d(x, dk), conv2d(x, ck));
  }
}

TEST(Dilated, TapsSkipByDilation) {
  DilatedConvKernel k{Tensor({1, 1, 2, 2}, 1.0), Tensor({1}), {2, 2}, {0, 0}};
  EXPECT_EQ(dilated_conv2d(seq({1, 3, 3}), k), Tensor({1, 1, 1}, {20}));
}

TEST(Dilated, OutputWidthShrinksWithKernel) {
  DilatedConvKernel k{Tensor({1, 1, 1, 7}), Tensor({1}), {1, 1}, {0, 0}};
  EXPECT_EQ(dilated_conv2d(Tensor({1, 1, 10}), k).dim(2), 4u);
}

TEST(Dilated, EffectiveKernelMustFit) {
  DilatedConvKernel k{Tensor({1, 1, 3, 1}), Tensor({1}), {10, 1}, {0, 0}};
  EXPECT_THROW(dilated_conv2d(Tensor({1, 20, 4}), k), SizeError);
  EXPECT_EQ(conv_output_length(21, 3, 1, 0, 10), 1u);
}

TEST(Dilated, TimePaddingPreservesLength) {
  std::mt19937_64 rng(9);
  for (std::size_t k : {3, 5, 7})
    for (std::size_t xi : {1, 10, 50, 100}) {
      DilatedConvKernel dk{Tensor({1, 1, k, k}), Tensor({1}), {xi, 1}, {(k / 2) * xi, 0}};
      EXPECT_EQ(dilated_conv2d(Tensor({1, 1024, 10}), dk).dim(1), 1024u);
    }
}

// ---------------------------------------------------------------------------
// Pooling

TEST(MaxPool, Examples) {
  EXPECT_EQ(maxpool2d(Tensor({1, 1024, 40}), {1, 5}).shape(), (Shape{1, 1024, 8}));
  EXPECT_EQ(maxpool2d(Tensor({1, 2, 2}, {1, 3, 7, 2}), {1, 2}), Tensor({1, 2, 1}, {3, 7}));
  Tensor x({1, 4, 40});
  for (Extent2 p : {Extent2{1, 5}, Extent2{1, 4}, Extent2{1, 2}}) x = maxpool2d(x, p);
  EXPECT_EQ(x.shape(), (Shape{1, 4, 1}));
}

TEST(MaxPool, TruncatesAndRejectsOversizedPool) {
  EXPECT_EQ(maxpool2d(Tensor({1, 3, 7}), {1, 2}).shape(), (Shape{1, 3, 3}));
  EXPECT_THROW(maxpool2d(Tensor({1, 3, 1}), {1, 2}), SizeError);
}

TEST(MaxPool, TiesRouteGradientToFirstMaximum) {
  Tensor x({1, 1, 1, 4}, {5, 5, 2, 2});
  PoolResult r = maxpool_forward(x, {1, 2});
  Tensor g = maxpool_backward(Tensor({1, 1, 1, 2}, {1, 1}), r.argmax, x.shape());
  EXPECT_EQ(g, Tensor({1, 1, 1, 4}, {1, 0, 1, 0}));
}

// ---------------------------------------------------------------------------
// Batch normalization

TEST(BatchNorm, NormalizedInputPassesThrough) {
  // Per-channel values are {-1, 1} repeated: mean 0, biased variance 1.
  Tensor x({4, 2, 1, 2});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 2) ? 1 : -1;
  auto p = BatchNormParams::make(2);
  p.epsilon = 0;
  Tensor y = batchnorm2d(x, p, Mode::kTrain).output;
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(y[i], x[i], 1e-6);
}

TEST(BatchNorm, ConstantChannelNormalizesToZero) {
  Tensor x({3, 1, 2, 2}, 4.5);
  auto p = BatchNormParams::make(1);
  Tensor y = batchnorm2d(x, p, Mode::kTrain).output;
  for (auto v : y.data()) EXPECT_EQ(v, 0);
}

TEST(BatchNorm, StatisticsMatchTwoPassOracle) {
  std::mt19937_64 rng(10);
  Tensor x = random_tensor({4, 3, 5, 6}, rng, -2, 3);
  auto p = BatchNormParams::make(3);
  auto r = batchnorm2d(x, p, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0, var = 0;
    const double n = 4 * 30;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 30; ++i) mean += x[(b * 3 + c) * 30 + i];
    mean /= n;
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t i = 0; i < 30; ++i) var += std::pow(x[(b * 3 + c) * 30 + i] - mean, 2);
    var /= n;
    EXPECT_NEAR(r.mean[c], mean, 1e-12);
    EXPECT_NEAR(r.var[c], var, 1e-12);
    EXPECT_NEAR(p.running_mean[c], 0.1 * mean, 1e-12);
    EXPECT_NEAR(p.running_var[c], 0.9 + 0.1 * var, 1e-12);
  }
}

TEST(BatchNorm, EvalUsesRunningStatistics) {
  auto p = BatchNormParams::make(1);
  p.running_mean = Tensor::from({2});
  p.running_var = Tensor::from({4});
  p.gamma = Tensor::from({3});
  p.beta = Tensor::from({1});
  Tensor y = batchnorm2d(Tensor({1, 1, 1, 1}, 6), p, Mode::kEval).output;
  EXPECT_NEAR(y[0], 3 * (6 - 2) / std::sqrt(4 + 1e-5) + 1, 1e-12);
  EXPECT_EQ(p.running_mean[0], 2);  // untouched
}

TEST(BatchNorm, ChannelMismatch) {
  auto p = BatchNormParams::make(2);
  EXPECT_THROW(batchnorm2d(Tensor({1, 3, 2, 2}), p, Mode::kTrain), SizeError);
}

// ---------------------------------------------------------------------------
// Activations and dropout

TEST(Activation, Values) {
  Tensor x = Tensor::from({-1, 2, 0});
  EXPECT_EQ(activation(Activation::kRelu, x), Tensor::from({0, 2, 0}));
  EXPECT_EQ(activation(Activation::kSigmoid, Tensor::from({0}))[0], 0.5);
  EXPECT_EQ(activation(Activation::kTanh, Tensor::from({0}))[0], 0);
  std::mt19937_64 rng(11);
  Tensor s = random_tensor({50}, rng, -4, 4);
  Tensor pos = activation(Activation::kTanh, s), neg = activation(Activation::kTanh, s * Real(-1));
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(pos[i], -neg[i]);
  Tensor sg = activation(Activation::kSigmoid, s * Real(5));
  for (auto v : sg.data()) EXPECT_TRUE(v > 0 && v < 1);
}

TEST(NonFinite, NaNSurvivesReluAndPooling) {
  const Real nan = std::numeric_limits<Real>::quiet_NaN();
  EXPECT_TRUE(std::isnan(activation(Activation::kRelu, Tensor::from({nan}))[0]));
  for (std::size_t at : {0u, 1u, 3u}) {
    Tensor x({1, 1, 4}, {1, 4, 2, 3});
    x[at] = nan;
    Tensor y = maxpool2d(x, {1, 4});
    EXPECT_TRUE(std::isnan(y[0])) << at;
  }
}

TEST(Dropout, IdentityCases) {
  std::mt19937_64 g(1);
  Tensor x = random_tensor({100}, g);
  Rng rng(3);
  EXPECT_EQ(dropout(x, 0, Mode::kTrain, rng).output, x);
  EXPECT_EQ(dropout(x, 0, Mode::kEval, rng).output, x);
  EXPECT_EQ(dropout(x, 0.25, Mode::kEval, rng).output, x);
  EXPECT_THROW(dropout(x, 1.0, Mode::kTrain, rng), std::invalid_argument);
}

TEST(Dropout, MonteCarloRateAndMean) {
  Tensor x({1000000}, 1.0);
  Rng rng(42);
  auto r = dropout(x, 0.25, Mode::kTrain, rng);
  std::size_t zeros = 0;
  double sum = 0;
  for (auto v : r.output.data()) {
    if (v == 0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.0 / 0.75);
    sum += v;
  }
  EXPECT_NEAR(double(zeros) / 1e6, 0.25, 0.005);
  EXPECT_NEAR(sum / 1e6, 1.0, 0.01);
}

// ---------------------------------------------------------------------------
// GRU and classifier

GruParams random_gru(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  return {random_tensor({3, hidden, in}, rng), random_tensor({3, hidden, hidden}, rng),
          random_tensor({3, hidden}, rng)};
}

TEST(Gru, ZeroParametersGiveZeroOutput) {
  std::mt19937_64 rng(1);
  GruParams p{Tensor({3, 4, 3}), Tensor({3, 4, 4}), Tensor({3, 4})};
  EXPECT_EQ(gru_forward(random_tensor({6, 3}, rng), p), Tensor({6, 4}));
}

TEST(Gru, SingleStepClosedForm) {
  // z = r = sigmoid(0) = 0.5, candidate tanh(0) = 0, h0 = 0 -> h1 = 0.
  GruParams p{Tensor({3, 1, 1}), Tensor({3, 1, 1}), Tensor({3, 1})};
  EXPECT_EQ(gru_forward(Tensor({1, 1}, 3.0), p)[0], 0);
  // With a candidate bias b: h1 = 0.5 * tanh(b).
  p.bias = Tensor({3, 1}, {0, 0, 0.8});
  EXPECT_DOUBLE_EQ(gru_forward(Tensor({1, 1}, 3.0), p)[0], 0.5 * std::tanh(0.8));
}

TEST(Gru, MatchesScalarRecursion) {
  std::mt19937_64 rng(2);
  GruParams scalar = random_gru(1, 1, rng);
  Tensor x = random_tensor({3, 1}, rng);
  EXPECT_LT(oracle::max_relative_error(gru_forward(x, scalar),
                                       oracle::gru(x, scalar.input_weights, scalar.recurrent_weights, scalar.bias, {})),
            1e-12);
  GruParams p = random_gru(5, 4, rng);
  Tensor xs = random_tensor({9, 5}, rng);
  Tensor h0 = random_tensor({4}, rng);
  std::vector<double> h(h0.data().begin(), h0.data().end());
  EXPECT_LT(oracle::max_relative_error(gru_forward(xs, p, h0),
                                       oracle::gru(xs, p.input_weights, p.recurrent_weights, p.bias, h)),
            1e-12);
}

TEST(Gru, OutputBoundedAndBatchIndependent) {
  std::mt19937_64 rng(3);
  GruParams p = random_gru(6, 5, rng);
  Tensor xs = random_tensor({2, 30, 6}, rng, -3, 3);
  Tensor y = gru_forward(xs, p);
  for (auto v : y.data()) EXPECT_TRUE(v > -1 && v < 1);
  // Saturated gates round to +-1 in floating point but never beyond.
  GruParams big = p;
  for (std::size_t i = 0; i < big.input_weights.size(); ++i) big.input_weights[i] *= 50;
  for (auto v : gru_forward(xs, big).data()) EXPECT_TRUE(v >= -1 && v <= 1);
  Tensor second({30, 6}, std::vector<Real>(xs.raw() + 180, xs.raw() + 360));
  Tensor y1 = gru_forward(second, p);
  for (std::size_t i = 0; i < 150; ++i) EXPECT_NEAR(y[150 + i], y1[i], 1e-14);
}

TEST(Gru, ShapeMismatch) {
  std::mt19937_64 rng(4);
  GruParams p = random_gru(3, 2, rng);
  EXPECT_THROW(gru_forward(Tensor({4, 5}), p), SizeError);
}

TEST(Classify, ZeroParametersGiveOneHalf) {
  AffineClassifier c{Tensor({16, 256}), Tensor({16})};
  Tensor y = classify(Tensor({7, 256}, 1.0), c);
  EXPECT_EQ(y.shape(), (Shape{7, 16}));
  for (auto v : y.data()) EXPECT_EQ(v, 0.5);
}

TEST(Classify, SharedThroughTime) {
  std::mt19937_64 rng(5);
  AffineClassifier c{random_tensor({3, 4}, rng), random_tensor({3}, rng)};
  Tensor x = random_tensor({5, 4}, rng);
  Tensor y = classify(x, c);
  const std::vector<std::size_t> perm{3, 0, 4, 1, 2};
  Tensor xp({5, 4});
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t f = 0; f < 4; ++f) xp.at({t, f}) = x.at({perm[t], f});
  Tensor yp = classify(xp, c);
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(yp.at({t, k}), y.at({perm[t], k}));
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 3; ++k) {
      double a = c.bias[k];
      for (std::size_t f = 0; f < 4; ++f) a += c.weight.at({k, f}) * x.at({t, f});
      EXPECT_NEAR(y.at({t, k}), oracle::sigmoid(a), 1e-15);
    }
  EXPECT_THROW(classify(Tensor({5, 3}), c), SizeError);
}

}  // namespace
}  // namespace sedconv::nn
