// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/complexity.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace sedconv {
namespace {

using u64 = std::uint64_t;

ModelConfig config(Variant v, std::size_t k = 3, std::size_t xi = 1) {
  ModelConfig c;
  c.variant = v;
  c.dil_kernel = k;
  c.dilation_time = xi;
  return c;
}

TEST(ClosedForms, SingleLayers) {
  EXPECT_EQ(dense_conv_parameters(256, 256, 5, 5), 1'638'400u);
  EXPECT_EQ(dws_conv_parameters(256, 256, 5, 5), 71'936u);

  nn::Rng rng(0);
  Conv2dLayer dense("c", 256, 256, {5, 5}, {1, 1}, {2, 2}, rng);
  DwsConvLayer dws("d", 256, 256, {5, 5}, {1, 1}, {2, 2}, true, rng);
  EXPECT_EQ(dense.parameter_count(false), 1'638'400u);
  EXPECT_EQ(dense.parameter_count(true), 1'638'400u + 256);
  EXPECT_EQ(dws.parameter_count(false), 71'936u);
  EXPECT_EQ(dws.parameter_count(true), 71'936u + 256 + 256);

  const Shape in{256, 1024, 40};
  EXPECT_EQ(dense.macs(in), u64{256} * 256 * 25 * 1024 * 40);
  EXPECT_EQ(dws.macs(in), u64{25} * 256 * 1024 * 40 + u64{256} * 256 * 1024 * 40);
}

// dws / dense == 1/K_o + 1/(K_h K_w), checked by cross-multiplying integers.
TEST(ClosedForms, MacRatioIsExact) {
  nn::Rng rng(0);
  for (std::size_t ko : {1u, 7u, 16u, 64u})
    for (std::size_t kh : {1u, 3u, 5u})
      for (std::size_t kw : {1u, 3u, 7u}) {
        const std::size_t ki = 5;
        Conv2dLayer dense("c", ki, ko, {kh, kw}, {1, 1}, {kh / 2, kw / 2}, rng);
        DwsConvLayer dws("d", ki, ko, {kh, kw}, {1, 1}, {kh / 2, kw / 2}, true, rng);
        const Shape in{ki, 13, 11};
        ASSERT_EQ(dense.output_shape(in), (Shape{ko, 13, 11}));
        const u64 d = dense.macs(in), s = dws.macs(in);
        // s / d == (kh kw + ko) / (ko kh kw)
        EXPECT_EQ(s * ko * kh * kw, d * (kh * kw + ko)) << ko << " " << kh << " " << kw;
        const u64 g = std::gcd(s, d);
        const u64 num = kh * kw + ko, den = ko * kh * kw, h = std::gcd(num, den);
        EXPECT_EQ(s / g, num / h);
        EXPECT_EQ(d / g, den / h);
      }
}

// Base model by hand: three conv blocks with batch-norm affine terms, a
// GRU on 256 features with one bias per gate, a 16-class classifier.
TEST(Model, BaseTotalFromHandCount) {
  const u64 conv1 = 1 * 256 * 25 + 256, conv23 = 256 * 256 * 25 + 256, bn = 2 * 256;
  const u64 gru = 3 * (256 * 256 + 256 * 256 + 256);
  const u64 cls = 256 * 16 + 16;
  const u64 expected = conv1 + 2 * conv23 + 3 * bn + gru + cls;
  EXPECT_EQ(expected, 3'683'600u);

  Model m = Model::build(config(Variant::kBase), 0);
  auto r = count_parameters(m);
  EXPECT_EQ(r.total_parameters, expected);
  EXPECT_NEAR(double(r.total_parameters), 3.68e6, 0.005e6);
  EXPECT_EQ(count_parameters(m, false).total_parameters, expected - 3 * 256 - 3 * bn - 3 * 256 - 16);
}

TEST(Model, TotalsAreLayerSums) {
  for (Variant v : {Variant::kBase, Variant::kDws, Variant::kDil, Variant::kDnd}) {
    Model m = Model::build(config(v, 5, 10), 0);
    auto r = count_macs(m, {1024, 40});
    u64 p = 0, mac = 0;
    for (const auto& l : r.layers) {
      p += l.parameters;
      mac += l.macs;
    }
    EXPECT_EQ(p, r.total_parameters);
    EXPECT_EQ(mac, r.total_macs);
    EXPECT_EQ(r.total_parameters, count_parameters(m).total_parameters);
  }
}

TEST(Model, DwsIsSmallerAndDilationAddsNothing) {
  const u64 base = count_parameters(Model::build(config(Variant::kBase), 0)).total_parameters;
  const u64 dws = count_parameters(Model::build(config(Variant::kDws), 0)).total_parameters;
  EXPECT_LT(dws, base);
  for (std::size_t k : grid_kernels()) {
    const u64 p1 = count_parameters(Model::build(config(Variant::kDnd, k, 1), 0)).total_parameters;
    for (std::size_t xi : grid_dilations()) {
      EXPECT_EQ(count_parameters(Model::build(config(Variant::kDnd, k, xi), 0)).total_parameters, p1);
      EXPECT_EQ(count_parameters(Model::build(config(Variant::kDil, k, xi), 0)).total_parameters,
                count_parameters(Model::build(config(Variant::kDil, k, 1), 0)).total_parameters);
    }
  }
}

TEST(Model, ParameterReductionOfAtLeastEightyPercent) {
  const u64 base = count_parameters(Model::build(config(Variant::kBase), 0)).total_parameters;
  const u64 dnd = count_parameters(Model::build(config(Variant::kDnd, 7, 10), 0)).total_parameters;
  EXPECT_LE(double(dnd) / double(base), 0.20);
}

TEST(Model, MacsNeedMatchingShape) {
  Model m = Model::build(config(Variant::kBase), 0);
  EXPECT_THROW(count_macs(m, {1024}), std::exception);
  EXPECT_THROW(count_macs(m, {1024, 3}), std::exception);
}

}  // namespace
}  // namespace sedconv
