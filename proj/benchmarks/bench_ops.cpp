// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "sedconv/ops.hpp"

namespace sedconv::nn {
namespace {

Tensor random(const Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor t(shape);
  for (auto& v : t.data()) v = Real(u(rng));
  return t;
}

// Args: channels, frames. Feature width 8 as in the second CNN block.
void BM_DenseConv5x5(benchmark::State& state) {
  const std::size_t c = state.range(0), t = state.range(1);
  const Tensor x = random({1, c, t, 8}, 1);
  DenseConvKernel k{random({c, c, 5, 5}, 2), random({c}, 3), {1, 1}, {2, 2}};
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, k));
  state.counters["MAC/s"] = benchmark::Counter(double(c * c * 25 * t * 8), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_DenseConv5x5)->Args({64, 256})->Args({128, 256})->Args({256, 256})->Unit(benchmark::kMillisecond);

void BM_DwsConv5x5(benchmark::State& state) {
  const std::size_t c = state.range(0), t = state.range(1);
  const Tensor x = random({1, c, t, 8}, 1);
  DepthwiseSeparableKernel k{random({c, 5, 5}, 2), random({c, c}, 3), random({c}, 4), random({c}, 5), {1, 1}, {2, 2}};
  for (auto _ : state) benchmark::DoNotOptimize(dws_conv(x, k));
  state.counters["MAC/s"] =
      benchmark::Counter(double((25 * c + c * c) * t * 8), benchmark::Counter::kIsIterationInvariantRate);
}
BENCHMARK(BM_DwsConv5x5)->Args({64, 256})->Args({128, 256})->Args({256, 256})->Unit(benchmark::kMillisecond);

// Args: kernel, time dilation. 256 channels in, 32 out, width 10.
void BM_DilatedConv(benchmark::State& state) {
  const std::size_t k = state.range(0), xi = state.range(1), t = 256;
  const Tensor x = random({1, 256, t, 10}, 1);
  DilatedConvKernel kern{random({32, 256, k, k}, 2), random({32}, 3), {xi, 1}, {(k / 2) * xi, 0}};
  for (auto _ : state) benchmark::DoNotOptimize(dilated_conv2d(x, kern));
}
BENCHMARK(BM_DilatedConv)->Args({3, 1})->Args({7, 1})->Args({7, 10})->Args({7, 100})->Unit(benchmark::kMillisecond);

// Args: hidden size, frames.
void BM_GruForward(benchmark::State& state) {
  const std::size_t h = state.range(0), t = state.range(1);
  const Tensor x = random({4, t, h}, 1);
  GruParams p{random({3, h, h}, 2), random({3, h, h}, 3), random({3, h}, 4)};
  for (auto _ : state) benchmark::DoNotOptimize(gru_forward(x, p));
}
BENCHMARK(BM_GruForward)->Args({64, 256})->Args({256, 256})->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace sedconv::nn
