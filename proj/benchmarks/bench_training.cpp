// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "sedconv/training.hpp"

namespace sedconv {
namespace {

// One forward, backward and Adam update on a batch of 4 sequences of 256
// frames. Args: variant, channels.
void BM_TrainStep(benchmark::State& state) {
  ModelConfig c;
  c.variant = static_cast<Variant>(state.range(0));
  c.channels = state.range(1);
  c.dil_kernel = 7;
  c.dilation_time = 10;
  c.input_frames = 256;
  Model model = Model::build(c, 1);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor x({4, 256, 40}), y({4, 256, 16});
  for (auto& v : x.data()) v = Real(u(rng));
  for (auto& v : y.data()) v = Real(rng() % 2);
  AdamState adam;
  nn::Rng drop(3);
  for (auto _ : state) {
    ad::Tape tape;
    ForwardContext ctx(tape, nn::Mode::kTrain, drop);
    auto params = model.parameters();
    for (auto* p : params) ctx.var(*p);
    auto loss = bce_loss(model.forward(ctx, tape.constant(x)), y);
    auto grads = ad::backward(tape, loss);
    std::vector<Tensor*> values;
    std::vector<const Tensor*> gs;
    for (auto* p : params) {
      values.push_back(&p->value);
      gs.push_back(&grads.at(p->name));
    }
    adam_step(values, gs, adam, AdamConfig{});
  }
  state.SetLabel(c.label());
}
BENCHMARK(BM_TrainStep)
    ->Args({int(Variant::kBase), 64})
    ->Args({int(Variant::kDnd), 64})
    ->Args({int(Variant::kBase), 128})
    ->Args({int(Variant::kDnd), 128})
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace sedconv
