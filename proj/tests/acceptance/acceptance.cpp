// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "sedconv/autodiff.hpp"
#include "sedconv/checkpoint.hpp"
#include "sedconv/complexity.hpp"
#include "sedconv/metrics.hpp"
#include "sedconv/training.hpp"

namespace sedconv {
namespace {

using u64 = std::uint64_t;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

ModelConfig paper_config(Variant v, std::size_t k = 3, std::size_t xi = 1) {
  ModelConfig c;
  c.variant = v;
  c.dil_kernel = k;
  c.dilation_time = xi;
  return c;
}

// ---------------------------------------------------------------------------

Outcome baseline_parameters() {
  const u64 n = count_parameters(Model::build(paper_config(Variant::kBase), 0)).total_parameters;
  const double rel = std::abs(double(n) - 3.68e6) / 3.68e6;
  return {rel <= 0.02, "N_P(base) = " + std::to_string(n) + ", " + fmt("%.2f%%", 100 * rel) + " from 3.68M"};
}

Outcome parameter_formulas() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> ch(1, 64), k(1, 7);
  nn::Rng init(0);
  int bad = 0;
  for (int i = 0; i < 50; ++i) {
    const std::size_t ki = ch(rng), ko = ch(rng), kh = k(rng), kw = k(rng);
    Conv2dLayer dense("dense", ki, ko, {kh, kw}, {1, 1}, {0, 0}, init);
    DwsConvLayer dws("dws", ki, ko, {kh, kw}, {1, 1}, {0, 0}, true, init);
    bad += dense.parameter_count(false) != u64{ki} * ko * kh * kw;
    bad += dws.parameter_count(false) != u64{ki} * kh * kw + u64{ki} * ko;
  }
  return {bad == 0, std::to_string(100 - bad) + "/100 layer counts exact over 50 tuples"};
}

Outcome mac_identity() {
  nn::Rng init(0);
  int checked = 0, bad = 0;
  std::vector<std::size_t> kernels = grid_kernels();
  kernels.push_back(5);
  for (std::size_t ko : {std::size_t{256}, std::size_t{32}})
    for (std::size_t k : kernels)
      for (std::size_t width : {40u, 20u, 10u}) {
        Conv2dLayer dense("dense", 256, ko, {k, k}, {1, 1}, {k / 2, k / 2}, init);
        DwsConvLayer dws("dws", 256, ko, {k, k}, {1, 1}, {k / 2, k / 2}, true, init);
        const Shape in{256, 1024, width};
        if (dense.output_shape(in) != Shape{ko, 1024, width}) ++bad;
        // dws / dense == 1/K_o + 1/(K_h K_w)  <=>  dws * K_o K_h K_w == dense * (K_h K_w + K_o)
        const u64 d = dense.macs(in), s = dws.macs(in);
        bad += s * ko * k * k != d * (k * k + ko);
        ++checked;
      }
  return {bad == 0, std::to_string(checked - bad) + "/" + std::to_string(checked) + " shapes satisfy the identity exactly"};
}

Outcome dilation_degeneration() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> dim(1, 4), size(5, 12), kern(1, 5), pad(0, 2);
  int identical = 0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t b = dim(rng), ci = dim(rng), co = dim(rng), h = size(rng), w = size(rng);
    const std::size_t kh = kern(rng), kw = kern(rng);
    const nn::Extent2 p{pad(rng), pad(rng)};
    Tensor x = oracle::random_tensor({b, ci, h, w}, rng), wt = oracle::random_tensor({co, ci, kh, kw}, rng);
    Tensor bias = oracle::random_tensor({co}, rng);
    Tensor probe;
    auto run = [&](bool dilated) {
      ad::Tape t;
      ad::Var xv = t.leaf("x", x), wv = t.leaf("w", wt), bv = t.leaf("b", bias);
      ad::Var y = dilated ? ad::dilated_conv2d(xv, wv, bv, {1, 1}, p) : ad::conv2d(xv, wv, bv, {1, 1}, p);
      if (probe.empty()) probe = oracle::random_tensor(y.shape(), rng);
      ad::GradientSet g = ad::backward(t, ad::sum(ad::mul(y, t.constant(probe))));
      return std::make_tuple(y.value(), g.at("x"), g.at("w"), g.at("b"));
    };
    identical += run(true) == run(false);
  }
  return {identical == 100, std::to_string(identical) + "/100 instances bit-identical (forward and backward)"};
}

Outcome operator_oracles() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ch(1, 4), sp(4, 16), kern(1, 5), pad(0, 2), st(1, 2), dil(1, 3);
  double worst = 0;
  for (int i = 0; i < 40; ++i) {
    const std::size_t b = ch(rng), ci = ch(rng), co = ch(rng), h = sp(rng), w = sp(rng);
    const std::size_t kh = std::min(kern(rng), h), kw = std::min(kern(rng), w);
    oracle::Geometry g{st(rng), st(rng), pad(rng), pad(rng), 1, 1};
    Tensor x = oracle::random_tensor({b, ci, h, w}, rng);

    nn::DenseConvKernel dense{oracle::random_tensor({co, ci, kh, kw}, rng), oracle::random_tensor({co}, rng),
                              {g.sh, g.sw}, {g.ph, g.pw}};
    worst = std::max(worst, oracle::max_relative_error(nn::conv2d(x, dense),
                                                       oracle::conv2d(x, dense.weights, dense.bias, g)));

    nn::DepthwiseSeparableKernel sep{oracle::random_tensor({ci, kh, kw}, rng), oracle::random_tensor({co, ci}, rng),
                                     oracle::random_tensor({ci}, rng), oracle::random_tensor({co}, rng),
                                     {g.sh, g.sw}, {g.ph, g.pw}};
    const Tensor dw_ref = oracle::depthwise(x, sep.spatial, sep.bias_spatial, g);
    worst = std::max(worst, oracle::max_relative_error(nn::depthwise_conv(x, sep), dw_ref));
    worst = std::max(worst, oracle::max_relative_error(nn::pointwise_conv(x, sep),
                                                       oracle::pointwise(x, sep.pointwise, sep.bias_pointwise)));

    oracle::Geometry gd{1, 1, pad(rng), pad(rng), dil(rng), dil(rng)};
    const std::size_t dkh = std::min(kern(rng), (h + 2 * gd.ph - 1) / gd.dh + 1);
    const std::size_t dkw = std::min(kern(rng), (w + 2 * gd.pw - 1) / gd.dw + 1);
    nn::DilatedConvKernel dk{oracle::random_tensor({co, ci, dkh, dkw}, rng), oracle::random_tensor({co}, rng),
                             {gd.dh, gd.dw}, {gd.ph, gd.pw}};
    worst = std::max(worst, oracle::max_relative_error(nn::dilated_conv2d(x, dk),
                                                       oracle::conv2d(x, dk.weights, dk.bias, gd)));
  }
  return {worst < 1e-9, "worst relative error " + fmt("%.2e", worst) + " over 40 random shape draws"};
}

// Finite differences through a layer's own forward, w.r.t. input and
// parameters, probed by a fixed random weighting of the output.
double layer_gradient_error(Layer& layer, const Tensor& x, nn::Mode mode = nn::Mode::kTrain) {
  std::vector<ad::NamedTensor> params{{"input", x}};
  for (const auto& p : layer.parameters()) params.push_back({p.name, p.value});
  auto f = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    nn::Rng rng(17);
    ForwardContext ctx(t, mode, rng);
    for (std::size_t i = 0; i < layer.parameters().size(); ++i) ctx.bind(layer.parameters()[i], v[i + 1]);
    ad::Var y = layer.forward(v[0], ctx);
    std::mt19937_64 probe(23);
    return ad::sum(ad::mul(y, t.constant(oracle::random_tensor(y.shape(), probe))));
  };
  ad::GradCheckOptions o;
  o.max_entries_per_param = 60;
  return ad::finite_difference_check(f, params, o).max_relative_error;
}

double model_gradient_error(Model& model, const Tensor& x, const Tensor& y) {
  std::vector<ad::NamedTensor> params;
  for (auto* p : model.parameters()) params.push_back({p->name, p->value});
  auto f = [&](ad::Tape& t, const std::vector<ad::Var>& v) {
    nn::Rng rng(29);
    ForwardContext ctx(t, nn::Mode::kTrain, rng);
    auto ps = model.parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) ctx.bind(*ps[i], v[i]);
    return bce_loss(model.forward(ctx, t.constant(x)), y);
  };
  // Biases feeding a batch norm in train mode have an exact zero gradient
  // whenever the ReLU between them is active on the whole batch. Central
  // differences resolve such entries only to eps * |f| / h (about 1e-10 at
  // h = 1e-6), so relative error is measured against a 1e-6 floor and a
  // 1e-5 step; every entry is checked.
  ad::GradCheckOptions o;
  o.step = 1e-5;
  o.floor = 1e-6;
  o.max_entries_per_param = 0;
  return ad::finite_difference_check(f, params, o).max_relative_error;
}

Outcome gradient_correctness() {
  std::mt19937_64 rng(6);
  nn::Rng init(6);
  std::ostringstream detail;
  double worst = 0;
  auto note = [&](const std::string& name, double e) {
    worst = std::max(worst, e);
    if (e >= 1e-4) detail << name << "=" << fmt("%.1e", e) << " ";
  };
  const Tensor img = oracle::random_tensor({2, 3, 6, 7}, rng);
  Conv2dLayer conv("conv", 3, 4, {3, 3}, {1, 1}, {1, 1}, init);
  note("conv", layer_gradient_error(conv, img));
  DwsConvLayer dws("dws", 3, 4, {3, 3}, {1, 1}, {1, 1}, true, init);
  note("dws", layer_gradient_error(dws, img));
  DilatedConvLayer dil("dil", 3, 2, {3, 3}, {2, 1}, {2, 0}, init);
  note("dilated", layer_gradient_error(dil, img));
  BatchNormLayer bn("bn", 3);
  note("batchnorm", layer_gradient_error(bn, img));
  note("batchnorm-eval", layer_gradient_error(bn, img, nn::Mode::kEval));
  MaxPoolLayer pool("pool", {1, 2});
  note("maxpool", layer_gradient_error(pool, img));
  for (auto [name, kind] : {std::pair{"relu", nn::Activation::kRelu}, std::pair{"sigmoid", nn::Activation::kSigmoid},
                            std::pair{"tanh", nn::Activation::kTanh}}) {
    ActivationLayer act(name, kind);
    note(name, layer_gradient_error(act, img));
  }
  DropoutLayer drop("dropout", 0.25);
  note("dropout", layer_gradient_error(drop, img));
  FramesLayer frames("frames");
  note("frames", layer_gradient_error(frames, img));
  const Tensor seq = oracle::random_tensor({2, 9, 5}, rng);
  GruLayer gru("gru", 5, 4, init);
  note("gru", layer_gradient_error(gru, seq));
  ClassifierLayer cls("classifier", 5, 3, init);
  note("classifier", layer_gradient_error(cls, seq));
  AddChannelLayer add("input");
  note("input", layer_gradient_error(add, seq));

  for (auto [k, xi] : {std::pair<std::size_t, std::size_t>{3, 1}, {7, 10}}) {
    ModelConfig c = paper_config(Variant::kDnd, k, xi);
    c.channels = 4;
    c.dil_channels = 4;
    c.classes = 2;
    c.input_frames = 8;
    Model m = Model::build(c, 7);
    const Tensor x = oracle::random_tensor({2, 8, 40}, rng);
    Tensor y({2, 8, 2});
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = Real(rng() % 2);
    note(c.label(), model_gradient_error(m, x, y));
  }
  return {worst < 1e-4, "worst relative error " + fmt("%.2e", worst) + " over 14 layer types and 2 dnd models" +
                            (detail.str().empty() ? "" : " " + detail.str())};
}

Outcome padding_rule() {
  int bad = 0, models = 0;
  for (std::size_t xi : grid_dilations()) {
    bad += compute_time_padding(3, xi) != 1 * xi;
    bad += compute_time_padding(5, xi) != 2 * xi;
    bad += compute_time_padding(7, xi) != 3 * xi;
    bad += compute_time_padding(11, xi) != 5 * xi;
  }
  Tensor x({1, 1024, 40});
  for (Variant v : {Variant::kDil, Variant::kDnd})
    for (std::size_t k : grid_kernels())
      for (std::size_t xi : grid_dilations()) {
        ModelConfig c = paper_config(v, k, xi);
        c.channels = 2;  // time length does not depend on width
        c.dil_channels = 2;
        Model m = Model::build(c, 0);
        bad += m.predict(x).dim(1) != 1024;
        ++models;
      }
  return {bad == 0, "padding table for 4 kernels x 4 dilations; T=1024 preserved by " + std::to_string(models) +
                        " grid models (" + std::to_string(bad) + " mismatches)"};
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(8);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::bernoulli_distribution pp(0.05 + 0.9 * (trial % 20) / 20.0), rp(0.3);
    std::vector<std::vector<int>> p(32, std::vector<int>(16)), r = p;
    Tensor pt({32, 16}), rt({32, 16});
    for (std::size_t t = 0; t < 32; ++t)
      for (std::size_t c = 0; c < 16; ++c) {
        p[t][c] = pp(rng), r[t][c] = rp(rng);
        pt.at({t, c}) = Real(p[t][c]), rt.at({t, c}) = Real(r[t][c]);
      }
    const auto o = oracle::count_frames(p, r);
    const double f1 = o.tp + o.fp + o.fn == 0 ? 1.0 : 2.0 * o.tp / double(2 * o.tp + o.fp + o.fn);
    const auto er = error_rate(pt, rt);
    const bool er_ok = o.n_ref == 0 ? !er.has_value() : (er && *er == double(o.s + o.d + o.i) / double(o.n_ref));
    bad += f1_score(pt, rt) != f1 || !er_ok;
  }
  Tensor ref({2, 2}, {1, 0, 0, 1}), pred({2, 2}, {1, 1, 0, 0});
  const bool hand = f1_score(pred, ref) == 0.5 && error_rate(pred, ref) == 1.0;
  return {bad == 0 && hand, std::to_string(1000 - bad) + "/1000 random pairs agree with brute force; hand case " +
                                (hand ? "F1=0.5 ER=1.0" : "WRONG")};
}

Outcome training_protocol() {
  SynthConfig sc;
  sc.mixtures = 5;
  sc.mixture_frames = 64;
  sc.frames = 32;
  sc.min_duration = 4;
  sc.max_duration = 24;
  sc.seed = 9;
  const Dataset data = synthesize_dataset(sc);
  ModelConfig mc = paper_config(Variant::kDnd);
  mc.channels = 4;
  mc.dil_channels = 3;
  mc.input_frames = 32;

  struct Script {
    std::vector<double> losses;
    std::size_t epochs, best;
  };
  std::vector<double> a{5, 4, 3};
  a.insert(a.end(), 40, 3.0);  // ties are not improvements
  std::vector<double> b{5};
  for (int i = 0; i < 29; ++i) b.push_back(6);
  b.push_back(4.5);  // improves after 29 stale epochs, resetting the count
  b.insert(b.end(), 40, 7.0);
  std::vector<double> c;
  for (int i = 0; i < 35; ++i) c.push_back(10.0 - 0.1 * i);  // never stale
  const std::vector<Script> scripts{{a, 33, 3}, {b, 61, 31}, {c, 35, 35}};

  std::ostringstream detail;
  bool ok = true;
  for (const auto& s : scripts) {
    Model m = Model::build(mc, 3);
    std::vector<char> saved;
    FitHooks h;
    h.validation_loss = [&](std::size_t epoch, double) { return s.losses.at(epoch - 1); };
    h.on_new_best = [&](std::size_t, Model& model) { saved = encode_checkpoint(model.config(), model.state()); };
    TrainConfig tc;
    tc.batch_size = 4;
    tc.patience = 30;
    tc.max_epochs = s.losses.size();
    RunRecord r = fit(m, data, tc, h);
    const bool restored = encode_checkpoint(m.config(), m.state()) == saved;
    ok = ok && r.epochs.size() == s.epochs && r.best_epoch == s.best && restored;
    if (detail.tellp() > 0) detail << "; ";
    detail << "stop " << r.epochs.size() << "/" << s.epochs << " best " << r.best_epoch << "/" << s.best
           << (restored ? " restored" : " NOT restored");
  }
  return {ok, detail.str()};
}

SynthConfig desk_data(std::size_t frames) {
  SynthConfig sc;
  sc.mixtures = 20;
  sc.frames = frames;
  sc.mixture_frames = 2 * frames;
  sc.seed = 7;
  return sc;
}

Outcome desk_learning() {
  const Dataset data = synthesize_dataset(desk_data(256));
  ModelConfig mc = paper_config(Variant::kDnd, 3, 1);
  mc.channels = 32;
  mc.input_frames = 256;
  Model m = Model::build(mc, 1);
  TrainConfig tc;
  tc.max_epochs = 40;
  tc.patience = 10;
  tc.seed = 1;
  const double initial = evaluate_loss(m, data.train.samples);
  RunRecord r = fit(m, data, tc);
  const double final_loss = evaluate_loss(m, data.train.samples);
  const Scores s = evaluate_split(m, data.test.samples);
  const double er = s.error_rate.value_or(INFINITY);
  const double drop = 1 - final_loss / initial;
  return {s.f1 >= 0.70 && er <= 0.5 && drop >= 0.5,
          "dnd^{3|1}: test F1 " + fmt("%.3f", s.f1) + ", ER " + fmt("%.3f", er) + ", train loss " +
              fmt("%.4f", initial) + " -> " + fmt("%.4f", final_loss) + " (" + fmt("%.0f%%", 100 * drop) +
              " drop), best epoch " + std::to_string(r.best_epoch) + "/" + std::to_string(r.epochs.size())};
}

Outcome relative_efficiency() {
  const Dataset data = synthesize_dataset(desk_data(256));
  ModelConfig base = paper_config(Variant::kBase);
  base.channels = 128;
  base.input_frames = 256;
  ModelConfig dnd = base;
  dnd.variant = Variant::kDnd;
  dnd.dil_kernel = 7;
  dnd.dilation_time = 10;
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.repetitions = 3;
  ExperimentHooks hooks;
  hooks.seeds = {1, 2, 3};
  const auto rows = repeat_experiment({GridPoint{base}, GridPoint{dnd}}, data, tc, hooks);
  for (const auto& r : rows) {
    if (r.failed) return {false, r.label + " failed: " + r.error};
  }
  const double tb = rows[0].epoch_seconds.mean, td = rows[1].epoch_seconds.mean;
  return {td < tb, "mean epoch seconds over 3 runs at 128 channels, T=256: dnd^{7|10} " + fmt("%.2f", td) +
                       " +- " + fmt("%.2f", rows[1].epoch_seconds.std) + " vs base " + fmt("%.2f", tb) + " +- " +
                       fmt("%.2f", rows[0].epoch_seconds.std)};
}

Outcome reduction_claim() {
  const u64 base = count_parameters(Model::build(paper_config(Variant::kBase), 0)).total_parameters;
  const u64 dnd = count_parameters(Model::build(paper_config(Variant::kDnd, 7, 10), 0)).total_parameters;
  const double ratio = double(dnd) / double(base);
  return {ratio <= 0.20, "N_P(dnd^{7|10}) / N_P(base) = " + std::to_string(dnd) + " / " + std::to_string(base) +
                             " = " + fmt("%.4f", ratio)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> check;
};

}  // namespace
}  // namespace sedconv

int main() {
  using namespace sedconv;
  retain_freed_memory();
  const std::vector<Criterion> criteria{
      {1, "baseline parameter count", 1, baseline_parameters},
      {2, "parameter formulas", 1, parameter_formulas},
      {3, "MAC reduction identity", 1, mac_identity},
      {4, "dilation degeneration", 10, dilation_degeneration},
      {5, "operator oracles", 30, operator_oracles},
      {6, "gradient correctness", 120, gradient_correctness},
      {7, "time padding rule", 1, padding_rule},
      {8, "metrics oracle", 5, metrics_oracle},
      {9, "training protocol", 5, training_protocol},
      {10, "desk-scale learning", 1800, desk_learning},
      {11, "relative efficiency", 1800, relative_efficiency},
      {12, "parameter reduction", 1, reduction_claim},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_budget = secs < c.budget_seconds;
    const bool pass = o.pass && in_budget;
    failures += !pass;
    std::printf("%s criterion %d (%s): %s [%.2fs%s]\n", pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs,
                in_budget ? "" : ", over budget");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
