// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

namespace sedconv {

namespace {

std::string real_text(double v, const char* fmt = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::size_t get_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (patience == 0) throw ConfigError("patience must be at least 1");
  if (max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (repetitions == 0) throw ConfigError("repetitions must be at least 1");
  if (!(adam.learning_rate > 0)) throw ConfigError("learning rate must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0)) throw ConfigError("Adam epsilon must be positive");
}

KeyValueConfig TrainConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("batch_size", std::to_string(batch_size));
  kv.set("learning_rate", real_text(adam.learning_rate));
  kv.set("beta1", real_text(adam.beta1));
  kv.set("beta2", real_text(adam.beta2));
  kv.set("adam_epsilon", real_text(adam.epsilon));
  kv.set("patience", std::to_string(patience));
  kv.set("max_epochs", std::to_string(max_epochs));
  kv.set("seed", std::to_string(seed));
  kv.set("repetitions", std::to_string(repetitions));
  return kv;
}

TrainConfig TrainConfig::from_kv(const KeyValueConfig& kv) {
  TrainConfig c;
  c.batch_size = get_size(kv, "batch_size", c.batch_size);
  c.adam.learning_rate = kv.get_real("learning_rate", c.adam.learning_rate);
  c.adam.beta1 = kv.get_real("beta1", c.adam.beta1);
  c.adam.beta2 = kv.get_real("beta2", c.adam.beta2);
  c.adam.epsilon = kv.get_real("adam_epsilon", c.adam.epsilon);
  c.patience = get_size(kv, "patience", c.patience);
  c.max_epochs = get_size(kv, "max_epochs", c.max_epochs);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.repetitions = get_size(kv, "repetitions", c.repetitions);
  return c;
}

// ---------------------------------------------------------------------------

double bce_loss(const Tensor& pred, const Tensor& target, Real epsilon) {
  if (pred.shape() != target.shape()) {
    throw SizeError("bce_loss: prediction " + shape_string(pred.shape()) + " vs target " +
                    shape_string(target.shape()));
  }
  double acc = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp<double>(pred[i], epsilon, 1 - epsilon);
    const double y = target[i];
    acc -= y * std::log(p) + (1 - y) * std::log(1 - p);
  }
  return acc / static_cast<double>(pred.size());
}

ad::Var bce_loss(const ad::Var& pred, const Tensor& target, Real epsilon) {
  const double value = bce_loss(pred.value(), target, epsilon);
  Tensor p = pred.value();
  return pred.tape().record(
      Tensor::scalar(static_cast<Real>(value)), {pred},
      [p = std::move(p), target, epsilon](const Tensor& grad, const std::vector<bool>&) {
        Tensor g(p.shape());
        const double scale = grad[0] / static_cast<double>(p.size());
        for (std::size_t i = 0; i < p.size(); ++i) {
          // Zero slope where the clamp is active.
          if (p[i] <= epsilon || p[i] >= 1 - epsilon) continue;
          const double y = target[i];
          g[i] = static_cast<Real>(scale * (-y / p[i] + (1 - y) / (1 - p[i])));
        }
        return std::vector<Tensor>{std::move(g)};
      });
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state,
               const AdamConfig& config) {
  if (params.size() != grads.size()) throw SizeError("adam_step: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.emplace_back(p->shape());
      state.second_moment.emplace_back(p->shape());
    }
  }
  if (state.first_moment.size() != params.size()) throw SizeError("adam_step: state does not match parameters");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1 - std::pow(config.beta1, t);
  const double c2 = 1 - std::pow(config.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    if (g.shape() != p.shape()) throw SizeError("adam_step: gradient shape differs from parameter");
    Real* m = state.first_moment[k].raw();
    Real* v = state.second_moment[k].raw();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i];
      m[i] = static_cast<Real>(config.beta1 * m[i] + (1 - config.beta1) * gi);
      v[i] = static_cast<Real>(config.beta2 * v[i] + (1 - config.beta2) * gi * gi);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] = static_cast<Real>(p[i] - config.learning_rate * mhat / (std::sqrt(vhat) + config.epsilon));
    }
  }
}

EarlyStopping::EarlyStopping(std::size_t patience)
    : patience_(patience), best_(std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw ConfigError("patience must be at least 1");
}

bool EarlyStopping::observe(double loss) {
  ++epochs_;
  if (loss < best_) {
    best_ = loss;
    best_epoch_ = epochs_;
    stale_ = 0;
    return true;
  }
  ++stale_;
  return false;
}

// ---------------------------------------------------------------------------

double RunRecord::mean_epoch_seconds() const {
  if (epochs.empty()) return 0;
  double s = 0;
  for (const auto& e : epochs) s += e.seconds;
  return s / static_cast<double>(epochs.size());
}

std::string RunRecord::to_text() const {
  std::string out = "# run " + label + "\n# seed " + std::to_string(seed) + "\n# best_epoch " +
                    std::to_string(best_epoch) + "\n# best_val_loss " + real_text(best_val_loss) + "\n";
  if (test_f1) out += "# test_f1 " + real_text(*test_f1) + "\n";
  if (test_er) out += "# test_er " + real_text(*test_er) + "\n";
  out += "# index train_loss val_loss seconds\n";
  for (const auto& e : epochs) {
    out += std::to_string(e.index) + " " + real_text(e.train_loss) + " " + real_text(e.val_loss) + " " +
           real_text(e.seconds) + "\n";
  }
  return out;
}

RunRecord RunRecord::from_text(std::string_view text) {
  RunRecord r;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    if (line[0] == '#') {
      std::string hash, key;
      ls >> hash >> key;
      if (key == "run") {
        std::getline(ls >> std::ws, r.label);
      } else if (key == "seed") {
        ls >> r.seed;
      } else if (key == "best_epoch") {
        ls >> r.best_epoch;
      } else if (key == "best_val_loss") {
        std::string v;
        ls >> v;
        r.best_val_loss = std::stod(v);
      } else if (key == "test_f1" || key == "test_er") {
        std::string v;
        ls >> v;
        (key == "test_f1" ? r.test_f1 : r.test_er) = std::stod(v);
      }
      continue;
    }
    EpochRecord e;
    std::string a, b, c;
    if (!(ls >> e.index >> a >> b >> c)) {
      throw DataError("run record line " + std::to_string(line_no) + ": expected 4 columns");
    }
    e.train_loss = std::stod(a);
    e.val_loss = std::stod(b);
    e.seconds = std::stod(c);
    r.epochs.push_back(e);
  }
  return r;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch, nn::Rng* rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (rng) {
    for (std::size_t i = n; i > 1; --i) {
      const double u = static_cast<double>((*rng)() >> 11) * 0x1.0p-53;
      std::swap(order[i - 1], order[static_cast<std::size_t>(u * static_cast<double>(i))]);
    }
  }
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
  }
  return out;
}

}  // namespace

double evaluate_loss(Model& model, const std::vector<SequenceSample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw DataError("cannot evaluate the loss of an empty split");
  double total = 0;
  std::size_t count = 0;
  for (const auto& idx : make_batches(samples.size(), std::max<std::size_t>(batch_size, 1), nullptr)) {
    const auto pred = model.predict(stack_features(samples, idx), idx.size());
    const auto target = stack_targets(samples, idx);
    total += bce_loss(pred, target) * static_cast<double>(pred.size());
    count += pred.size();
  }
  return total / static_cast<double>(count);
}

Scores evaluate_split(Model& model, const std::vector<SequenceSample>& samples, std::size_t batch_size,
                      Averaging averaging) {
  if (samples.empty()) throw DataError("cannot score an empty split");
  std::vector<Tensor> preds, refs;
  for (const auto& idx : make_batches(samples.size(), std::max<std::size_t>(batch_size, 1), nullptr)) {
    const auto probs = model.predict(stack_features(samples, idx), idx.size());
    const std::size_t per = probs.size() / idx.size();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      Tensor p({probs.dim(1), probs.dim(2)}, std::vector<Real>(probs.raw() + b * per, probs.raw() + (b + 1) * per));
      preds.push_back(binarize(p));
      refs.push_back(samples[idx[b]].targets);
    }
  }
  return evaluate(preds, refs, averaging);
}

RunRecord fit(Model& model, const Dataset& data, const TrainConfig& config, const FitHooks& hooks) {
  config.validate();
  if (data.train.samples.empty()) throw DataError("training split is empty");
  if (data.validation.samples.empty()) throw DataError("validation split is empty");

  using Clock = std::chrono::steady_clock;
  nn::Rng rng(config.seed);
  EarlyStopping stopper(config.patience);
  AdamState adam;
  ModelState best = model.state();
  RunRecord record;
  record.label = model.config().label();
  record.seed = config.seed;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    double loss_sum = 0;
    std::size_t loss_count = 0;
    std::size_t batch_no = 0;
    for (const auto& idx : make_batches(data.train.samples.size(), config.batch_size, &rng)) {
      ++batch_no;
      const auto x = stack_features(data.train.samples, idx);
      const auto y = stack_targets(data.train.samples, idx);
      ad::Tape tape;
      ForwardContext ctx(tape, nn::Mode::kTrain, rng);
      auto params = model.parameters();
      for (auto* p : params) ctx.var(*p);
      auto loss = bce_loss(model.forward(ctx, tape.constant(x)), y);
      const double value = loss.value()[0];
      if (!std::isfinite(value)) {
        throw NumericError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no));
      }
      const auto grads = ad::backward(tape, loss);
      std::vector<Tensor*> values;
      std::vector<const Tensor*> gs;
      for (auto* p : params) {
        values.push_back(&p->value);
        gs.push_back(&grads.at(p->name));
      }
      adam_step(values, gs, adam, config.adam);
      loss_sum += value * static_cast<double>(y.size());
      loss_count += y.size();
    }

    double val = evaluate_loss(model, data.validation.samples, config.batch_size);
    if (hooks.validation_loss) val = hooks.validation_loss(epoch, val);
    if (!std::isfinite(val)) throw NumericError("non-finite validation loss at epoch " + std::to_string(epoch));
    const std::chrono::duration<double> elapsed = Clock::now() - start;

    EpochRecord e{epoch, loss_sum / static_cast<double>(loss_count), val, elapsed.count()};
    record.epochs.push_back(e);
    if (stopper.observe(val)) {
      best = model.state();
      if (hooks.on_new_best) hooks.on_new_best(epoch, model);
    }
    if (hooks.on_epoch_end) hooks.on_epoch_end(e);
    if (stopper.should_stop()) break;
  }
  model.load_state(best);
  record.best_epoch = stopper.best_epoch();
  record.best_val_loss = stopper.best_loss();
  return record;
}

// ---------------------------------------------------------------------------

std::vector<GridPoint> make_grid(const ModelConfig& base_config, const std::vector<Variant>& variants,
                                 const std::vector<std::size_t>& kernels, const std::vector<std::size_t>& dilations) {
  auto wants = [&](Variant v) { return std::find(variants.begin(), variants.end(), v) != variants.end(); };
  auto point = [&](Variant v, std::size_t k, std::size_t d) {
    ModelConfig c = base_config;
    c.variant = v;
    if (uses_dilated(v)) {
      c.dil_kernel = k;
      c.dilation_time = d;
    }
    return GridPoint{c};
  };
  std::vector<GridPoint> grid;
  for (Variant v : {Variant::kBase, Variant::kDil, Variant::kDws, Variant::kDnd}) {
    if (!wants(v)) continue;
    if (!uses_dilated(v)) {
      grid.push_back(point(v, 0, 0));
      continue;
    }
    for (auto k : kernels) {
      for (auto d : dilations) grid.push_back(point(v, k, d));
    }
  }
  return grid;
}

std::vector<GridPoint> full_grid(const ModelConfig& base_config) {
  return make_grid(base_config, {Variant::kBase, Variant::kDws, Variant::kDil, Variant::kDnd}, grid_kernels(),
                   grid_dilations());
}

std::optional<double> reference_parameter_count(const ModelConfig& c) {
  if (c.channels != 256 || c.classes != 16 || c.input_features != 40) return std::nullopt;
  switch (c.variant) {
    case Variant::kBase: return 3.68e6;
    case Variant::kDws: return 0.62e6;
    case Variant::kDil: return c.dil_kernel == 7 ? 3.64e6 : 3.81e6;
    case Variant::kDnd: return c.dil_kernel == 7 ? 0.58e6 : 0.74e6;
  }
  return std::nullopt;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) {
    out.mean = out.std = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double n = static_cast<double>(values.size());
  for (double v : values) out.mean += v;
  out.mean /= n;
  double ss = 0;
  for (double v : values) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / n);
  return out;
}

std::vector<AggregateRow> repeat_experiment(const std::vector<GridPoint>& grid, const Dataset& data,
                                            const TrainConfig& config, const ExperimentHooks& hooks) {
  if (grid.empty()) throw ConfigError("no grid points");
  config.validate();
  std::vector<AggregateRow> rows;
  for (const auto& gp : grid) {
    AggregateRow row;
    row.label = gp.model.label();
    row.variant = gp.model.variant;
    row.dws = uses_dws(gp.model.variant);
    if (uses_dilated(gp.model.variant)) {
      row.dilation = gp.model.dilation_time;
      row.kernel = gp.model.dil_kernel;
    }
    try {
      std::vector<double> f1s, ers, secs;
      for (std::size_t r = 0; r < config.repetitions; ++r) {
        const std::uint64_t seed = r < hooks.seeds.size() ? hooks.seeds[r] : config.seed + r;
        auto model = Model::build(gp.model, seed);
        row.parameters = 0;
        for (const auto* p : model.parameters()) row.parameters += p->value.size();
        TrainConfig c = config;
        c.seed = seed;
        auto record = fit(model, data, c, hooks.fit);
        const auto scores = evaluate_split(model, data.test.samples, config.batch_size);
        record.test_f1 = scores.f1;
        record.test_er = scores.error_rate;
        f1s.push_back(scores.f1);
        if (scores.error_rate) ers.push_back(*scores.error_rate);
        secs.push_back(record.mean_epoch_seconds());
        if (hooks.on_run_end) hooks.on_run_end(gp, r, record, model);
      }
      row.f1 = mean_std(f1s);
      row.er = mean_std(ers);
      row.epoch_seconds = mean_std(secs);
      row.repetitions = config.repetitions;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

std::string num(double v) { return real_text(v, "%.6g"); }

std::string opt_size(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : "N/A"; }

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

}  // namespace

std::string format_table_text(const std::vector<AggregateRow>& rows) {
  const std::vector<std::size_t> w{14, 4, 5, 7, 22, 22, 10, 24};
  std::string out = pad("model", w[0]) + pad("dws", w[1]) + pad("xi_h", w[2]) + pad("kernel", w[3]) +
                    pad("F1 (mean +- std)", w[4]) + pad("ER (mean +- std)", w[5]) + pad("N_P", w[6]) +
                    "epoch seconds (mean +- std)\n";
  for (const auto& r : rows) {
    out += pad(r.label, w[0]) + pad(r.dws ? "yes" : "no", w[1]) + pad(opt_size(r.dilation), w[2]) +
           pad(r.kernel ? std::to_string(*r.kernel) + "x" + std::to_string(*r.kernel) : "N/A", w[3]);
    if (r.failed) {
      out += "FAILED: " + r.error + "\n";
      continue;
    }
    out += pad(num(r.f1.mean) + " +- " + num(r.f1.std), w[4]) + pad(num(r.er.mean) + " +- " + num(r.er.std), w[5]) +
           pad(std::to_string(r.parameters), w[6]) + num(r.epoch_seconds.mean) + " +- " +
           num(r.epoch_seconds.std) + "\n";
  }
  return out;
}

std::string format_table_csv(const std::vector<AggregateRow>& rows) {
  std::string out =
      "label,variant,dws,dilation,kernel,f1_mean,f1_std,er_mean,er_std,parameters,epoch_seconds_mean,"
      "epoch_seconds_std,repetitions,status,error\n";
  for (const auto& r : rows) {
    std::vector<std::string> f{csv_field(r.label), variant_name(r.variant), r.dws ? "1" : "0",
                               r.dilation ? std::to_string(*r.dilation) : "", r.kernel ? std::to_string(*r.kernel) : ""};
    if (r.failed) {
      f.insert(f.end(), {"", "", "", "", "", "", "", "0", "FAILED", csv_field(r.error)});
    } else {
      f.insert(f.end(), {num(r.f1.mean), num(r.f1.std), num(r.er.mean), num(r.er.std), std::to_string(r.parameters),
                         num(r.epoch_seconds.mean), num(r.epoch_seconds.std), std::to_string(r.repetitions), "ok",
                         ""});
    }
    for (std::size_t i = 0; i < f.size(); ++i) out += (i ? "," : "") + f[i];
    out += "\n";
  }
  return out;
}

}  // namespace sedconv
