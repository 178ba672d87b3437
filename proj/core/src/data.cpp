// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numbers>
#include <random>

namespace sedconv {

std::string partition_name(Partition p) {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kValidation: return "validation";
    case Partition::kTest: return "test";
  }
  return "?";
}

namespace {

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::size_t get_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

// Engine-agnostic draws so that generated data does not depend on the
// standard library's distribution implementations.
class Draw {
 public:
  explicit Draw(std::uint64_t seed) : rng_(seed) {}
  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  std::size_t integer(std::size_t lo, std::size_t hi) {  // inclusive
    return lo + static_cast<std::size_t>(uniform() * static_cast<double>(hi - lo + 1));
  }
  double exponential(double mean) { return -mean * std::log1p(-uniform()); }
  double normal() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    double u1 = 0;
    while (u1 <= 0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2 * std::log(u1));
    cached_ = r * std::sin(2 * std::numbers::pi * u2);
    spare_ = true;
    return r * std::cos(2 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 rng_;
  bool spare_ = false;
  double cached_ = 0;
};

struct Event {
  std::size_t cls, onset, end;
  double gain;
};

}  // namespace

KeyValueConfig SynthConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("mixtures", std::to_string(mixtures));
  kv.set("mixture_frames", std::to_string(mixture_frames));
  kv.set("frames", std::to_string(frames));
  kv.set("overlap", real_text(overlap));
  kv.set("features", std::to_string(features));
  kv.set("classes", std::to_string(classes));
  kv.set("max_polyphony", std::to_string(max_polyphony));
  kv.set("mean_gap", real_text(mean_gap));
  kv.set("min_duration", std::to_string(min_duration));
  kv.set("max_duration", std::to_string(max_duration));
  kv.set("noise", real_text(noise));
  kv.set("seed", std::to_string(seed));
  return kv;
}

SynthConfig SynthConfig::from_kv(const KeyValueConfig& kv) {
  SynthConfig c;
  c.mixtures = get_size(kv, "mixtures", c.mixtures);
  c.mixture_frames = get_size(kv, "mixture_frames", c.mixture_frames);
  c.frames = get_size(kv, "frames", c.frames);
  c.overlap = kv.get_real("overlap", c.overlap);
  c.features = get_size(kv, "features", c.features);
  c.classes = get_size(kv, "classes", c.classes);
  c.max_polyphony = get_size(kv, "max_polyphony", c.max_polyphony);
  c.mean_gap = kv.get_real("mean_gap", c.mean_gap);
  c.min_duration = get_size(kv, "min_duration", c.min_duration);
  c.max_duration = get_size(kv, "max_duration", c.max_duration);
  c.noise = kv.get_real("noise", c.noise);
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
  return c;
}

Tensor class_prototypes(std::size_t classes, std::size_t features) {
  Tensor p({classes, features});
  const double spacing = static_cast<double>(features) / static_cast<double>(classes);
  const double sigma = 0.6 * spacing;
  for (std::size_t c = 0; c < classes; ++c) {
    const double centre = (static_cast<double>(c) + 0.5) * spacing;
    for (std::size_t n = 0; n < features; ++n) {
      const double d = (static_cast<double>(n) - centre) / sigma;
      p.at({c, n}) = static_cast<Real>(std::exp(-0.5 * d * d));
    }
  }
  return p;
}

namespace {

void check_synth(const SynthConfig& c) {
  if (c.mixtures < 5) {
    throw ConfigError("need at least 5 mixtures for a train/validation/test split, got " +
                      std::to_string(c.mixtures));
  }
  if (c.classes == 0 || c.features == 0 || c.frames == 0) throw ConfigError("classes, features and frames must be positive");
  if (c.max_polyphony == 0 || c.max_polyphony > c.classes) {
    throw ConfigError("max_polyphony must lie in [1, classes]; got " + std::to_string(c.max_polyphony));
  }
  if (c.min_duration == 0 || c.min_duration > c.max_duration) {
    throw ConfigError("event durations need 1 <= min_duration <= max_duration");
  }
  if (c.min_duration > c.mixture_frames) {
    throw ConfigError("events of at least " + std::to_string(c.min_duration) + " frames cannot fit in mixtures of " +
                      std::to_string(c.mixture_frames) + " frames");
  }
  if (!(c.mean_gap > 0)) throw ConfigError("mean_gap must be positive");
  if (!(c.noise >= 0)) throw ConfigError("noise must be non-negative");
  if (c.mixture_frames < c.frames) {
    throw ConfigError("mixture_frames (" + std::to_string(c.mixture_frames) + ") shorter than sequence length (" +
                      std::to_string(c.frames) + ")");
  }
}

std::pair<Tensor, Tensor> synthesize_mixture(const SynthConfig& c, const Tensor& prototypes, Draw& draw) {
  const std::size_t L = c.mixture_frames;
  std::vector<Event> events;
  for (std::size_t cls = 0; cls < c.classes; ++cls) {
    double t = draw.exponential(c.mean_gap);
    while (t < static_cast<double>(L)) {
      const auto onset = static_cast<std::size_t>(t);
      const auto dur = draw.integer(c.min_duration, c.max_duration);
      const double gain = 0.7 + 0.3 * draw.uniform();
      events.push_back({cls, onset, std::min(L, onset + dur), gain});
      t = static_cast<double>(onset + dur) + draw.exponential(c.mean_gap);
    }
  }
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.onset != b.onset ? a.onset < b.onset : a.cls < b.cls; });

  // Events that would push any frame above the polyphony limit are dropped.
  std::vector<std::size_t> active(L, 0);
  Tensor targets({L, c.classes});
  std::vector<double> level(L * c.classes, 0.0);
  for (const auto& e : events) {
    const auto peak = *std::max_element(active.begin() + static_cast<std::ptrdiff_t>(e.onset),
                                        active.begin() + static_cast<std::ptrdiff_t>(e.end));
    if (peak >= c.max_polyphony) continue;
    for (std::size_t t = e.onset; t < e.end; ++t) {
      ++active[t];
      targets.at({t, e.cls}) = 1;
      level[t * c.classes + e.cls] = e.gain;
    }
  }

  Tensor features({L, c.features});
  for (std::size_t t = 0; t < L; ++t) {
    for (std::size_t n = 0; n < c.features; ++n) {
      double v = 0;
      for (std::size_t cls = 0; cls < c.classes; ++cls) {
        const double g = level[t * c.classes + cls];
        if (g != 0) v += g * prototypes.at({cls, n});
      }
      v += c.noise * draw.normal();
      // Stored at float precision so the SEDFEAT1 round trip is exact.
      features.at({t, n}) = static_cast<Real>(static_cast<float>(v));
    }
  }
  return {std::move(features), std::move(targets)};
}

}  // namespace

Dataset synthesize_dataset(const SynthConfig& config) {
  check_synth(config);
  const auto prototypes = class_prototypes(config.classes, config.features);
  const std::size_t n_hold = std::max<std::size_t>(1, config.mixtures / 5);
  const std::size_t n_train = config.mixtures - 2 * n_hold;

  Dataset ds;
  Draw draw(config.seed);
  const ChunkOptions chunk{config.frames, config.overlap, false};
  for (std::size_t m = 0; m < config.mixtures; ++m) {
    auto [features, targets] = synthesize_mixture(config, prototypes, draw);
    auto chunks = chunk_sequences(features, targets, chunk, static_cast<std::uint32_t>(m));
    auto& split = m < n_train ? ds.train : (m < n_train + n_hold ? ds.validation : ds.test);
    for (auto& s : chunks) split.samples.push_back(std::move(s));
  }
  return ds;
}

std::vector<SequenceSample> chunk_sequences(const Tensor& features, const Tensor& targets, const ChunkOptions& options,
                                            std::uint32_t mixture, std::vector<std::string>* warnings) {
  if (!(options.overlap >= 0 && options.overlap < 1)) {
    throw ConfigError("overlap must lie in [0, 1), got " + real_text(options.overlap));
  }
  if (features.rank() != 2 || targets.rank() != 2 || features.dim(0) != targets.dim(0)) {
    throw SizeError("chunk_sequences expects features [L, N] and targets [L, C] of equal length");
  }
  const std::size_t T = options.frames;
  if (T == 0) throw ConfigError("chunk length must be positive");
  const std::size_t L = features.dim(0);
  std::vector<SequenceSample> out;
  if (L < T) {
    const auto msg = "source of " + std::to_string(L) + " frames is shorter than the sequence length " +
                     std::to_string(T) + "; no chunks emitted";
    if (options.error_on_short) throw SizeError(msg);
    if (warnings) {
      warnings->push_back(msg);
    } else {
      std::cerr << "warning: " << msg << "\n";
    }
    return out;
  }
  const auto hop = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(T) * (1.0 - options.overlap))));
  const std::size_t N = features.dim(1);
  const std::size_t C = targets.dim(1);
  for (std::size_t start = 0; start + T <= L; start += hop) {
    std::vector<Real> f(features.raw() + start * N, features.raw() + (start + T) * N);
    std::vector<Real> y(targets.raw() + start * C, targets.raw() + (start + T) * C);
    out.push_back({Tensor({T, N}, std::move(f)), Tensor({T, C}, std::move(y)), mixture});
  }
  return out;
}

namespace {
constexpr std::string_view kFeatMagic = "SEDFEAT1";
}

std::vector<char> encode_features(const std::vector<SequenceSample>& samples) {
  std::size_t T = 0, N = 0, C = 0;
  if (!samples.empty()) {
    T = samples[0].features.dim(0);
    N = samples[0].features.dim(1);
    C = samples[0].targets.dim(1);
  }
  ByteWriter w;
  w.bytes(kFeatMagic);
  w.u32(static_cast<std::uint32_t>(samples.size()));
  w.u32(static_cast<std::uint32_t>(T));
  w.u32(static_cast<std::uint32_t>(N));
  w.u32(static_cast<std::uint32_t>(C));
  for (const auto& s : samples) {
    if (s.features.shape() != Shape{T, N} || s.targets.shape() != Shape{T, C}) {
      throw SizeError("all samples in a feature file must share [T, N] and [T, C]");
    }
    for (auto v : s.features.data()) w.f32(static_cast<float>(v));
    for (auto v : s.targets.data()) {
      if (v != 0 && v != 1) throw SizeError("targets must be 0 or 1");
      w.u8(v != 0 ? 1 : 0);
    }
  }
  return w.buffer();
}

std::vector<SequenceSample> decode_features(const std::vector<char>& bytes) {
  ByteReader r(bytes);
  if (r.bytes(kFeatMagic.size(), "magic") != kFeatMagic) throw ParseError("bad magic, expected SEDFEAT1", 0);
  const auto count = r.u32("sample count");
  const auto T = r.u32("T");
  const auto N = r.u32("N");
  const auto C = r.u32("C");
  if (count > 0 && (T == 0 || N == 0 || C == 0)) throw ParseError("zero dimension in header", 12);
  const std::uint64_t per_sample = std::uint64_t{T} * N * 4 + std::uint64_t{T} * C;
  const std::uint64_t expected = per_sample * count;
  if (r.remaining() != expected) {
    const auto actual = r.remaining();
    const auto at = r.offset() + std::min<std::uint64_t>(actual, expected);
    throw ParseError("payload length mismatch: expected " + std::to_string(expected) + " bytes for " +
                         std::to_string(count) + " samples, got " + std::to_string(actual),
                     at);
  }
  std::vector<SequenceSample> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::vector<Real> f(std::size_t{T} * N);
    for (auto& v : f) v = static_cast<Real>(r.f32("feature"));
    std::vector<Real> y(std::size_t{T} * C);
    for (auto& v : y) {
      const auto at = r.offset();
      const auto b = r.u8("target");
      if (b > 1) throw ParseError("non-binary target byte " + std::to_string(b), at);
      v = b;
    }
    out.push_back({Tensor({T, N}, std::move(f)), Tensor({T, C}, std::move(y)), 0});
  }
  return out;
}

void save_features(const std::string& path, const std::vector<SequenceSample>& samples) {
  write_file(path, encode_features(samples));
}

std::vector<SequenceSample> load_features(const std::string& path) { return decode_features(read_file(path)); }

namespace {

Tensor stack(const std::vector<SequenceSample>& samples, const std::vector<std::size_t>& index, bool targets) {
  if (index.empty()) throw SizeError("cannot stack an empty batch");
  const auto& first = targets ? samples.at(index[0]).targets : samples.at(index[0]).features;
  std::vector<Real> data;
  data.reserve(first.size() * index.size());
  for (auto i : index) {
    const auto& t = targets ? samples.at(i).targets : samples.at(i).features;
    if (t.shape() != first.shape()) throw SizeError("samples in a batch must share their shape");
    data.insert(data.end(), t.raw(), t.raw() + t.size());
  }
  return Tensor({index.size(), first.dim(0), first.dim(1)}, std::move(data));
}

}  // namespace

Tensor stack_features(const std::vector<SequenceSample>& samples, const std::vector<std::size_t>& index) {
  return stack(samples, index, false);
}

Tensor stack_targets(const std::vector<SequenceSample>& samples, const std::vector<std::size_t>& index) {
  return stack(samples, index, true);
}

}  // namespace sedconv
