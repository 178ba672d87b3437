// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sedconv {

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::kBase: return "base";
    case Variant::kDws: return "dws";
    case Variant::kDil: return "dil";
    case Variant::kDnd: return "dnd";
  }
  return "?";
}

Variant parse_variant(const std::string& name) {
  if (name == "base") return Variant::kBase;
  if (name == "dws") return Variant::kDws;
  if (name == "dil") return Variant::kDil;
  if (name == "dnd") return Variant::kDnd;
  throw ConfigError("unknown variant '" + name + "', expected one of base, dws, dil, dnd");
}

bool uses_dws(Variant v) { return v == Variant::kDws || v == Variant::kDnd; }
bool uses_dilated(Variant v) { return v == Variant::kDil || v == Variant::kDnd; }

std::vector<nn::Extent2> default_pooling_plan(Variant v) {
  // The recurrent variants pool the 40 features down to one; the dilated
  // module needs a few feature bins left for its kernel.
  if (uses_dilated(v)) return {{1, 2}, {1, 2}, {1, 1}};
  return {{1, 5}, {1, 4}, {1, 2}};
}

std::vector<nn::Extent2> ModelConfig::effective_pooling_plan() const {
  return pooling_plan.empty() ? default_pooling_plan(variant) : pooling_plan;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

void ModelConfig::validate() const {
  if (channels == 0) throw ConfigError("channels must be positive");
  if (classes == 0) throw ConfigError("classes must be positive");
  if (input_frames == 0 || input_features == 0) throw ConfigError("input_frames and input_features must be positive");
  if (cnn_kernel.h == 0 || cnn_kernel.w == 0) throw ConfigError("cnn_kernel must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  const auto plan = effective_pooling_plan();
  if (plan.size() != 3) throw ConfigError("pooling_plan needs one entry per CNN block (3)");
  for (const auto& p : plan) {
    if (p.h == 0 || p.w == 0) throw ConfigError("pooling_plan entries must be positive");
  }
  if (!uses_dilated(variant)) return;
  const auto& ks = grid_kernels();
  if (std::find(ks.begin(), ks.end(), dil_kernel) == ks.end()) {
    throw ConfigError("dilated kernel " + std::to_string(dil_kernel) + " is not in the supported set {" +
                      join_sizes(ks) + "}");
  }
  const auto& ds = grid_dilations();
  if (std::find(ds.begin(), ds.end(), dilation_time) == ds.end()) {
    throw ConfigError("time dilation " + std::to_string(dilation_time) + " is not in the supported set {" +
                      join_sizes(ds) + "}");
  }
  if (dilation_feature != 1) throw ConfigError("feature-axis dilation is fixed to 1");
  if (dil_channels == 0) throw ConfigError("dil_channels must be positive");
}

std::string ModelConfig::label() const {
  auto name = variant_name(variant);
  if (!uses_dilated(variant)) return name;
  return name + "^{" + std::to_string(dil_kernel) + "|" + std::to_string(dilation_time) + "}";
}

namespace {

std::string extent_text(nn::Extent2 e) { return std::to_string(e.h) + "," + std::to_string(e.w); }

nn::Extent2 parse_extent(const KeyValueConfig& kv, const std::string& key, nn::Extent2 fallback) {
  auto v = kv.get_int_list(key, {});
  if (v.empty()) return fallback;
  if (v.size() == 1) v.push_back(v[0]);
  if (v.size() != 2 || v[0] < 0 || v[1] < 0) throw ConfigError("config key '" + key + "': expected 'h,w'");
  return {static_cast<std::size_t>(v[0]), static_cast<std::size_t>(v[1])};
}

std::size_t get_size(const KeyValueConfig& kv, const std::string& key, std::size_t fallback) {
  auto v = kv.get_int(key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

std::string real_text(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

KeyValueConfig ModelConfig::to_kv() const {
  KeyValueConfig kv;
  kv.set("variant", variant_name(variant));
  kv.set("channels", std::to_string(channels));
  kv.set("cnn_kernel", extent_text(cnn_kernel));
  kv.set("cnn_padding", extent_text(cnn_padding));
  std::string plan;
  for (const auto& p : effective_pooling_plan()) plan += (plan.empty() ? "" : ", ") + std::to_string(p.h) + "x" + std::to_string(p.w);
  kv.set("pooling_plan", plan);
  kv.set("dil_kernel", std::to_string(dil_kernel));
  kv.set("dilation_time", std::to_string(dilation_time));
  kv.set("dilation_feature", std::to_string(dilation_feature));
  kv.set("dil_channels", std::to_string(dil_channels));
  kv.set("dropout", real_text(dropout));
  kv.set("dropout_in_dws_blocks", dropout_in_dws_blocks ? "true" : "false");
  kv.set("spatial_bias", spatial_bias ? "true" : "false");
  kv.set("classes", std::to_string(classes));
  kv.set("input_frames", std::to_string(input_frames));
  kv.set("input_features", std::to_string(input_features));
  return kv;
}

ModelConfig ModelConfig::from_kv(const KeyValueConfig& kv) {
  ModelConfig c;
  c.variant = parse_variant(kv.get_string("variant", variant_name(c.variant)));
  c.channels = get_size(kv, "channels", c.channels);
  c.cnn_kernel = parse_extent(kv, "cnn_kernel", c.cnn_kernel);
  c.cnn_padding = parse_extent(kv, "cnn_padding", c.cnn_padding);
  for (const auto& item : kv.get_string_list("pooling_plan", {})) {
    const auto x = item.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument(item);
      c.pooling_plan.push_back({std::stoul(item.substr(0, x)), std::stoul(item.substr(x + 1))});
    } catch (const std::exception&) {
      throw ConfigError("pooling_plan entry '" + item + "': expected 'HxW'");
    }
  }
  c.dil_kernel = get_size(kv, "dil_kernel", c.dil_kernel);
  c.dilation_time = get_size(kv, "dilation_time", c.dilation_time);
  c.dilation_feature = get_size(kv, "dilation_feature", c.dilation_feature);
  c.dil_channels = get_size(kv, "dil_channels", c.dil_channels);
  c.dropout = static_cast<Real>(kv.get_real("dropout", c.dropout));
  c.dropout_in_dws_blocks = kv.get_bool("dropout_in_dws_blocks", c.dropout_in_dws_blocks);
  c.spatial_bias = kv.get_bool("spatial_bias", c.spatial_bias);
  c.classes = get_size(kv, "classes", c.classes);
  c.input_frames = get_size(kv, "input_frames", c.input_frames);
  c.input_features = get_size(kv, "input_features", c.input_features);
  return c;
}

std::size_t compute_time_padding(std::size_t kernel_height, std::size_t dilation) {
  if (kernel_height < 3 || kernel_height % 2 == 0) {
    throw ConfigError("time padding needs an odd kernel height >= 3, got " + std::to_string(kernel_height));
  }
  if (dilation == 0) throw ConfigError("dilation must be positive");
  return (kernel_height / 2) * dilation;
}

// ---------------------------------------------------------------------------

namespace {

// Uniform in [-bound, bound) from the top 53 bits of the engine output, so
// initial weights do not depend on the standard library's distributions.
Tensor uniform(Shape shape, double bound, nn::Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.data()) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    v = static_cast<Real>((2 * u - 1) * bound);
  }
  return t;
}

double fan_in_bound(std::size_t fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); }

void expect_rank(const Shape& s, std::size_t rank, const std::string& layer) {
  if (s.size() != rank) {
    throw SizeError(layer + ": expected a rank-" + std::to_string(rank) + " sample, got " + shape_string(s));
  }
}

}  // namespace

ad::Var ForwardContext::var(const Parameter& p) {
  auto it = vars_.find(&p);
  if (it != vars_.end()) return it->second;
  auto v = tape_.leaf(p.name, p.value, true);
  vars_.emplace(&p, v);
  return v;
}

std::uint64_t Layer::parameter_count(bool include_bias) const {
  std::uint64_t n = 0;
  for (const auto& p : params_) {
    if (include_bias || p.kind == ParamKind::kWeight) n += p.value.size();
  }
  return n;
}

void Layer::add_parameter(std::string suffix, Tensor value, ParamKind kind) {
  params_.push_back({name_ + "." + suffix, std::move(value), kind});
}

Conv2dLayer::Conv2dLayer(std::string name, std::size_t in_channels, std::size_t out_channels, nn::Extent2 kernel,
                         nn::Extent2 stride, nn::Extent2 padding, nn::Rng& rng)
    : Layer(std::move(name)), in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
  const double b = fan_in_bound(in_ * kernel.h * kernel.w);
  add_parameter("weight", uniform({out_, in_, kernel.h, kernel.w}, b, rng), ParamKind::kWeight);
  add_parameter("bias", uniform({out_}, b, rng), ParamKind::kBias);
}

ad::Var Conv2dLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  return ad::conv2d(x, ctx.var(parameters()[0]), ctx.var(parameters()[1]), stride_, padding_);
}

Shape Conv2dLayer::output_shape(const Shape& in) const {
  expect_rank(in, 3, name());
  if (in[0] != in_) throw SizeError(name() + ": expected " + std::to_string(in_) + " input channels");
  return {out_, nn::conv_output_length(in[1], kernel_.h, stride_.h, padding_.h, 1),
          nn::conv_output_length(in[2], kernel_.w, stride_.w, padding_.w, 1)};
}

std::uint64_t Conv2dLayer::macs(const Shape& in) const {
  const auto o = output_shape(in);
  return std::uint64_t{out_} * in_ * kernel_.h * kernel_.w * o[1] * o[2];
}

DwsConvLayer::DwsConvLayer(std::string name, std::size_t in_channels, std::size_t out_channels, nn::Extent2 kernel,
                           nn::Extent2 stride, nn::Extent2 padding, bool spatial_bias, nn::Rng& rng)
    : Layer(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      spatial_bias_(spatial_bias) {
  const double bs = fan_in_bound(kernel.h * kernel.w);
  add_parameter("spatial", uniform({in_, kernel.h, kernel.w}, bs, rng), ParamKind::kWeight);
  if (spatial_bias_) add_parameter("spatial_bias", uniform({in_}, bs, rng), ParamKind::kBias);
  const double bp = fan_in_bound(in_);
  add_parameter("pointwise", uniform({out_, in_}, bp, rng), ParamKind::kWeight);
  add_parameter("pointwise_bias", uniform({out_}, bp, rng), ParamKind::kBias);
}

ad::Var DwsConvLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  const auto& p = parameters();
  std::size_t i = 0;
  auto spatial = ctx.var(p[i++]);
  ad::Var sbias;
  if (spatial_bias_) sbias = ctx.var(p[i++]);
  auto pw = ctx.var(p[i++]);
  auto pbias = ctx.var(p[i++]);
  return ad::pointwise_conv(ad::depthwise_conv(x, spatial, sbias, stride_, padding_), pw, pbias);
}

Shape DwsConvLayer::output_shape(const Shape& in) const {
  expect_rank(in, 3, name());
  if (in[0] != in_) throw SizeError(name() + ": expected " + std::to_string(in_) + " input channels");
  return {out_, nn::conv_output_length(in[1], kernel_.h, stride_.h, padding_.h, 1),
          nn::conv_output_length(in[2], kernel_.w, stride_.w, padding_.w, 1)};
}

std::uint64_t DwsConvLayer::macs(const Shape& in) const {
  const auto o = output_shape(in);
  const std::uint64_t area = o[1] * o[2];
  return std::uint64_t{kernel_.h} * kernel_.w * in_ * area + std::uint64_t{in_} * out_ * area;
}

DilatedConvLayer::DilatedConvLayer(std::string name, std::size_t in_channels, std::size_t out_channels,
                                   nn::Extent2 kernel, nn::Extent2 dilation, nn::Extent2 padding, nn::Rng& rng)
    : Layer(std::move(name)),
      in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      dilation_(dilation),
      padding_(padding) {
  const double b = fan_in_bound(in_ * kernel.h * kernel.w);
  add_parameter("weight", uniform({out_, in_, kernel.h, kernel.w}, b, rng), ParamKind::kWeight);
  add_parameter("bias", uniform({out_}, b, rng), ParamKind::kBias);
}

ad::Var DilatedConvLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  return ad::dilated_conv2d(x, ctx.var(parameters()[0]), ctx.var(parameters()[1]), dilation_, padding_);
}

Shape DilatedConvLayer::output_shape(const Shape& in) const {
  expect_rank(in, 3, name());
  if (in[0] != in_) throw SizeError(name() + ": expected " + std::to_string(in_) + " input channels");
  return {out_, nn::conv_output_length(in[1], kernel_.h, 1, padding_.h, dilation_.h),
          nn::conv_output_length(in[2], kernel_.w, 1, padding_.w, dilation_.w)};
}

std::uint64_t DilatedConvLayer::macs(const Shape& in) const {
  const auto o = output_shape(in);
  return std::uint64_t{out_} * in_ * kernel_.h * kernel_.w * o[1] * o[2];
}

ad::Var ActivationLayer::forward(const ad::Var& x, ForwardContext&) { return ad::activation(kind_, x); }

BatchNormLayer::BatchNormLayer(std::string name, std::size_t channels)
    : Layer(std::move(name)), state_(nn::BatchNormParams::make(channels)) {
  add_parameter("gamma", Tensor::full({channels}, 1), ParamKind::kNormAffine);
  add_parameter("beta", Tensor::zeros({channels}), ParamKind::kNormAffine);
}

ad::Var BatchNormLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  return ad::batchnorm2d(x, ctx.var(parameters()[0]), ctx.var(parameters()[1]), state_, ctx.mode());
}

std::vector<std::pair<std::string, Tensor*>> BatchNormLayer::buffers() {
  return {{name() + ".running_mean", &state_.running_mean}, {name() + ".running_var", &state_.running_var}};
}

ad::Var MaxPoolLayer::forward(const ad::Var& x, ForwardContext&) { return ad::maxpool2d(x, pool_); }

Shape MaxPoolLayer::output_shape(const Shape& in) const {
  expect_rank(in, 3, name());
  if (pool_.h > in[1] || pool_.w > in[2]) {
    throw SizeError(name() + ": pool " + std::to_string(pool_.h) + "x" + std::to_string(pool_.w) +
                    " larger than input " + shape_string(in));
  }
  return {in[0], in[1] / pool_.h, in[2] / pool_.w};
}

ad::Var DropoutLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  if (p_ == 0) return x;
  return ad::dropout(x, p_, ctx.mode(), ctx.rng());
}

ad::Var AddChannelLayer::forward(const ad::Var& x, ForwardContext&) {
  const auto& s = x.shape();
  if (s.size() != 3) throw SizeError(name() + ": expected [B, T, N], got " + shape_string(s));
  return ad::reshape(x, {s[0], 1, s[1], s[2]});
}

Shape AddChannelLayer::output_shape(const Shape& in) const {
  expect_rank(in, 2, name());
  return {1, in[0], in[1]};
}

ad::Var FramesLayer::forward(const ad::Var& x, ForwardContext&) { return ad::channels_to_frames(x); }

Shape FramesLayer::output_shape(const Shape& in) const {
  expect_rank(in, 3, name());
  return {in[1], in[0] * in[2]};
}

GruLayer::GruLayer(std::string name, std::size_t input_size, std::size_t hidden_size, nn::Rng& rng)
    : Layer(std::move(name)), in_(input_size), hidden_(hidden_size) {
  const double b = fan_in_bound(hidden_);
  add_parameter("input_weights", uniform({3, hidden_, in_}, b, rng), ParamKind::kWeight);
  add_parameter("recurrent_weights", uniform({3, hidden_, hidden_}, b, rng), ParamKind::kWeight);
  add_parameter("bias", uniform({3, hidden_}, b, rng), ParamKind::kBias);
}

ad::Var GruLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  const auto& p = parameters();
  return ad::gru(x, ctx.var(p[0]), ctx.var(p[1]), ctx.var(p[2]));
}

Shape GruLayer::output_shape(const Shape& in) const {
  expect_rank(in, 2, name());
  if (in[1] != in_) throw SizeError(name() + ": expected " + std::to_string(in_) + " input features");
  return {in[0], hidden_};
}

std::uint64_t GruLayer::macs(const Shape& in) const {
  return std::uint64_t{in[0]} * 3 * (std::uint64_t{hidden_} * in_ + std::uint64_t{hidden_} * hidden_);
}

ClassifierLayer::ClassifierLayer(std::string name, std::size_t features, std::size_t classes, nn::Rng& rng)
    : Layer(std::move(name)), features_(features), classes_(classes) {
  const double b = fan_in_bound(features_);
  add_parameter("weight", uniform({classes_, features_}, b, rng), ParamKind::kWeight);
  add_parameter("bias", uniform({classes_}, b, rng), ParamKind::kBias);
}

ad::Var ClassifierLayer::forward(const ad::Var& x, ForwardContext& ctx) {
  return ad::sigmoid(ad::affine_frames(x, ctx.var(parameters()[0]), ctx.var(parameters()[1])));
}

Shape ClassifierLayer::output_shape(const Shape& in) const {
  expect_rank(in, 2, name());
  if (in[1] != features_) throw SizeError(name() + ": expected " + std::to_string(features_) + " input features");
  return {in[0], classes_};
}

std::uint64_t ClassifierLayer::macs(const Shape& in) const {
  return std::uint64_t{in[0]} * features_ * classes_;
}

// ---------------------------------------------------------------------------

template <typename L, typename... Args>
L& Model::add(Args&&... args) {
  auto layer = std::make_unique<L>(std::forward<Args>(args)...);
  L& ref = *layer;
  layers_.push_back(std::move(layer));
  return ref;
}

Model Model::build(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m(config);
  nn::Rng rng(seed);
  const auto plan = config.effective_pooling_plan();
  const bool dws = uses_dws(config.variant);

  // Track per-sample shapes while stacking so that impossible geometries
  // surface here rather than at the first forward pass.
  Shape shape{config.input_frames, config.input_features};
  auto push_shape = [&](const Layer& l) {
    try {
      shape = l.output_shape(shape);
    } catch (const SizeError& e) {
      throw ConfigError(config.label() + ": " + e.what());
    }
  };

  push_shape(m.add<AddChannelLayer>("input"));
  for (std::size_t b = 0; b < 3; ++b) {
    const std::string prefix = "block" + std::to_string(b + 1);
    const std::size_t in_ch = b == 0 ? 1 : config.channels;
    if (dws) {
      push_shape(m.add<DwsConvLayer>(prefix + ".dws", in_ch, config.channels, config.cnn_kernel, nn::Extent2{1, 1},
                                     config.cnn_padding, config.spatial_bias, rng));
    } else {
      push_shape(m.add<Conv2dLayer>(prefix + ".conv", in_ch, config.channels, config.cnn_kernel, nn::Extent2{1, 1},
                                    config.cnn_padding, rng));
    }
    m.add<ActivationLayer>(prefix + ".relu", nn::Activation::kRelu);
    m.add<BatchNormLayer>(prefix + ".bn", config.channels);
    push_shape(m.add<MaxPoolLayer>(prefix + ".pool", plan[b]));
    if (!dws || config.dropout_in_dws_blocks) m.add<DropoutLayer>(prefix + ".dropout", config.dropout);
  }

  if (uses_dilated(config.variant)) {
    const std::size_t k = config.dil_kernel;
    if (shape[2] < k) {
      throw ConfigError(config.label() + ": feature width after pooling is " + std::to_string(shape[2]) +
                        ", smaller than the dilated kernel width " + std::to_string(k) +
                        "; use a pooling plan that keeps at least " + std::to_string(k) + " feature bins");
    }
    const nn::Extent2 padding{compute_time_padding(k, config.dilation_time), 0};
    push_shape(m.add<DilatedConvLayer>("temporal.dilconv", config.channels, config.dil_channels, nn::Extent2{k, k},
                                       nn::Extent2{config.dilation_time, config.dilation_feature}, padding, rng));
    m.add<ActivationLayer>("temporal.relu", nn::Activation::kRelu);
    m.add<BatchNormLayer>("temporal.bn", config.dil_channels);
    push_shape(m.add<FramesLayer>("temporal.frames"));
  } else {
    push_shape(m.add<FramesLayer>("cnn.frames"));
    push_shape(m.add<GruLayer>("temporal.gru", shape[1], shape[1], rng));
  }
  push_shape(m.add<ClassifierLayer>("classifier", shape[1], config.classes, rng));
  return m;
}

Layer& Model::layer(const std::string& name) {
  for (auto& l : layers_) {
    if (l->name() == name) return *l;
  }
  throw std::out_of_range("model has no layer named '" + name + "'");
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out;
  for (auto& l : layers_) {
    for (auto& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& l : layers_) {
    for (const auto& p : l->parameters()) out.push_back(&p);
  }
  return out;
}

ad::Var Model::forward(ForwardContext& ctx, const ad::Var& features) {
  ad::Var x = features;
  for (auto& l : layers_) x = l->forward(x, ctx);
  return x;
}

ad::Var Model::forward(ad::Tape& tape, const Tensor& features, nn::Mode mode, nn::Rng& rng) {
  ForwardContext ctx(tape, mode, rng);
  return forward(ctx, tape.constant(features));
}

Tensor Model::predict(const Tensor& features, std::size_t batch) {
  const bool single = features.rank() == 2;
  const Tensor input = single ? reshape(features, {1, features.dim(0), features.dim(1)}) : features;
  if (input.rank() != 3) throw SizeError("predict expects [T, N] or [B, T, N], got " + shape_string(features.shape()));
  batch = std::max<std::size_t>(batch, 1);
  const std::size_t n = input.dim(0);
  const std::size_t per_in = input.size() / n;
  nn::Rng unused(0);
  std::vector<Real> out;
  Shape out_shape;
  for (std::size_t start = 0; start < n; start += batch) {
    const std::size_t count = std::min(batch, n - start);
    Tensor chunk({count, input.dim(1), input.dim(2)},
                 std::vector<Real>(input.raw() + start * per_in, input.raw() + (start + count) * per_in));
    ad::Tape tape(false);
    auto y = forward(tape, chunk, nn::Mode::kEval, unused);
    out.insert(out.end(), y.value().raw(), y.value().raw() + y.value().size());
    out_shape = y.shape();
  }
  if (single) return Tensor({out_shape[1], out_shape[2]}, std::move(out));
  out_shape[0] = n;
  return Tensor(out_shape, std::move(out));
}

ModelState Model::state() {
  ModelState s;
  for (auto* p : parameters()) s.tensors.emplace_back(p->name, p->value);
  for (auto& l : layers_) {
    for (auto& [name, t] : l->buffers()) s.tensors.emplace_back(name, *t);
  }
  return s;
}

void Model::load_state(const ModelState& state) {
  std::vector<std::pair<std::string, Tensor*>> slots;
  for (auto* p : parameters()) slots.emplace_back(p->name, &p->value);
  for (auto& l : layers_) {
    for (auto& b : l->buffers()) slots.push_back(b);
  }
  if (slots.size() != state.tensors.size()) {
    throw SizeError("state holds " + std::to_string(state.tensors.size()) + " tensors, model expects " +
                    std::to_string(slots.size()));
  }
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, value] = state.tensors[i];
    if (name != slots[i].first || value.shape() != slots[i].second->shape()) {
      throw SizeError("state entry " + std::to_string(i) + " ('" + name + "' " + shape_string(value.shape()) +
                      ") does not match model tensor '" + slots[i].first + "' " +
                      shape_string(slots[i].second->shape()));
    }
  }
  for (std::size_t i = 0; i < slots.size(); ++i) *slots[i].second = state.tensors[i].second;
}

}  // namespace sedconv
