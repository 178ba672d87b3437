// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// The four detector variants: a dense or depthwise-separable CNN front end
// followed by either a GRU or a dilated convolution over time, and a
// frame-wise sigmoid classifier.

#ifndef SEDCONV_MODEL_HPP_
#define SEDCONV_MODEL_HPP_

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "sedconv/autodiff.hpp"
#include "sedconv/kv_config.hpp"
#include "sedconv/ops.hpp"
#include "sedconv/tensor.hpp"

namespace sedconv {

enum class Variant { kBase, kDws, kDil, kDnd };

std::string variant_name(Variant v);
/// Accepts "base", "dws", "dil", "dnd"; throws ConfigError otherwise.
Variant parse_variant(const std::string& name);
bool uses_dws(Variant v);
bool uses_dilated(Variant v);

struct ModelConfig {
  Variant variant = Variant::kBase;
  std::size_t channels = 256;
  nn::Extent2 cnn_kernel{5, 5};
  nn::Extent2 cnn_padding{2, 2};
  /// Empty selects the variant default (see default_pooling_plan).
  std::vector<nn::Extent2> pooling_plan;
  std::size_t dil_kernel = 3;     // square K'
  std::size_t dilation_time = 1;  // xi_h
  std::size_t dilation_feature = 1;
  /// Output channels of the dilated convolution.
  std::size_t dil_channels = 32;
  Real dropout = Real(0.25);
  bool dropout_in_dws_blocks = true;
  bool spatial_bias = true;
  std::size_t classes = 16;
  std::size_t input_frames = 1024;
  std::size_t input_features = 40;

  std::vector<nn::Extent2> effective_pooling_plan() const;
  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  /// e.g. "base", "dnd^{7|10}".
  std::string label() const;

  KeyValueConfig to_kv() const;
  /// Starts from the defaults and overrides whatever keys are present.
  static ModelConfig from_kv(const KeyValueConfig& kv);
};

std::vector<nn::Extent2> default_pooling_plan(Variant v);
inline const std::vector<std::size_t>& grid_kernels() {
  static const std::vector<std::size_t> k{3, 5, 7};
  return k;
}
inline const std::vector<std::size_t>& grid_dilations() {
  static const std::vector<std::size_t> d{1, 10, 50, 100};
  return d;
}

/// Time-axis padding that keeps the sequence length for an odd kernel
/// height under dilation: floor(K'_h / 2) * xi_h.
std::size_t compute_time_padding(std::size_t kernel_height, std::size_t dilation);

// ---------------------------------------------------------------------------
// Layers

enum class ParamKind { kWeight, kBias, kNormAffine };

struct Parameter {
  std::string name;
  Tensor value;
  ParamKind kind = ParamKind::kWeight;
};

/// Per-forward bindings from parameters to tape variables.
class ForwardContext {
 public:
  ForwardContext(ad::Tape& tape, nn::Mode mode, nn::Rng& rng) : tape_(tape), mode_(mode), rng_(rng) {}

  /// Leaf for `p`, created on first use unless bound beforehand.
  ad::Var var(const Parameter& p);
  void bind(const Parameter& p, ad::Var v) { vars_[&p] = std::move(v); }

  ad::Tape& tape() { return tape_; }
  nn::Mode mode() const { return mode_; }
  nn::Rng& rng() { return rng_; }

 private:
  ad::Tape& tape_;
  nn::Mode mode_;
  nn::Rng& rng_;
  std::unordered_map<const Parameter*, ad::Var> vars_;
};

class Layer {
 public:
  explicit Layer(std::string name) : name_(std::move(name)) {}
  virtual ~Layer() = default;
  Layer(const Layer&) = delete;
  Layer& operator=(const Layer&) = delete;

  const std::string& name() const { return name_; }

  virtual ad::Var forward(const ad::Var& x, ForwardContext& ctx) = 0;
  /// Per-sample shapes, without the batch axis.
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual std::uint64_t macs(const Shape& /*input*/) const { return 0; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::uint64_t parameter_count(bool include_bias) const;

  /// Non-trainable state saved with checkpoints.
  virtual std::vector<std::pair<std::string, Tensor*>> buffers() { return {}; }

 protected:
  void add_parameter(std::string suffix, Tensor value, ParamKind kind);

 private:
  std::string name_;
  std::vector<Parameter> params_;
};

class Conv2dLayer : public Layer {
 public:
  Conv2dLayer(std::string name, std::size_t in_channels, std::size_t out_channels, nn::Extent2 kernel,
              nn::Extent2 stride, nn::Extent2 padding, nn::Rng& rng);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 private:
  std::size_t in_, out_;
  nn::Extent2 kernel_, stride_, padding_;
};

class DwsConvLayer : public Layer {
 public:
  DwsConvLayer(std::string name, std::size_t in_channels, std::size_t out_channels, nn::Extent2 kernel,
               nn::Extent2 stride, nn::Extent2 padding, bool spatial_bias, nn::Rng& rng);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 private:
  std::size_t in_, out_;
  nn::Extent2 kernel_, stride_, padding_;
  bool spatial_bias_;
};

class DilatedConvLayer : public Layer {
 public:
  DilatedConvLayer(std::string name, std::size_t in_channels, std::size_t out_channels, nn::Extent2 kernel,
                   nn::Extent2 dilation, nn::Extent2 padding, nn::Rng& rng);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 private:
  std::size_t in_, out_;
  nn::Extent2 kernel_, dilation_, padding_;
};

class ActivationLayer : public Layer {
 public:
  ActivationLayer(std::string name, nn::Activation kind) : Layer(std::move(name)), kind_(kind) {}
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override { return input; }

 private:
  nn::Activation kind_;
};

class BatchNormLayer : public Layer {
 public:
  BatchNormLayer(std::string name, std::size_t channels);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override { return input; }
  std::vector<std::pair<std::string, Tensor*>> buffers() override;

  nn::BatchNormParams& state() { return state_; }

 private:
  nn::BatchNormParams state_;
};

class MaxPoolLayer : public Layer {
 public:
  MaxPoolLayer(std::string name, nn::Extent2 pool) : Layer(std::move(name)), pool_(pool) {}
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;

 private:
  nn::Extent2 pool_;
};

class DropoutLayer : public Layer {
 public:
  DropoutLayer(std::string name, Real p) : Layer(std::move(name)), p_(p) {}
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override { return input; }

 private:
  Real p_;
};

/// [B, T, N] -> [B, 1, T, N]
class AddChannelLayer : public Layer {
 public:
  using Layer::Layer;
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
};

/// [B, K, T, W] -> [B, T, K*W]
class FramesLayer : public Layer {
 public:
  using Layer::Layer;
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
};

class GruLayer : public Layer {
 public:
  GruLayer(std::string name, std::size_t input_size, std::size_t hidden_size, nn::Rng& rng);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 private:
  std::size_t in_, hidden_;
};

/// Time-shared affine map and sigmoid.
class ClassifierLayer : public Layer {
 public:
  ClassifierLayer(std::string name, std::size_t features, std::size_t classes, nn::Rng& rng);
  ad::Var forward(const ad::Var& x, ForwardContext& ctx) override;
  Shape output_shape(const Shape& input) const override;
  std::uint64_t macs(const Shape& input) const override;

 private:
  std::size_t features_, classes_;
};

// ---------------------------------------------------------------------------
// Model

/// Named parameter values and buffers, in model order.
struct ModelState {
  std::vector<std::pair<std::string, Tensor>> tensors;
  friend bool operator==(const ModelState&, const ModelState&) = default;
};

class Model {
 public:
  /// Throws ConfigError for invalid configurations, including a feature
  /// width after pooling that cannot hold the dilated kernel.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::unique_ptr<Layer>>& layers() const { return layers_; }
  Layer& layer(const std::string& name);

  /// Trainable parameters in a fixed order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  /// features: [B, T, N]; returns probabilities [B, T, C].
  ad::Var forward(ForwardContext& ctx, const ad::Var& features);
  ad::Var forward(ad::Tape& tape, const Tensor& features, nn::Mode mode, nn::Rng& rng);

  /// Eval-mode probabilities without recording, [T, N] -> [T, C] or
  /// [B, T, N] -> [B, T, C], processed `batch` sequences at a time.
  Tensor predict(const Tensor& features, std::size_t batch = 16);

  ModelState state();
  /// Names and shapes must match this model exactly.
  void load_state(const ModelState& state);

 private:
  explicit Model(ModelConfig config) : config_(std::move(config)) {}
  template <typename L, typename... Args>
  L& add(Args&&... args);

  ModelConfig config_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

}  // namespace sedconv

#endif  // SEDCONV_MODEL_HPP_
