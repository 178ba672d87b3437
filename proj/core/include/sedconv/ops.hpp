// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Layer kernels: dense, depthwise-separable and dilated 2D convolution,
// max-pooling, batch normalization, activations, dropout, a gated recurrent
// unit and the frame-shared affine classifier.
//
// Feature maps are channel-major. Every operation accepts a single sample
// [C, H, W] (returning a single sample) or a batch [B, C, H, W]. Sequences
// are [T, F] or [B, T, F].

#ifndef SEDCONV_OPS_HPP_
#define SEDCONV_OPS_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "sedconv/tensor.hpp"

namespace sedconv::nn {

/// (height, width) pair used for strides, paddings, dilations and pools.
struct Extent2 {
  std::size_t h = 1;
  std::size_t w = 1;
  friend bool operator==(const Extent2&, const Extent2&) = default;
};

enum class Mode { kTrain, kEval };

using Rng = std::mt19937_64;

struct DenseConvKernel {
  Tensor weights;  // [K_o, K_i, K_h, K_w]
  Tensor bias;     // [K_o]
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  // Cross-correlation is the default; set to flip the taps spatially.
  bool true_convolution = false;
};

struct DepthwiseSeparableKernel {
  Tensor spatial;         // [K_i, K_h, K_w], one kernel per input channel
  Tensor pointwise;       // [K_o, K_i]
  Tensor bias_spatial;    // [K_i], or empty to disable
  Tensor bias_pointwise;  // [K_o]
  Extent2 stride{1, 1};   // spatial stage only
  Extent2 padding{0, 0};  // spatial stage only
};

struct DilatedConvKernel {
  Tensor weights;  // [K'_o, K'_i, K'_h, K'_w]
  Tensor bias;     // [K'_o]
  Extent2 dilation{1, 1};
  Extent2 padding{0, 0};
};

/// Gate blocks are stacked in the order update (z), reset (r), candidate.
struct GruParams {
  Tensor input_weights;      // [3, H_out, H_in]
  Tensor recurrent_weights;  // [3, H_out, H_out]
  Tensor bias;               // [3, H_out]

  std::size_t input_size() const { return input_weights.dim(2); }
  std::size_t hidden_size() const { return input_weights.dim(1); }
};

struct AffineClassifier {
  Tensor weight;  // [C, F_in]
  Tensor bias;    // [C]
};

struct BatchNormParams {
  Tensor gamma;
  Tensor beta;
  Tensor running_mean;
  Tensor running_var;
  Real momentum = Real(0.1);
  Real epsilon = Real(1e-5);

  /// gamma = 1, beta = 0, running statistics (0, 1).
  static BatchNormParams make(std::size_t channels);
  std::size_t channels() const { return gamma.size(); }
};

/// Geometry shared by the dense and dilated convolutions.
struct ConvGeometry {
  Extent2 stride{1, 1};
  Extent2 padding{0, 0};
  Extent2 dilation{1, 1};
};

/// Output length along one axis; throws SizeError when the (dilated)
/// kernel does not fit inside the padded input.
std::size_t conv_output_length(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t padding, std::size_t dilation);

// ---------------------------------------------------------------------------
// Forward operations.

Tensor conv2d(const Tensor& input, const DenseConvKernel& kernel);
Tensor depthwise_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel);
Tensor pointwise_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel);
Tensor dws_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel);
Tensor dilated_conv2d(const Tensor& input, const DilatedConvKernel& kernel);

/// Window and stride are both `pool`; trailing remainders are truncated.
Tensor maxpool2d(const Tensor& input, Extent2 pool);

struct BatchNormResult {
  Tensor output;
  Tensor mean;  // statistics used for normalization, per channel
  Tensor var;   // biased variance, per channel
};

/// Train mode normalizes with batch statistics and updates the running
/// statistics of `params` in place; eval mode reads them.
BatchNormResult batchnorm2d(const Tensor& input, BatchNormParams& params, Mode mode);

/// Batched form with gamma/beta supplied separately from the running
/// statistics held in `state`.
BatchNormResult batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                  BatchNormParams& state, Mode mode);

enum class Activation { kRelu, kSigmoid, kTanh };

Tensor activation(Activation kind, const Tensor& input);

struct DropoutResult {
  Tensor output;
  Tensor mask;  // 0 or 1/(1-p) per element; all ones in eval mode
};

/// Inverted dropout. Throws std::invalid_argument for p outside [0, 1).
DropoutResult dropout(const Tensor& input, Real p, Mode mode, Rng& rng);

/// Runs the recurrence over [T, H_in] (or [B, T, H_in]) starting from h0
/// (empty means zeros) and returns every hidden state.
Tensor gru_forward(const Tensor& sequence, const GruParams& params, const Tensor& h0 = {});

/// Time-shared affine map followed by a sigmoid: [T, F] -> [T, C].
Tensor classify(const Tensor& features, const AffineClassifier& params);

/// Time-shared affine map without the sigmoid.
Tensor affine_frames(const Tensor& features, const Tensor& weight, const Tensor& bias);

// ---------------------------------------------------------------------------
// Batched kernels and their gradients. Inputs are always batched here.

Tensor conv_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    const ConvGeometry& geom);

struct ConvGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;  // empty when the forward had no bias
};

/// Skips the (empty) input gradient when `need_input` is false.
ConvGrads conv_backward(const Tensor& input, const Tensor& weights, bool has_bias,
                        const Tensor& grad_output, const ConvGeometry& geom, bool need_input = true);

/// Reverses the two spatial axes of a [K_o, K_i, K_h, K_w] kernel.
Tensor flip_spatial(const Tensor& weights);

Tensor depthwise_forward(const Tensor& input, const Tensor& spatial, const Tensor& bias,
                         Extent2 stride, Extent2 padding);
ConvGrads depthwise_backward(const Tensor& input, const Tensor& spatial, bool has_bias,
                             const Tensor& grad_output, Extent2 stride, Extent2 padding);

struct PoolResult {
  Tensor output;
  std::vector<std::uint32_t> argmax;  // offset of the winner inside its [H, W] plane
};

/// Ties go to the first maximum in row-major scan order.
PoolResult maxpool_forward(const Tensor& input, Extent2 pool);
Tensor maxpool_backward(const Tensor& grad_output, const std::vector<std::uint32_t>& argmax,
                        const Shape& input_shape);

struct BatchNormGrads {
  Tensor input;
  Tensor gamma;
  Tensor beta;
};

/// Gradient with respect to the normalization actually applied: when
/// `batch_statistics` is set, mean and var are functions of the input.
BatchNormGrads batchnorm_backward(const Tensor& input, const Tensor& grad_output, const Tensor& mean,
                                  const Tensor& var, const Tensor& gamma, Real epsilon,
                                  bool batch_statistics);

Tensor activation_backward(Activation kind, const Tensor& output, const Tensor& grad_output);

/// Intermediates kept from a batched GRU forward for backpropagation
/// through time. All tensors are [B, T, H_out].
struct GruTrace {
  Tensor output;
  Tensor update;
  Tensor reset;
  Tensor candidate;
  Tensor h0;  // [B, H_out]
};

GruTrace gru_forward_trace(const Tensor& sequence, const GruParams& params, const Tensor& h0 = {});

struct GruGrads {
  Tensor input;
  Tensor input_weights;
  Tensor recurrent_weights;
  Tensor bias;
};

/// Iterative backpropagation through time over the stored trace.
GruGrads gru_backward(const Tensor& sequence, const GruParams& params, const GruTrace& trace,
                      const Tensor& grad_output);

struct AffineGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

AffineGrads affine_backward(const Tensor& features, const Tensor& weight, const Tensor& grad_output);

}  // namespace sedconv::nn

#endif  // SEDCONV_OPS_HPP_
