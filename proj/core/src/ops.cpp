// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>

namespace sedconv::nn {

namespace {

using MatRM = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

/// View of an operand that may arrive with or without its leading batch axis.
class Batched {
 public:
  Batched(const Tensor& t, std::size_t batched_rank, const char* what) : ref_(&t) {
    if (t.rank() == batched_rank) return;
    if (t.rank() + 1 == batched_rank) {
      Shape s{1};
      s.insert(s.end(), t.shape().begin(), t.shape().end());
      owned_ = reshape(t, std::move(s));
      ref_ = &owned_;
      single_ = true;
      return;
    }
    throw SizeError(std::string(what) + ": unexpected input shape " + shape_string(t.shape()));
  }

  const Tensor& get() const { return *ref_; }
  bool single() const { return single_; }

  /// Drops the batch axis again if the caller passed a single sample.
  Tensor restore(Tensor out) const {
    if (!single_) return out;
    Shape s(out.shape().begin() + 1, out.shape().end());
    return reshape(out, std::move(s));
  }

 private:
  const Tensor* ref_;
  Tensor owned_;
  bool single_ = false;
};

/// Range [lo, hi) of output positions o whose input index o*stride + start
/// falls inside [0, in_len).
struct Span {
  std::size_t lo;
  std::size_t hi;
};

Span valid_range(std::size_t out_len, std::size_t stride, long start, std::size_t in_len) {
  const long s = static_cast<long>(stride);
  long lo = 0;
  if (start < 0) lo = (-start + s - 1) / s;
  const long last = static_cast<long>(in_len) - 1 - start;
  long hi = last < 0 ? 0 : last / s + 1;
  hi = std::min<long>(hi, static_cast<long>(out_len));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(std::min<long>(lo, static_cast<long>(out_len))),
          static_cast<std::size_t>(hi)};
}

void im2col(const Real* in, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh_size, std::size_t kw_size, const ConvGeometry& g, std::size_t out_h,
            std::size_t out_w, Real* cols) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t kh = 0; kh < kh_size; ++kh) {
      const long start_h = static_cast<long>(kh * g.dilation.h) - static_cast<long>(g.padding.h);
      const Span rows = valid_range(out_h, g.stride.h, start_h, height);
      for (std::size_t kw = 0; kw < kw_size; ++kw) {
        const long start_w = static_cast<long>(kw * g.dilation.w) - static_cast<long>(g.padding.w);
        const Span cols_range = valid_range(out_w, g.stride.w, start_w, width);
        Real* dst = cols + ((c * kh_size + kh) * kw_size + kw) * plane;
        std::fill(dst, dst + plane, Real{0});
        for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
          const std::size_t ih = oh * g.stride.h + start_h;
          const Real* src = in + (c * height + ih) * width;
          Real* d = dst + oh * out_w;
          for (std::size_t ow = cols_range.lo; ow < cols_range.hi; ++ow) {
            d[ow] = src[ow * g.stride.w + start_w];
          }
        }
      }
    }
  }
}

void col2im(const Real* cols, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh_size, std::size_t kw_size, const ConvGeometry& g, std::size_t out_h,
            std::size_t out_w, Real* in) {
  const std::size_t plane = out_h * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t kh = 0; kh < kh_size; ++kh) {
      const long start_h = static_cast<long>(kh * g.dilation.h) - static_cast<long>(g.padding.h);
      const Span rows = valid_range(out_h, g.stride.h, start_h, height);
      for (std::size_t kw = 0; kw < kw_size; ++kw) {
        const long start_w = static_cast<long>(kw * g.dilation.w) - static_cast<long>(g.padding.w);
        const Span cols_range = valid_range(out_w, g.stride.w, start_w, width);
        const Real* src = cols + ((c * kh_size + kh) * kw_size + kw) * plane;
        for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
          const std::size_t ih = oh * g.stride.h + start_h;
          Real* dst = in + (c * height + ih) * width;
          const Real* s = src + oh * out_w;
          for (std::size_t ow = cols_range.lo; ow < cols_range.hi; ++ow) {
            dst[ow * g.stride.w + start_w] += s[ow];
          }
        }
      }
    }
  }
}

bool is_pointwise(std::size_t kh, std::size_t kw, const ConvGeometry& g) {
  return kh == 1 && kw == 1 && g.stride == Extent2{1, 1} && g.padding == Extent2{0, 0};
}

// Sum with a fixed lane pattern, so the result never depends on where the
// data happens to be aligned (Eigen's reductions peel by address).
Real fixed_sum(const Real* a, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  Real lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t k = 0; k < kLanes; ++k) lane[k] += a[i + k];
  }
  Real acc = 0;
  for (std::size_t k = 0; k < kLanes; ++k) acc += lane[k];
  for (; i < n; ++i) acc += a[i];
  return acc;
}

Real fixed_dot(const Real* a, const Real* b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  Real lane[kLanes] = {};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t k = 0; k < kLanes; ++k) lane[k] += a[i + k] * b[i + k];
  }
  Real acc = 0;
  for (std::size_t k = 0; k < kLanes; ++k) acc += lane[k];
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

// Unit vertical stride lets a convolution run as one small GEMM per kernel
// tap instead of a single GEMM over a large im2col matrix. For every kernel
// column kw, `shifted` holds the input columns that tap reads, with zero rows
// for the vertical padding: [kw][cin][height + 2 p_h][out_w]. Tap (kh, kw)
// then reads a contiguous [out_h * out_w] window per channel.
struct ShiftedInput {
  std::size_t cin, height, width, kh_size, kw_size, padded_h, out_h, out_w;
  ConvGeometry g;
  std::vector<Real> data;

  ShiftedInput(std::size_t cin_, std::size_t height_, std::size_t width_, std::size_t kh, std::size_t kw,
               const ConvGeometry& geom, std::size_t oh, std::size_t ow)
      : cin(cin_), height(height_), width(width_), kh_size(kh), kw_size(kw),
        padded_h(height_ + 2 * geom.padding.h), out_h(oh), out_w(ow), g(geom),
        data(kw * cin_ * padded_h * ow) {}

  std::size_t channel_stride() const { return padded_h * out_w; }
  Real* column(std::size_t kw) { return data.data() + kw * cin * channel_stride(); }

  const Real* tap(std::size_t kh, std::size_t kw) const {
    return data.data() + kw * cin * channel_stride() + kh * g.dilation.h * out_w;
  }
  Real* tap(std::size_t kh, std::size_t kw) {
    return data.data() + kw * cin * channel_stride() + kh * g.dilation.h * out_w;
  }

  void load(const Real* in) {
    std::fill(data.begin(), data.end(), Real{0});
    for (std::size_t kw = 0; kw < kw_size; ++kw) {
      const long start_w = static_cast<long>(kw * g.dilation.w) - static_cast<long>(g.padding.w);
      const Span cols = valid_range(out_w, g.stride.w, start_w, width);
      for (std::size_t c = 0; c < cin; ++c) {
        Real* dst = column(kw) + c * channel_stride() + g.padding.h * out_w;
        const Real* src = in + c * height * width;
        for (std::size_t h = 0; h < height; ++h) {
          for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
            dst[h * out_w + ow] = src[h * width + ow * g.stride.w + start_w];
          }
        }
      }
    }
  }

  /// Adds the padded-away gradient layout back onto the input gradient.
  void scatter_add(Real* din) {
    for (std::size_t kw = 0; kw < kw_size; ++kw) {
      const long start_w = static_cast<long>(kw * g.dilation.w) - static_cast<long>(g.padding.w);
      const Span cols = valid_range(out_w, g.stride.w, start_w, width);
      for (std::size_t c = 0; c < cin; ++c) {
        const Real* src = column(kw) + c * channel_stride() + g.padding.h * out_w;
        Real* dst = din + c * height * width;
        for (std::size_t h = 0; h < height; ++h) {
          for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
            dst[h * width + ow * g.stride.w + start_w] += src[h * out_w + ow];
          }
        }
      }
    }
  }
};

using StridedMap = Eigen::Map<MatRM, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const MatRM, 0, Eigen::OuterStride<>>;

/// [K_o, K_i, K_h, K_w] -> tap-major [(K_h * K_w) * K_o, K_i].
MatRM pack_taps(const Tensor& weights) {
  const std::size_t cout = weights.dim(0), cin = weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
  MatRM packed(kh * kw * cout, cin);
  for (std::size_t o = 0; o < cout; ++o) {
    for (std::size_t c = 0; c < cin; ++c) {
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          packed((i * kw + j) * cout + o, c) = weights[((o * cin + c) * kh + i) * kw + j];
        }
      }
    }
  }
  return packed;
}

void check_positive(Extent2 e, const char* what) {
  if (e.h == 0 || e.w == 0) throw std::invalid_argument(std::string(what) + " must be positive");
}

void check_conv_operands(const Tensor& input, const Tensor& weights, const Tensor& bias,
                         const char* what) {
  if (weights.rank() != 4) {
    throw SizeError(std::string(what) + ": weights must be [K_o, K_i, K_h, K_w], got " +
                    shape_string(weights.shape()));
  }
  if (input.rank() != 4) throw SizeError(std::string(what) + ": input must be batched");
  if (input.dim(1) != weights.dim(1)) {
    throw SizeError(std::string(what) + ": channel mismatch, input has " +
                    std::to_string(input.dim(1)) + " channels, kernel expects " +
                    std::to_string(weights.dim(1)));
  }
  if (!bias.empty() && bias.size() != weights.dim(0)) {
    throw SizeError(std::string(what) + ": bias length must equal K_o");
  }
}

Real sigmoid(Real x) { return Real(1) / (Real(1) + std::exp(-x)); }

Tensor pointwise_weights(const DepthwiseSeparableKernel& k) {
  if (k.pointwise.rank() != 2) {
    throw SizeError("pointwise weights must be [K_o, K_i], got " + shape_string(k.pointwise.shape()));
  }
  return reshape(k.pointwise, {k.pointwise.dim(0), k.pointwise.dim(1), 1, 1});
}

}  // namespace

BatchNormParams BatchNormParams::make(std::size_t channels) {
  BatchNormParams p;
  p.gamma = Tensor::full({channels}, 1);
  p.beta = Tensor::zeros({channels});
  p.running_mean = Tensor::zeros({channels});
  p.running_var = Tensor::full({channels}, 1);
  return p;
}

std::size_t conv_output_length(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t padding, std::size_t dilation) {
  if (kernel == 0 || stride == 0 || dilation == 0) {
    throw std::invalid_argument("kernel, stride and dilation must be positive");
  }
  const std::size_t effective = 1 + (kernel - 1) * dilation;
  const std::size_t padded = input + 2 * padding;
  if (padded < effective) {
    throw SizeError("effective kernel extent " + std::to_string(effective) +
                    " exceeds padded input extent " + std::to_string(padded));
  }
  return (padded - effective) / stride + 1;
}

// ---------------------------------------------------------------------------
// Dense / dilated convolution.

Tensor conv_forward(const Tensor& input, const Tensor& weights, const Tensor& bias,
                    const ConvGeometry& geom) {
  check_conv_operands(input, weights, bias, "convolution");
  check_positive(geom.stride, "stride");
  check_positive(geom.dilation, "dilation");
  const std::size_t batch = input.dim(0), cin = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t out_h = conv_output_length(height, kh, geom.stride.h, geom.padding.h, geom.dilation.h);
  const std::size_t out_w = conv_output_length(width, kw, geom.stride.w, geom.padding.w, geom.dilation.w);
  const std::size_t taps = cin * kh * kw, plane = out_h * out_w;

  Tensor out({batch, cout, out_h, out_w});
  const bool direct = is_pointwise(kh, kw, geom);
  const bool shifted = !direct && geom.stride.h == 1;

  if (shifted) {
    const MatRM packed = pack_taps(weights);
    ShiftedInput buf(cin, height, width, kh, kw, geom, out_h, out_w);
    for (std::size_t b = 0; b < batch; ++b) {
      buf.load(input.raw() + b * cin * height * width);
      MapRM out_b(out.raw() + b * cout * plane, cout, plane);
      out_b.setZero();
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          ConstStridedMap x(buf.tap(i, j), cin, plane, Eigen::OuterStride<>(buf.channel_stride()));
          out_b.noalias() += packed.middleRows((i * kw + j) * cout, cout) * x;
        }
      }
      if (!bias.empty()) {
        for (std::size_t o = 0; o < cout; ++o) out_b.row(o).array() += bias[o];
      }
    }
    return out;
  }

  ConstMapRM w(weights.raw(), cout, taps);
  MatRM cols;
  if (!direct) cols.resize(taps, plane);

  for (std::size_t b = 0; b < batch; ++b) {
    const Real* in_b = input.raw() + b * cin * height * width;
    MapRM out_b(out.raw() + b * cout * plane, cout, plane);
    if (direct) {
      out_b.noalias() = w * ConstMapRM(in_b, cin, plane);
    } else {
      im2col(in_b, cin, height, width, kh, kw, geom, out_h, out_w, cols.data());
      out_b.noalias() = w * cols;
    }
    if (!bias.empty()) {
      for (std::size_t o = 0; o < cout; ++o) out_b.row(o).array() += bias[o];
    }
  }
  return out;
}

ConvGrads conv_backward(const Tensor& input, const Tensor& weights, bool has_bias,
                        const Tensor& grad_output, const ConvGeometry& geom, bool need_input) {
  const std::size_t batch = input.dim(0), cin = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  const std::size_t cout = weights.dim(0), kh = weights.dim(2), kw = weights.dim(3);
  const std::size_t out_h = grad_output.dim(2), out_w = grad_output.dim(3);
  const std::size_t taps = cin * kh * kw, plane = out_h * out_w;

  ConvGrads g;
  if (need_input) g.input = Tensor(input.shape());
  g.weights = Tensor(weights.shape());
  if (has_bias) g.bias = Tensor({cout});

  for (std::size_t b = 0; b < batch; ++b) {
    if (!has_bias) break;
    const Real* dy = grad_output.raw() + b * cout * plane;
    for (std::size_t o = 0; o < cout; ++o) g.bias[o] += fixed_sum(dy + o * plane, plane);
  }

  const bool direct = is_pointwise(kh, kw, geom);
  if (!direct && geom.stride.h == 1) {
    const MatRM packed = pack_taps(weights);
    MatRM dpacked = MatRM::Zero(packed.rows(), packed.cols());
    ShiftedInput buf(cin, height, width, kh, kw, geom, out_h, out_w);
    std::optional<ShiftedInput> dbuf;
    if (need_input) dbuf.emplace(cin, height, width, kh, kw, geom, out_h, out_w);
    const Eigen::OuterStride<> stride(buf.channel_stride());
    for (std::size_t b = 0; b < batch; ++b) {
      buf.load(input.raw() + b * cin * height * width);
      if (dbuf) std::fill(dbuf->data.begin(), dbuf->data.end(), Real{0});
      ConstMapRM dy(grad_output.raw() + b * cout * plane, cout, plane);
      for (std::size_t i = 0; i < kh; ++i) {
        for (std::size_t j = 0; j < kw; ++j) {
          const std::size_t row = (i * kw + j) * cout;
          ConstStridedMap x(buf.tap(i, j), cin, plane, stride);
          dpacked.middleRows(row, cout).noalias() += dy * x.transpose();
          if (dbuf) {
            StridedMap dx(dbuf->tap(i, j), cin, plane, stride);
            dx.noalias() += packed.middleRows(row, cout).transpose() * dy;
          }
        }
      }
      if (dbuf) dbuf->scatter_add(g.input.raw() + b * cin * height * width);
    }
    for (std::size_t o = 0; o < cout; ++o) {
      for (std::size_t c = 0; c < cin; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
          for (std::size_t j = 0; j < kw; ++j) {
            g.weights[((o * cin + c) * kh + i) * kw + j] = dpacked((i * kw + j) * cout + o, c);
          }
        }
      }
    }
    return g;
  }

  ConstMapRM w(weights.raw(), cout, taps);
  MapRM dw(g.weights.raw(), cout, taps);
  MatRM cols, dcols;
  if (!direct) {
    cols.resize(taps, plane);
    if (need_input) dcols.resize(taps, plane);
  }

  for (std::size_t b = 0; b < batch; ++b) {
    const Real* in_b = input.raw() + b * cin * height * width;
    Real* din_b = need_input ? g.input.raw() + b * cin * height * width : nullptr;
    ConstMapRM dy(grad_output.raw() + b * cout * plane, cout, plane);
    if (direct) {
      ConstMapRM x(in_b, cin, plane);
      dw.noalias() += dy * x.transpose();
      if (need_input) MapRM(din_b, cin, plane).noalias() = w.transpose() * dy;
    } else {
      im2col(in_b, cin, height, width, kh, kw, geom, out_h, out_w, cols.data());
      dw.noalias() += dy * cols.transpose();
      if (need_input) {
        dcols.noalias() = w.transpose() * dy;
        col2im(dcols.data(), cin, height, width, kh, kw, geom, out_h, out_w, din_b);
      }
    }
  }
  return g;
}

Tensor flip_spatial(const Tensor& weights) {
  Tensor out(weights.shape());
  const std::size_t outer = weights.dim(0) * weights.dim(1), kh = weights.dim(2), kw = weights.dim(3);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < kh; ++i) {
      for (std::size_t j = 0; j < kw; ++j) {
        out[(o * kh + i) * kw + j] = weights[(o * kh + (kh - 1 - i)) * kw + (kw - 1 - j)];
      }
    }
  }
  return out;
}

Tensor conv2d(const Tensor& input, const DenseConvKernel& kernel) {
  Batched in(input, 4, "conv2d");
  check_positive(kernel.stride, "stride");
  const Tensor& w = kernel.true_convolution ? flip_spatial(kernel.weights) : kernel.weights;
  ConvGeometry geom{kernel.stride, kernel.padding, {1, 1}};
  return in.restore(conv_forward(in.get(), w, kernel.bias, geom));
}

Tensor dilated_conv2d(const Tensor& input, const DilatedConvKernel& kernel) {
  Batched in(input, 4, "dilated_conv2d");
  check_positive(kernel.dilation, "dilation");
  ConvGeometry geom{{1, 1}, kernel.padding, kernel.dilation};
  return in.restore(conv_forward(in.get(), kernel.weights, kernel.bias, geom));
}

// ---------------------------------------------------------------------------
// Depthwise-separable convolution.

// Stride-1 depthwise planes are processed in a zero-padded layout with row
// pitch W + 2 p_w. Output row oh, column ow lives at oh * pitch + ow, so each
// kernel tap is a single shifted axpy over the whole plane. Columns past
// out_w are scratch and get discarded.
constexpr std::size_t kTile = 512;

struct PaddedPlane {
  std::size_t height, width, pad_h, pad_w, pitch, span;
  std::vector<Real> data;

  PaddedPlane(std::size_t h, std::size_t w, Extent2 padding, std::size_t out_h, std::size_t kw)
      : height(h), width(w), pad_h(padding.h), pad_w(padding.w), pitch(w + 2 * padding.w),
        span(out_h * pitch), data((h + 2 * padding.h) * pitch + kw) {}

  void load(const Real* src) {
    std::fill(data.begin(), data.end(), Real{0});
    for (std::size_t h = 0; h < height; ++h) {
      std::copy(src + h * width, src + (h + 1) * width, data.data() + (h + pad_h) * pitch + pad_w);
    }
  }
  void store_add(Real* dst) const {
    for (std::size_t h = 0; h < height; ++h) {
      const Real* row = data.data() + (h + pad_h) * pitch + pad_w;
      for (std::size_t w = 0; w < width; ++w) dst[h * width + w] += row[w];
    }
  }
};

Tensor depthwise_forward(const Tensor& input, const Tensor& spatial, const Tensor& bias,
                         Extent2 stride, Extent2 padding) {
  if (spatial.rank() != 3) {
    throw SizeError("depthwise kernels must be [K_i, K_h, K_w], got " + shape_string(spatial.shape()));
  }
  if (input.rank() != 4) throw SizeError("depthwise_conv: input must be batched");
  if (input.dim(1) != spatial.dim(0)) {
    throw SizeError("depthwise_conv: channel mismatch, input has " + std::to_string(input.dim(1)) +
                    " channels, kernel expects " + std::to_string(spatial.dim(0)));
  }
  if (!bias.empty() && bias.size() != spatial.dim(0)) {
    throw SizeError("depthwise_conv: spatial bias length must equal K_i");
  }
  check_positive(stride, "stride");
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  const std::size_t kh_size = spatial.dim(1), kw_size = spatial.dim(2);
  const std::size_t out_h = conv_output_length(height, kh_size, stride.h, padding.h, 1);
  const std::size_t out_w = conv_output_length(width, kw_size, stride.w, padding.w, 1);

  Tensor out({batch, channels, out_h, out_w});
  if (stride == Extent2{1, 1}) {
    PaddedPlane plane(height, width, padding, out_h, kw_size);
    std::vector<Real> wide(plane.span);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        plane.load(input.raw() + (b * channels + c) * height * width);
        std::fill(wide.begin(), wide.end(), bias.empty() ? Real{0} : bias[c]);
        const Real* k = spatial.raw() + c * kh_size * kw_size;
        for (std::size_t n0 = 0; n0 < plane.span; n0 += kTile) {
          const std::size_t len = std::min(kTile, plane.span - n0);
          Real* __restrict acc = wide.data() + n0;
          for (std::size_t kh = 0; kh < kh_size; ++kh) {
            for (std::size_t kw = 0; kw < kw_size; ++kw) {
              const Real wv = k[kh * kw_size + kw];
              const Real* __restrict src = plane.data.data() + n0 + kh * plane.pitch + kw;
              for (std::size_t n = 0; n < len; ++n) acc[n] += wv * src[n];
            }
          }
        }
        Real* out_p = out.raw() + (b * channels + c) * out_h * out_w;
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          std::copy_n(wide.data() + oh * plane.pitch, out_w, out_p + oh * out_w);
        }
      }
    }
    return out;
  }

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const Real* in_p = input.raw() + (b * channels + c) * height * width;
      Real* out_p = out.raw() + (b * channels + c) * out_h * out_w;
      if (!bias.empty()) std::fill(out_p, out_p + out_h * out_w, bias[c]);
      const Real* k = spatial.raw() + c * kh_size * kw_size;
      for (std::size_t kh = 0; kh < kh_size; ++kh) {
        const long start_h = static_cast<long>(kh) - static_cast<long>(padding.h);
        const Span rows = valid_range(out_h, stride.h, start_h, height);
        for (std::size_t kw = 0; kw < kw_size; ++kw) {
          const long start_w = static_cast<long>(kw) - static_cast<long>(padding.w);
          const Span cols = valid_range(out_w, stride.w, start_w, width);
          const Real wv = k[kh * kw_size + kw];
          for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
            const Real* src = in_p + (oh * stride.h + start_h) * width;
            Real* dst = out_p + oh * out_w;
            if (stride.w == 1) {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) dst[ow] += wv * src[ow + start_w];
            } else {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
                dst[ow] += wv * src[ow * stride.w + start_w];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

ConvGrads depthwise_backward(const Tensor& input, const Tensor& spatial, bool has_bias,
                             const Tensor& grad_output, Extent2 stride, Extent2 padding) {
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  const std::size_t kh_size = spatial.dim(1), kw_size = spatial.dim(2);
  const std::size_t out_h = grad_output.dim(2), out_w = grad_output.dim(3);

  ConvGrads g;
  g.input = Tensor(input.shape());
  g.weights = Tensor(spatial.shape());
  if (has_bias) g.bias = Tensor({channels});

  if (stride == Extent2{1, 1}) {
    PaddedPlane plane(height, width, padding, out_h, kw_size);
    PaddedPlane dplane(height, width, padding, out_h, kw_size);
    std::vector<Real> wide(plane.span, Real{0});
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t c = 0; c < channels; ++c) {
        const std::size_t in_off = (b * channels + c) * height * width;
        const Real* dy = grad_output.raw() + (b * channels + c) * out_h * out_w;
        if (has_bias) g.bias[c] += fixed_sum(dy, out_h * out_w);
        plane.load(input.raw() + in_off);
        std::fill(dplane.data.begin(), dplane.data.end(), Real{0});
        // Scratch columns stay zero so they drop out of both products.
        for (std::size_t oh = 0; oh < out_h; ++oh) {
          std::copy_n(dy + oh * out_w, out_w, wide.data() + oh * plane.pitch);
        }
        const Real* k = spatial.raw() + c * kh_size * kw_size;
        Real* dk = g.weights.raw() + c * kh_size * kw_size;
        for (std::size_t t = 0; t < kh_size * kw_size; ++t) {
          const std::size_t shift = (t / kw_size) * plane.pitch + t % kw_size;
          dk[t] += fixed_dot(plane.data.data() + shift, wide.data(), plane.span);
        }
        // Input gradient: scatter each tap back, dplane[n + shift] += w * wide[n].
        // The padded layout leaves room for every shift, so tile with an offset.
        for (std::size_t n0 = 0; n0 < plane.span; n0 += kTile) {
          const std::size_t len = std::min(kTile, plane.span - n0);
          for (std::size_t kh = 0; kh < kh_size; ++kh) {
            for (std::size_t kw = 0; kw < kw_size; ++kw) {
              const Real wv = k[kh * kw_size + kw];
              Real* __restrict dsrc = dplane.data.data() + n0 + kh * plane.pitch + kw;
              const Real* __restrict d = wide.data() + n0;
              for (std::size_t n = 0; n < len; ++n) dsrc[n] += wv * d[n];
            }
          }
        }
        dplane.store_add(g.input.raw() + in_off);
      }
    }
    return g;
  }

  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const std::size_t in_off = (b * channels + c) * height * width;
      const Real* in_p = input.raw() + in_off;
      Real* din_p = g.input.raw() + in_off;
      const Real* dy = grad_output.raw() + (b * channels + c) * out_h * out_w;
      if (has_bias) g.bias[c] += fixed_sum(dy, out_h * out_w);
      const Real* k = spatial.raw() + c * kh_size * kw_size;
      Real* dk = g.weights.raw() + c * kh_size * kw_size;
      for (std::size_t kh = 0; kh < kh_size; ++kh) {
        const long start_h = static_cast<long>(kh) - static_cast<long>(padding.h);
        const Span rows = valid_range(out_h, stride.h, start_h, height);
        for (std::size_t kw = 0; kw < kw_size; ++kw) {
          const long start_w = static_cast<long>(kw) - static_cast<long>(padding.w);
          const Span cols = valid_range(out_w, stride.w, start_w, width);
          const Real wv = k[kh * kw_size + kw];
          Real acc = 0;
          for (std::size_t oh = rows.lo; oh < rows.hi; ++oh) {
            const std::size_t row_off = (oh * stride.h + start_h) * width;
            const Real* src = in_p + row_off;
            Real* dsrc = din_p + row_off;
            const Real* d = dy + oh * out_w;
            if (stride.w == 1) {
              const std::size_t n = cols.hi - cols.lo;
              const Real* s0 = src + cols.lo + start_w;
              Real* ds0 = dsrc + cols.lo + start_w;
              const Real* d0 = d + cols.lo;
              acc += fixed_dot(s0, d0, n);
              for (std::size_t i = 0; i < n; ++i) ds0[i] += wv * d0[i];
            } else {
              for (std::size_t ow = cols.lo; ow < cols.hi; ++ow) {
                const std::size_t iw = ow * stride.w + start_w;
                acc += src[iw] * d[ow];
                dsrc[iw] += wv * d[ow];
              }
            }
          }
          dk[kh * kw_size + kw] += acc;
        }
      }
    }
  }
  return g;
}

Tensor depthwise_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel) {
  Batched in(input, 4, "depthwise_conv");
  return in.restore(
      depthwise_forward(in.get(), kernel.spatial, kernel.bias_spatial, kernel.stride, kernel.padding));
}

Tensor pointwise_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel) {
  Batched in(input, 4, "pointwise_conv");
  if (kernel.pointwise.rank() == 2 && in.get().dim(1) != kernel.pointwise.dim(1)) {
    throw SizeError("pointwise_conv: channel mismatch, input has " + std::to_string(in.get().dim(1)) +
                    " channels, kernel expects " + std::to_string(kernel.pointwise.dim(1)));
  }
  return in.restore(conv_forward(in.get(), pointwise_weights(kernel), kernel.bias_pointwise, ConvGeometry{}));
}

Tensor dws_conv(const Tensor& input, const DepthwiseSeparableKernel& kernel) {
  if (kernel.pointwise.rank() != 2 || kernel.spatial.rank() != 3 ||
      kernel.pointwise.dim(1) != kernel.spatial.dim(0)) {
    throw SizeError("depthwise-separable kernel: pointwise K_i must equal the spatial channel count");
  }
  return pointwise_conv(depthwise_conv(input, kernel), kernel);
}

// ---------------------------------------------------------------------------
// Pooling.

PoolResult maxpool_forward(const Tensor& input, Extent2 pool) {
  if (input.rank() != 4) throw SizeError("maxpool2d: input must be batched");
  check_positive(pool, "pool");
  const std::size_t batch = input.dim(0), channels = input.dim(1), height = input.dim(2),
                    width = input.dim(3);
  if (pool.h > height || pool.w > width) {
    throw SizeError("maxpool2d: pool " + std::to_string(pool.h) + "x" + std::to_string(pool.w) +
                    " larger than input " + std::to_string(height) + "x" + std::to_string(width));
  }
  const std::size_t out_h = height / pool.h, out_w = width / pool.w;
  PoolResult r;
  r.output = Tensor({batch, channels, out_h, out_w});
  r.argmax.resize(r.output.size());
  std::size_t n = 0;
  for (std::size_t p = 0; p < batch * channels; ++p) {
    const Real* in_p = input.raw() + p * height * width;
    for (std::size_t oh = 0; oh < out_h; ++oh) {
      for (std::size_t ow = 0; ow < out_w; ++ow, ++n) {
        std::size_t best = oh * pool.h * width + ow * pool.w;
        Real best_v = in_p[best];
        for (std::size_t i = 0; i < pool.h; ++i) {
          for (std::size_t j = 0; j < pool.w; ++j) {
            const std::size_t off = (oh * pool.h + i) * width + ow * pool.w + j;
            if (in_p[off] > best_v || std::isnan(in_p[off])) {
              best_v = in_p[off];
              best = off;
            }
          }
        }
        r.output[n] = best_v;
        r.argmax[n] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return r;
}

Tensor maxpool_backward(const Tensor& grad_output, const std::vector<std::uint32_t>& argmax,
                        const Shape& input_shape) {
  Tensor g(input_shape);
  const std::size_t plane_in = input_shape[2] * input_shape[3];
  const std::size_t plane_out = grad_output.dim(2) * grad_output.dim(3);
  for (std::size_t n = 0; n < grad_output.size(); ++n) {
    g[(n / plane_out) * plane_in + argmax[n]] += grad_output[n];
  }
  return g;
}

Tensor maxpool2d(const Tensor& input, Extent2 pool) {
  Batched in(input, 4, "maxpool2d");
  return in.restore(maxpool_forward(in.get(), pool).output);
}

// ---------------------------------------------------------------------------
// Batch normalization.

BatchNormResult batchnorm_forward(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                                  BatchNormParams& params, Mode mode) {
  if (x.rank() != 4) throw SizeError("batchnorm2d: input must be batched");
  const std::size_t batch = x.dim(0), channels = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (channels != gamma.size() || channels != beta.size() || channels != params.running_mean.size() ||
      channels != params.running_var.size()) {
    throw SizeError("batchnorm2d: channel mismatch, input has " + std::to_string(channels) +
                    " channels, parameters cover " + std::to_string(gamma.size()));
  }
  BatchNormResult r;
  if (mode == Mode::kTrain) {
    r.mean = Tensor({channels});
    r.var = Tensor({channels});
    const Real count = static_cast<Real>(batch * plane);
    for (std::size_t c = 0; c < channels; ++c) {
      Real acc = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* p = x.raw() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) acc += p[i];
      }
      const Real mean = acc / count;
      Real sq = 0;
      for (std::size_t b = 0; b < batch; ++b) {
        const Real* p = x.raw() + (b * channels + c) * plane;
        for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      r.mean[c] = mean;
      r.var[c] = sq / count;
      params.running_mean[c] = (1 - params.momentum) * params.running_mean[c] + params.momentum * mean;
      params.running_var[c] = (1 - params.momentum) * params.running_var[c] + params.momentum * r.var[c];
    }
  } else {
    r.mean = params.running_mean;
    r.var = params.running_var;
  }
  r.output = Tensor(x.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t c = 0; c < channels; ++c) {
      const Real scale = gamma[c] / std::sqrt(r.var[c] + params.epsilon);
      const Real shift = beta[c] - r.mean[c] * scale;
      const Real* p = x.raw() + (b * channels + c) * plane;
      Real* o = r.output.raw() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) o[i] = p[i] * scale + shift;
    }
  }
  return r;
}

BatchNormResult batchnorm2d(const Tensor& input, BatchNormParams& params, Mode mode) {
  Batched in(input, 4, "batchnorm2d");
  auto r = batchnorm_forward(in.get(), params.gamma, params.beta, params, mode);
  r.output = in.restore(std::move(r.output));
  return r;
}

BatchNormGrads batchnorm_backward(const Tensor& input, const Tensor& grad_output, const Tensor& mean,
                                  const Tensor& var, const Tensor& gamma, Real epsilon,
                                  bool batch_statistics) {
  const std::size_t batch = input.dim(0), channels = input.dim(1), plane = input.dim(2) * input.dim(3);
  const Real count = static_cast<Real>(batch * plane);
  BatchNormGrads g;
  g.input = Tensor(input.shape());
  g.gamma = Tensor({channels});
  g.beta = Tensor({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    const Real inv_std = 1 / std::sqrt(var[c] + epsilon);
    Real sum_dy = 0, sum_dy_xhat = 0;
    for (std::size_t b = 0; b < batch; ++b) {
      const Real* x = input.raw() + (b * channels + c) * plane;
      const Real* dy = grad_output.raw() + (b * channels + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * (x[i] - mean[c]) * inv_std;
      }
    }
    g.gamma[c] = sum_dy_xhat;
    g.beta[c] = sum_dy;
    const Real k = gamma[c] * inv_std;
    for (std::size_t b = 0; b < batch; ++b) {
      const Real* x = input.raw() + (b * channels + c) * plane;
      const Real* dy = grad_output.raw() + (b * channels + c) * plane;
      Real* dx = g.input.raw() + (b * channels + c) * plane;
      if (batch_statistics) {
        for (std::size_t i = 0; i < plane; ++i) {
          const Real xhat = (x[i] - mean[c]) * inv_std;
          dx[i] = k * (dy[i] - sum_dy / count - xhat * sum_dy_xhat / count);
        }
      } else {
        for (std::size_t i = 0; i < plane; ++i) dx[i] = k * dy[i];
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------
// Activations and dropout.

Tensor activation(Activation kind, const Tensor& input) {
  Tensor out(input.shape());
  const Real* x = input.raw();
  Real* y = out.raw();
  const std::size_t n = input.size();
  switch (kind) {
    case Activation::kRelu:
      // NaN passes through so divergence stays visible downstream.
      for (std::size_t i = 0; i < n; ++i) y[i] = x[i] < 0 ? Real{0} : x[i];
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) y[i] = sigmoid(x[i]);
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
      break;
  }
  return out;
}

Tensor activation_backward(Activation kind, const Tensor& output, const Tensor& grad_output) {
  Tensor g(output.shape());
  const Real* y = output.raw();
  const Real* dy = grad_output.raw();
  Real* dx = g.raw();
  const std::size_t n = output.size();
  switch (kind) {
    case Activation::kRelu:
      for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > 0 ? dy[i] : Real{0};
      break;
    case Activation::kSigmoid:
      for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * y[i] * (1 - y[i]);
      break;
    case Activation::kTanh:
      for (std::size_t i = 0; i < n; ++i) dx[i] = dy[i] * (1 - y[i] * y[i]);
      break;
  }
  return g;
}

DropoutResult dropout(const Tensor& input, Real p, Mode mode, Rng& rng) {
  if (!(p >= 0 && p < 1)) throw std::invalid_argument("dropout probability must lie in [0, 1)");
  DropoutResult r;
  if (mode == Mode::kEval || p == 0) {
    r.output = input;
    r.mask = Tensor::full(input.shape(), 1);
    return r;
  }
  const Real keep_scale = 1 / (1 - p);
  r.mask = Tensor(input.shape());
  r.output = Tensor(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) {
    // 53 random bits -> uniform in [0, 1).
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    r.mask[i] = u < p ? Real{0} : keep_scale;
    r.output[i] = input[i] * r.mask[i];
  }
  return r;
}

// ---------------------------------------------------------------------------
// Gated recurrent unit.

namespace {

void check_gru(const Tensor& seq, const GruParams& p) {
  if (p.input_weights.rank() != 3 || p.input_weights.dim(0) != 3 || p.recurrent_weights.rank() != 3 ||
      p.recurrent_weights.dim(0) != 3 || p.bias.rank() != 2 || p.bias.dim(0) != 3) {
    throw SizeError("GRU parameters must be stacked as [3, H_out, ...] per gate");
  }
  const std::size_t hidden = p.hidden_size();
  if (p.recurrent_weights.dim(1) != hidden || p.recurrent_weights.dim(2) != hidden ||
      p.bias.dim(1) != hidden) {
    throw SizeError("GRU gate shapes are inconsistent");
  }
  if (seq.rank() != 3 || seq.dim(2) != p.input_size()) {
    throw SizeError("GRU input feature width does not match H_in = " + std::to_string(p.input_size()));
  }
}

}  // namespace

GruTrace gru_forward_trace(const Tensor& sequence, const GruParams& params, const Tensor& h0) {
  check_gru(sequence, params);
  const std::size_t batch = sequence.dim(0), steps = sequence.dim(1), in_size = sequence.dim(2);
  const std::size_t hidden = params.hidden_size();

  ConstMapRM x(sequence.raw(), batch * steps, in_size);
  ConstMapRM w(params.input_weights.raw(), 3 * hidden, in_size);
  MatRM proj = x * w.transpose();
  for (std::size_t j = 0; j < 3 * hidden; ++j) proj.col(j).array() += params.bias[j];

  ConstMapRM u_z(params.recurrent_weights.raw(), hidden, hidden);
  ConstMapRM u_r(params.recurrent_weights.raw() + hidden * hidden, hidden, hidden);
  ConstMapRM u_h(params.recurrent_weights.raw() + 2 * hidden * hidden, hidden, hidden);

  GruTrace tr;
  tr.h0 = Tensor({batch, hidden});
  if (!h0.empty()) {
    if (h0.size() == hidden) {
      for (std::size_t b = 0; b < batch; ++b) std::copy(h0.raw(), h0.raw() + hidden, tr.h0.raw() + b * hidden);
    } else if (h0.size() == batch * hidden) {
      std::copy(h0.raw(), h0.raw() + h0.size(), tr.h0.raw());
    } else {
      throw SizeError("GRU initial state must have H_out entries per sequence");
    }
  }
  const Shape trace_shape{batch, steps, hidden};
  tr.output = Tensor(trace_shape);
  tr.update = Tensor(trace_shape);
  tr.reset = Tensor(trace_shape);
  tr.candidate = Tensor(trace_shape);

  MatRM h = ConstMapRM(tr.h0.raw(), batch, hidden);
  MatRM rz(batch, hidden), rr(batch, hidden), rh(batch, hidden), ch(batch, hidden);
  for (std::size_t t = 0; t < steps; ++t) {
    rz.noalias() = h * u_z.transpose();
    rr.noalias() = h * u_r.transpose();
    for (std::size_t b = 0; b < batch; ++b) {
      const Real* pr = proj.data() + (b * steps + t) * 3 * hidden;
      const std::size_t off = (b * steps + t) * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const Real z = sigmoid(pr[j] + rz(b, j));
        const Real r = sigmoid(pr[hidden + j] + rr(b, j));
        tr.update[off + j] = z;
        tr.reset[off + j] = r;
        rh(b, j) = r * h(b, j);
      }
    }
    ch.noalias() = rh * u_h.transpose();
    for (std::size_t b = 0; b < batch; ++b) {
      const Real* pr = proj.data() + (b * steps + t) * 3 * hidden;
      const std::size_t off = (b * steps + t) * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const Real cand = std::tanh(pr[2 * hidden + j] + ch(b, j));
        const Real z = tr.update[off + j];
        const Real hn = (1 - z) * h(b, j) + z * cand;
        tr.candidate[off + j] = cand;
        tr.output[off + j] = hn;
        h(b, j) = hn;
      }
    }
  }
  return tr;
}

GruGrads gru_backward(const Tensor& sequence, const GruParams& params, const GruTrace& trace,
                      const Tensor& grad_output) {
  const std::size_t batch = sequence.dim(0), steps = sequence.dim(1), in_size = sequence.dim(2);
  const std::size_t hidden = params.hidden_size();
  const std::size_t rows = batch * steps;

  ConstMapRM u_z(params.recurrent_weights.raw(), hidden, hidden);
  ConstMapRM u_r(params.recurrent_weights.raw() + hidden * hidden, hidden, hidden);
  ConstMapRM u_h(params.recurrent_weights.raw() + 2 * hidden * hidden, hidden, hidden);

  // Pre-activation gradients, gate-major columns [z | r | candidate].
  MatRM da(rows, 3 * hidden);
  MatRM h_prev(rows, hidden);
  MatRM reset_h(rows, hidden);

  MatRM carry = MatRM::Zero(batch, hidden);
  MatRM da_z(batch, hidden), da_r(batch, hidden), da_h(batch, hidden), direct(batch, hidden);
  MatRM d_rh(batch, hidden);

  for (std::size_t t = steps; t-- > 0;) {
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t row = b * steps + t;
      const std::size_t off = row * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const Real hp = t == 0 ? trace.h0[b * hidden + j] : trace.output[off - hidden + j];
        const Real z = trace.update[off + j];
        const Real c = trace.candidate[off + j];
        const Real dh = grad_output[off + j] + carry(b, j);
        h_prev(row, j) = hp;
        da_z(b, j) = dh * (c - hp) * z * (1 - z);
        da_h(b, j) = dh * z * (1 - c * c);
        direct(b, j) = dh * (1 - z);
      }
    }
    d_rh.noalias() = da_h * u_h;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t row = b * steps + t;
      const std::size_t off = row * hidden;
      for (std::size_t j = 0; j < hidden; ++j) {
        const Real r = trace.reset[off + j];
        const Real hp = h_prev(row, j);
        da_r(b, j) = d_rh(b, j) * hp * r * (1 - r);
        reset_h(row, j) = r * hp;
        da(row, j) = da_z(b, j);
        da(row, hidden + j) = da_r(b, j);
        da(row, 2 * hidden + j) = da_h(b, j);
        carry(b, j) = direct(b, j) + d_rh(b, j) * r;
      }
    }
    carry.noalias() += da_z * u_z;
    carry.noalias() += da_r * u_r;
  }

  GruGrads g;
  g.input = Tensor(sequence.shape());
  g.input_weights = Tensor(params.input_weights.shape());
  g.recurrent_weights = Tensor(params.recurrent_weights.shape());
  g.bias = Tensor(params.bias.shape());

  ConstMapRM x(sequence.raw(), rows, in_size);
  ConstMapRM w(params.input_weights.raw(), 3 * hidden, in_size);
  MapRM(g.input.raw(), rows, in_size).noalias() = da * w;
  MapRM(g.input_weights.raw(), 3 * hidden, in_size).noalias() = da.transpose() * x;
  MapRM(g.recurrent_weights.raw(), hidden, hidden).noalias() =
      da.middleCols(0, hidden).transpose() * h_prev;
  MapRM(g.recurrent_weights.raw() + hidden * hidden, hidden, hidden).noalias() =
      da.middleCols(hidden, hidden).transpose() * h_prev;
  MapRM(g.recurrent_weights.raw() + 2 * hidden * hidden, hidden, hidden).noalias() =
      da.middleCols(2 * hidden, hidden).transpose() * reset_h;
  for (std::size_t j = 0; j < 3 * hidden; ++j) g.bias[j] = da.col(j).sum();
  return g;
}

Tensor gru_forward(const Tensor& sequence, const GruParams& params, const Tensor& h0) {
  Batched in(sequence, 3, "gru_forward");
  return in.restore(gru_forward_trace(in.get(), params, h0).output);
}

// ---------------------------------------------------------------------------
// Frame-shared classifier.

Tensor affine_frames(const Tensor& features, const Tensor& weight, const Tensor& bias) {
  Batched in(features, 3, "affine_frames");
  const Tensor& x = in.get();
  if (weight.rank() != 2 || x.dim(2) != weight.dim(1)) {
    throw SizeError("classifier expects " + std::to_string(weight.rank() == 2 ? weight.dim(1) : 0) +
                    " input features, got " + std::to_string(x.dim(2)));
  }
  if (bias.size() != weight.dim(0)) throw SizeError("classifier bias length must equal C");
  const std::size_t rows = x.dim(0) * x.dim(1), classes = weight.dim(0);
  Tensor out({x.dim(0), x.dim(1), classes});
  MapRM y(out.raw(), rows, classes);
  y.noalias() = ConstMapRM(x.raw(), rows, x.dim(2)) * ConstMapRM(weight.raw(), classes, weight.dim(1)).transpose();
  for (std::size_t c = 0; c < classes; ++c) y.col(c).array() += bias[c];
  return in.restore(std::move(out));
}

AffineGrads affine_backward(const Tensor& features, const Tensor& weight, const Tensor& grad_output) {
  const std::size_t in_size = features.dim(features.rank() - 1);
  const std::size_t rows = features.size() / in_size, classes = weight.dim(0);
  AffineGrads g;
  g.input = Tensor(features.shape());
  g.weight = Tensor(weight.shape());
  g.bias = Tensor({classes});
  ConstMapRM dy(grad_output.raw(), rows, classes);
  MapRM(g.input.raw(), rows, in_size).noalias() = dy * ConstMapRM(weight.raw(), classes, in_size);
  MapRM(g.weight.raw(), classes, in_size).noalias() = dy.transpose() * ConstMapRM(features.raw(), rows, in_size);
  for (std::size_t c = 0; c < classes; ++c) g.bias[c] = dy.col(c).sum();
  return g;
}

Tensor classify(const Tensor& features, const AffineClassifier& params) {
  return activation(Activation::kSigmoid, affine_frames(features, params.weight, params.bias));
}

}  // namespace sedconv::nn
