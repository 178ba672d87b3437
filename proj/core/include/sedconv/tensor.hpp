// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SEDCONV_TENSOR_HPP_
#define SEDCONV_TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sedconv {

#ifdef SEDCONV_SINGLE_PRECISION
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

/// Raised when operand shapes are incompatible with an operation.
class SizeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major N-dimensional array.
///
/// Values are owned and copied on assignment. Operations in this library
/// return fresh tensors; only functions documented as in-place mutate.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real{0});
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, Real value) { return Tensor(std::move(shape), value); }
  static Tensor from(std::initializer_list<Real> values);
  static Tensor scalar(Real value) { return Tensor(Shape{1}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  /// Multi-index access with bounds checking.
  Real& at(std::initializer_list<std::size_t> index);
  Real at(std::initializer_list<std::size_t> index) const;

  /// Value of a one-element tensor.
  Real item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool flag) { requires_grad_ = flag; }

  bool all_finite() const;

  /// Exact equality of shape and every stored value.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<Real> data_;
  bool requires_grad_ = false;
};

/// Reinterprets the row-major data under a new shape of equal size.
Tensor reshape(const Tensor& t, Shape new_shape);

/// General axis permutation; `axes[i]` is the source axis of output axis i.
Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes);

/// Turns a channel-major feature map [K, T, W] into a time-major matrix
/// [T, K*W], so row t holds every channel's features for frame t. A leading
/// batch axis ([B, K, T, W] -> [B, T, K*W]) is carried through.
Tensor channels_to_frames(const Tensor& t);

enum class Elementwise { kAdd, kSub, kMul, kScale };

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b);
Tensor elementwise(Elementwise op, const Tensor& a, Real b);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kAdd, a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kSub, a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return elementwise(Elementwise::kMul, a, b); }
inline Tensor operator*(const Tensor& a, Real s) { return elementwise(Elementwise::kScale, a, s); }

/// In-place `dst += src`; shapes must match.
void add_inplace(Tensor& dst, const Tensor& src);

Real sum(const Tensor& t);
Real max_abs(const Tensor& t);

/// Keeps freed heap memory inside the process instead of returning it to the
/// kernel, so the large per-step buffers reuse already mapped pages. Call once
/// from main(); a no-op where the allocator has no such knob.
void retain_freed_memory();

}  // namespace sedconv

#endif  // SEDCONV_TENSOR_HPP_
