// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace sedconv {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw SizeError("tensor dimensions must be positive, got " + shape_string(shape));
  }
}

}  // namespace

Tensor::Tensor(Shape shape, Real fill) : shape_(std::move(shape)) {
  check_dims(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_dims(shape_);
  if (data_.size() != shape_size(shape_)) {
    throw SizeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                    shape_string(shape_));
  }
}

Tensor Tensor::from(std::initializer_list<Real> values) {
  return Tensor(Shape{values.size()}, std::vector<Real>(values));
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.size()) {
    throw SizeError("index rank " + std::to_string(index.size()) + " for tensor of shape " +
                    shape_string(shape_));
  }
  std::size_t off = 0;
  std::size_t axis = 0;
  for (auto i : index) {
    if (i >= shape_[axis]) throw std::out_of_range("index out of range for " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

Real& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }
Real Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }

Real Tensor::item() const {
  if (data_.size() != 1) throw SizeError("item() on tensor of shape " + shape_string(shape_));
  return data_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Tensor reshape(const Tensor& t, Shape new_shape) {
  if (shape_size(new_shape) != t.size()) {
    throw SizeError("cannot reshape " + shape_string(t.shape()) + " to " + shape_string(new_shape));
  }
  auto data = t.data();
  return Tensor(std::move(new_shape), std::vector<Real>(data.begin(), data.end()));
}

Tensor permute(const Tensor& t, const std::vector<std::size_t>& axes) {
  const auto rank = t.rank();
  if (axes.size() != rank) throw SizeError("permute: axis list does not match rank");
  std::vector<bool> seen(rank, false);
  for (auto a : axes) {
    if (a >= rank || seen[a]) throw SizeError("permute: axes are not a permutation");
    seen[a] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = t.dim(axes[i]);

  std::vector<std::size_t> src_stride(rank, 1);
  for (std::size_t i = rank; i-- > 1;) src_stride[i - 1] = src_stride[i] * t.dim(i);

  Tensor out(out_shape);
  std::vector<std::size_t> idx(rank, 0);
  const auto* src = t.raw();
  auto* dst = out.raw();
  for (std::size_t n = 0; n < out.size(); ++n) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < rank; ++i) off += idx[i] * src_stride[axes[i]];
    dst[n] = src[off];
    for (std::size_t i = rank; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

Tensor channels_to_frames(const Tensor& t) {
  if (t.rank() == 3) {
    auto p = permute(t, {1, 0, 2});
    return reshape(p, {t.dim(1), t.dim(0) * t.dim(2)});
  }
  if (t.rank() == 4) {
    auto p = permute(t, {0, 2, 1, 3});
    return reshape(p, {t.dim(0), t.dim(2), t.dim(1) * t.dim(3)});
  }
  throw SizeError("channels_to_frames expects [K,T,W] or [B,K,T,W], got " + shape_string(t.shape()));
}

namespace {

Real apply(Elementwise op, Real a, Real b) {
  switch (op) {
    case Elementwise::kAdd: return a + b;
    case Elementwise::kSub: return a - b;
    case Elementwise::kMul:
    case Elementwise::kScale: return a * b;
  }
  return a;
}

}  // namespace

Tensor elementwise(Elementwise op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw SizeError("elementwise shape mismatch: " + shape_string(a.shape()) + " vs " +
                    shape_string(b.shape()));
  }
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b[i]);
  return out;
}

Tensor elementwise(Elementwise op, const Tensor& a, Real b) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = apply(op, a[i], b);
  return out;
}

void add_inplace(Tensor& dst, const Tensor& src) {
  if (dst.shape() != src.shape()) {
    throw SizeError("add_inplace shape mismatch: " + shape_string(dst.shape()) + " vs " +
                    shape_string(src.shape()));
  }
  auto* d = dst.raw();
  const auto* s = src.raw();
  for (std::size_t i = 0; i < dst.size(); ++i) d[i] += s[i];
}

Real sum(const Tensor& t) {
  Real acc = 0;
  for (auto v : t.data()) acc += v;
  return acc;
}

Real max_abs(const Tensor& t) {
  Real m = 0;
  for (auto v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

void retain_freed_memory() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_MAX, 0);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
}

}  // namespace sedconv
