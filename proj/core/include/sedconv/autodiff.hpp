// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over the layer kernels in ops.hpp.
//
//   Tape tape;
//   Var w = tape.leaf("w", weights);
//   Var x = tape.constant(input);
//   Var loss = ad::sum(ad::conv2d(x, w, {}, {1, 1}, {0, 0}));
//   GradientSet grads = ad::backward(tape, loss);
//
// Each operation appends one node to the tape. Backward walks the tape in
// reverse recording order, so gradient accumulation order is fixed.

#ifndef SEDCONV_AUTODIFF_HPP_
#define SEDCONV_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "sedconv/ops.hpp"
#include "sedconv/tensor.hpp"

namespace sedconv::ad {

class Tape;

/// Receives the gradient of the node's output and returns one gradient per
/// parent (an empty tensor where `needs_grad[i]` is false).
using BackwardFn = std::function<std::vector<Tensor>(const Tensor& grad, const std::vector<bool>& needs_grad)>;

struct Node {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::string name;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;
  const Tape* tape = nullptr;
};

/// Handle to a value recorded on a tape. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  bool defined() const { return node_ != nullptr; }
  const Tensor& value() const { return node_->value; }
  const Shape& shape() const { return node_->value.shape(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }
  Tape& tape() const;

 private:
  std::shared_ptr<Node> node_;
};

/// The computation record. Single writer; not thread-safe.
class Tape {
 public:
  /// A non-recording tape evaluates values only and keeps no history.
  explicit Tape(bool recording = true) : recording_(recording) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return recording_; }

  /// Named input. Leaves with requires_grad receive an entry in the
  /// GradientSet produced by backward().
  Var leaf(std::string name, Tensor value, bool requires_grad = true);
  Var constant(Tensor value);

  /// Appends the result of an operation. When no parent requires a
  /// gradient (or the tape is not recording) the closure is dropped.
  Var record(Tensor value, std::vector<Var> parents, BackwardFn backward);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::shared_ptr<Node>>& nodes() const { return nodes_; }
  const std::vector<std::shared_ptr<Node>>& leaves() const { return leaves_; }

 private:
  bool recording_;
  std::vector<std::shared_ptr<Node>> nodes_;
  std::vector<std::shared_ptr<Node>> leaves_;
};

/// Gradient per named leaf, in leaf-creation order.
class GradientSet {
 public:
  void add(std::string name, Tensor grad);
  bool contains(const std::string& name) const;
  const Tensor& at(const std::string& name) const;
  std::size_t size() const { return entries_.size(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Propagates d(loss)/d(node) through the tape. The loss must be a
/// one-element tensor recorded on `tape` and connected to at least one leaf
/// requiring a gradient. Saved intermediates are released as the walk
/// proceeds, so a tape can be differentiated once.
GradientSet backward(Tape& tape, const Var& loss);

// ---------------------------------------------------------------------------
// Differentiable operations. An undefined Var stands for "no bias".

Var conv2d(const Var& x, const Var& weights, const Var& bias, nn::Extent2 stride, nn::Extent2 padding,
           bool true_convolution = false);
Var dilated_conv2d(const Var& x, const Var& weights, const Var& bias, nn::Extent2 dilation,
                   nn::Extent2 padding);
Var depthwise_conv(const Var& x, const Var& spatial, const Var& bias, nn::Extent2 stride,
                   nn::Extent2 padding);
Var pointwise_conv(const Var& x, const Var& weights, const Var& bias);
Var maxpool2d(const Var& x, nn::Extent2 pool);

/// gamma/beta come from the Vars; running statistics and hyperparameters
/// from `state`, whose running statistics are updated in train mode.
Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, nn::BatchNormParams& state, nn::Mode mode);

Var activation(nn::Activation kind, const Var& x);
inline Var relu(const Var& x) { return activation(nn::Activation::kRelu, x); }
inline Var sigmoid(const Var& x) { return activation(nn::Activation::kSigmoid, x); }
inline Var tanh(const Var& x) { return activation(nn::Activation::kTanh, x); }

Var dropout(const Var& x, Real p, nn::Mode mode, nn::Rng& rng);

/// Batched GRU over [B, T, H_in] with a zero initial state.
Var gru(const Var& sequence, const Var& input_weights, const Var& recurrent_weights, const Var& bias);

Var affine_frames(const Var& x, const Var& weight, const Var& bias);

Var reshape(const Var& x, Shape shape);
Var channels_to_frames(const Var& x);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, Real s);
Var sum(const Var& a);
Var mean(const Var& a);

// ---------------------------------------------------------------------------
// Finite-difference verification.

class NonDeterministicError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Builds a scalar from leaves created in `params` order.
using ScalarFunction = std::function<Var(Tape& tape, const std::vector<Var>& params)>;

struct GradCheckOptions {
  Real step = Real(1e-6);
  /// Lower bound of the relative-error denominator.
  Real floor = Real(1e-12);
  /// 0 checks every entry; otherwise a seeded random subset per parameter.
  std::size_t max_entries_per_param = 0;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0;
  double numeric = 0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences
/// (f(p + h) - f(p - h)) / 2h for each checked entry, using
/// |analytic - numeric| / max(|analytic|, |numeric|, floor).
/// Throws NonDeterministicError if two evaluations at the same point differ.
GradCheckReport finite_difference_check(const ScalarFunction& f, const std::vector<NamedTensor>& params,
                                        const GradCheckOptions& options = {});

}  // namespace sedconv::ad

#endif  // SEDCONV_AUTODIFF_HPP_
