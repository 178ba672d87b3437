// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

namespace sedconv::ad {

Tape& Var::tape() const {
  if (!node_ || !node_->tape) throw std::logic_error("Var is not attached to a tape");
  return const_cast<Tape&>(*node_->tape);
}

Var Tape::leaf(std::string name, Tensor value, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->value.set_requires_grad(requires_grad);
  node->requires_grad = requires_grad && recording_;
  node->name = std::move(name);
  node->tape = this;
  if (recording_) {
    nodes_.push_back(node);
    if (node->requires_grad) leaves_.push_back(node);
  }
  return Var(std::move(node));
}

Var Tape::constant(Tensor value) { return leaf("", std::move(value), false); }

Var Tape::record(Tensor value, std::vector<Var> parents, BackwardFn backward) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  node->tape = this;
  const bool needs = recording_ && std::any_of(parents.begin(), parents.end(),
                                               [](const Var& p) { return p.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward = std::move(backward);
    nodes_.push_back(node);
  }
  node->value.set_requires_grad(needs);
  return Var(std::move(node));
}

void GradientSet::add(std::string name, Tensor grad) { entries_.emplace_back(std::move(name), std::move(grad)); }

bool GradientSet::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

const Tensor& GradientSet::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw std::out_of_range("no gradient recorded for '" + name + "'");
}

GradientSet backward(Tape& tape, const Var& loss) {
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss");
  if (loss.value().size() != 1) {
    throw SizeError("backward: loss must be a scalar, got shape " + shape_string(loss.shape()));
  }
  if (loss.node()->tape != &tape || !tape.recording()) {
    throw std::logic_error("backward: loss was not recorded on this tape");
  }
  if (!loss.requires_grad()) {
    throw std::logic_error("backward: loss is detached from every differentiable leaf");
  }

  loss.node()->grad = Tensor(loss.shape(), 1);
  const auto& nodes = tape.nodes();
  for (std::size_t i = nodes.size(); i-- > 0;) {
    Node& n = *nodes[i];
    if (!n.backward) continue;
    if (!n.grad.empty()) {
      std::vector<bool> needs(n.parents.size());
      for (std::size_t k = 0; k < n.parents.size(); ++k) needs[k] = n.parents[k] && n.parents[k]->requires_grad;
      auto grads = n.backward(n.grad, needs);
      for (std::size_t k = 0; k < n.parents.size(); ++k) {
        if (!needs[k] || k >= grads.size() || grads[k].empty()) continue;
        Node& p = *n.parents[k];
        if (p.grad.empty()) {
          p.grad = std::move(grads[k]);
        } else {
          add_inplace(p.grad, grads[k]);
        }
      }
    }
    // Release saved state; interior grads are no longer needed either.
    n.backward = nullptr;
    n.parents.clear();
    n.grad = Tensor();
  }

  GradientSet out;
  for (const auto& leaf : tape.leaves()) {
    out.add(leaf->name, leaf->grad.empty() ? Tensor(leaf->value.shape()) : leaf->grad);
  }
  return out;
}

namespace {

const Tensor& value_or_empty(const Var& v) {
  static const Tensor kEmpty;
  return v.defined() ? v.value() : kEmpty;
}

Var conv_like(const Var& x, const Tensor& w_eff, const Var& weights, const Var& bias,
              const nn::ConvGeometry& geom, bool flipped) {
  if (x.value().rank() != 4) throw SizeError("conv: differentiable ops expect batched [B,C,H,W] input");
  Tensor out = nn::conv_forward(x.value(), w_eff, value_or_empty(bias), geom);
  Tape& tape = x.tape();
  // Undefined bias Vars stay in the parent list so gradient slots line up.
  const bool has_bias = bias.defined();
  auto xn = x.node();
  return tape.record(std::move(out), {x, weights, bias},
                     [xn, w_eff, has_bias, geom, flipped](const Tensor& g, const std::vector<bool>& needs) {
                       auto grads = nn::conv_backward(xn->value, w_eff, has_bias, g, geom, needs[0]);
                       if (flipped) grads.weights = nn::flip_spatial(grads.weights);
                       return std::vector<Tensor>{std::move(grads.input), std::move(grads.weights),
                                                  std::move(grads.bias)};
                     });
}

}  // namespace

Var conv2d(const Var& x, const Var& weights, const Var& bias, nn::Extent2 stride, nn::Extent2 padding,
           bool true_convolution) {
  Tensor w_eff = true_convolution ? nn::flip_spatial(weights.value()) : weights.value();
  return conv_like(x, w_eff, weights, bias, nn::ConvGeometry{stride, padding, {1, 1}}, true_convolution);
}

Var dilated_conv2d(const Var& x, const Var& weights, const Var& bias, nn::Extent2 dilation,
                   nn::Extent2 padding) {
  return conv_like(x, weights.value(), weights, bias, nn::ConvGeometry{{1, 1}, padding, dilation}, false);
}

Var depthwise_conv(const Var& x, const Var& spatial, const Var& bias, nn::Extent2 stride,
                   nn::Extent2 padding) {
  Tensor out = nn::depthwise_forward(x.value(), spatial.value(), value_or_empty(bias), stride, padding);
  const bool has_bias = bias.defined();
  auto xn = x.node();
  auto kn = spatial.node();
  return x.tape().record(std::move(out), {x, spatial, bias},
                         [xn, kn, has_bias, stride, padding](const Tensor& g, const std::vector<bool>&) {
                           auto grads = nn::depthwise_backward(xn->value, kn->value, has_bias, g, stride, padding);
                           return std::vector<Tensor>{std::move(grads.input), std::move(grads.weights),
                                                      std::move(grads.bias)};
                         });
}

Var pointwise_conv(const Var& x, const Var& weights, const Var& bias) {
  if (weights.value().rank() != 2) throw SizeError("pointwise weights must be [K_o, K_i]");
  Tensor w4 = reshape(weights.value(), {weights.value().dim(0), weights.value().dim(1), 1, 1});
  Tensor out = nn::conv_forward(x.value(), w4, value_or_empty(bias), nn::ConvGeometry{});
  const bool has_bias = bias.defined();
  auto xn = x.node();
  const Shape w_shape = weights.shape();
  return x.tape().record(std::move(out), {x, weights, bias},
                         [xn, w4, has_bias, w_shape](const Tensor& g, const std::vector<bool>& needs) {
                           auto grads = nn::conv_backward(xn->value, w4, has_bias, g, nn::ConvGeometry{}, needs[0]);
                           return std::vector<Tensor>{std::move(grads.input), reshape(grads.weights, w_shape),
                                                      std::move(grads.bias)};
                         });
}

Var maxpool2d(const Var& x, nn::Extent2 pool) {
  auto r = nn::maxpool_forward(x.value(), pool);
  const Shape in_shape = x.shape();
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(std::move(r.argmax));
  return x.tape().record(std::move(r.output), {x},
                         [argmax, in_shape](const Tensor& g, const std::vector<bool>&) {
                           return std::vector<Tensor>{nn::maxpool_backward(g, *argmax, in_shape)};
                         });
}

Var batchnorm2d(const Var& x, const Var& gamma, const Var& beta, nn::BatchNormParams& state, nn::Mode mode) {
  auto r = nn::batchnorm_forward(x.value(), gamma.value(), beta.value(), state, mode);
  auto xn = x.node();
  auto gn = gamma.node();
  const Real eps = state.epsilon;
  const bool batch_stats = mode == nn::Mode::kTrain;
  return x.tape().record(std::move(r.output), {x, gamma, beta},
                         [xn, gn, mean = std::move(r.mean), var = std::move(r.var), eps, batch_stats](
                             const Tensor& g, const std::vector<bool>&) {
                           auto grads = nn::batchnorm_backward(xn->value, g, mean, var, gn->value, eps, batch_stats);
                           return std::vector<Tensor>{std::move(grads.input), std::move(grads.gamma),
                                                      std::move(grads.beta)};
                         });
}

Var activation(nn::Activation kind, const Var& x) {
  Tensor out = nn::activation(kind, x.value());
  Tape& tape = x.tape();
  // The closure reads the output through a weak reference to avoid a cycle.
  auto holder = std::make_shared<std::weak_ptr<Node>>();
  Var result = tape.record(std::move(out), {x}, [kind, holder](const Tensor& g, const std::vector<bool>&) {
    auto self = holder->lock();
    return std::vector<Tensor>{nn::activation_backward(kind, self->value, g)};
  });
  *holder = result.node();
  return result;
}

Var dropout(const Var& x, Real p, nn::Mode mode, nn::Rng& rng) {
  auto r = nn::dropout(x.value(), p, mode, rng);
  return x.tape().record(std::move(r.output), {x},
                         [mask = std::move(r.mask)](const Tensor& g, const std::vector<bool>&) {
                           return std::vector<Tensor>{g * mask};
                         });
}

Var gru(const Var& sequence, const Var& input_weights, const Var& recurrent_weights, const Var& bias) {
  nn::GruParams params{input_weights.value(), recurrent_weights.value(), bias.value()};
  auto trace = std::make_shared<nn::GruTrace>(nn::gru_forward_trace(sequence.value(), params));
  Tensor out = trace->output;
  auto sn = sequence.node();
  return sequence.tape().record(
      std::move(out), {sequence, input_weights, recurrent_weights, bias},
      [sn, params = std::move(params), trace](const Tensor& g, const std::vector<bool>&) {
        auto grads = nn::gru_backward(sn->value, params, *trace, g);
        return std::vector<Tensor>{std::move(grads.input), std::move(grads.input_weights),
                                   std::move(grads.recurrent_weights), std::move(grads.bias)};
      });
}

Var affine_frames(const Var& x, const Var& weight, const Var& bias) {
  Tensor out = nn::affine_frames(x.value(), weight.value(), bias.value());
  auto xn = x.node();
  auto wn = weight.node();
  return x.tape().record(std::move(out), {x, weight, bias}, [xn, wn](const Tensor& g, const std::vector<bool>&) {
    auto grads = nn::affine_backward(xn->value, wn->value, g);
    return std::vector<Tensor>{std::move(grads.input), std::move(grads.weight), std::move(grads.bias)};
  });
}

Var reshape(const Var& x, Shape shape) {
  const Shape in_shape = x.shape();
  return x.tape().record(sedconv::reshape(x.value(), std::move(shape)), {x},
                         [in_shape](const Tensor& g, const std::vector<bool>&) {
                           return std::vector<Tensor>{sedconv::reshape(g, in_shape)};
                         });
}

Var channels_to_frames(const Var& x) {
  if (x.value().rank() != 4) throw SizeError("channels_to_frames expects [B,K,T,W]");
  const Shape in_shape = x.shape();
  return x.tape().record(sedconv::channels_to_frames(x.value()), {x},
                         [in_shape](const Tensor& g, const std::vector<bool>&) {
                           // [B,T,K*W] -> [B,T,K,W] -> [B,K,T,W]
                           Tensor g4 = sedconv::reshape(g, {in_shape[0], in_shape[2], in_shape[1], in_shape[3]});
                           return std::vector<Tensor>{permute(g4, {0, 2, 1, 3})};
                         });
}

Var add(const Var& a, const Var& b) {
  return a.tape().record(a.value() + b.value(), {a, b}, [](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g, g};
  });
}

Var sub(const Var& a, const Var& b) {
  return a.tape().record(a.value() - b.value(), {a, b}, [](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g, g * Real(-1)};
  });
}

Var mul(const Var& a, const Var& b) {
  auto an = a.node();
  auto bn = b.node();
  return a.tape().record(a.value() * b.value(), {a, b},
                         [an, bn](const Tensor& g, const std::vector<bool>& needs) {
                           return std::vector<Tensor>{needs[0] ? g * bn->value : Tensor(),
                                                      needs[1] ? g * an->value : Tensor()};
                         });
}

Var scale(const Var& a, Real s) {
  return a.tape().record(a.value() * s, {a}, [s](const Tensor& g, const std::vector<bool>&) {
    return std::vector<Tensor>{g * s};
  });
}

Var sum(const Var& a) {
  const Shape in_shape = a.shape();
  return a.tape().record(Tensor::scalar(sedconv::sum(a.value())), {a},
                         [in_shape](const Tensor& g, const std::vector<bool>&) {
                           return std::vector<Tensor>{Tensor(in_shape, g[0])};
                         });
}

Var mean(const Var& a) { return scale(sum(a), Real(1) / static_cast<Real>(a.value().size())); }

// ---------------------------------------------------------------------------

namespace {

Real evaluate(const ScalarFunction& f, const std::vector<NamedTensor>& params) {
  Tape tape(false);
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.leaf(p.name, p.value, false));
  Var out = f(tape, vars);
  if (out.value().size() != 1) throw SizeError("finite_difference_check: function must return a scalar");
  return out.value()[0];
}

bool same_bits(Real a, Real b) { return std::memcmp(&a, &b, sizeof(Real)) == 0; }

}  // namespace

GradCheckReport finite_difference_check(const ScalarFunction& f, const std::vector<NamedTensor>& params,
                                        const GradCheckOptions& options) {
  const Real base1 = evaluate(f, params);
  const Real base2 = evaluate(f, params);
  if (!same_bits(base1, base2)) {
    throw NonDeterministicError("finite_difference_check: repeated evaluation differs");
  }

  Tape tape;
  std::vector<Var> vars;
  for (const auto& p : params) vars.push_back(tape.leaf(p.name, p.value, true));
  Var loss = f(tape, vars);
  GradientSet analytic;
  if (loss.requires_grad()) {
    analytic = backward(tape, loss);
  } else {
    for (const auto& p : params) analytic.add(p.name, Tensor(p.value.shape()));
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  std::vector<NamedTensor> work = params;
  for (std::size_t pi = 0; pi < work.size(); ++pi) {
    auto& p = work[pi];
    const Tensor& grad = analytic.at(p.name);
    std::vector<std::size_t> indices(p.value.size());
    std::iota(indices.begin(), indices.end(), std::size_t{0});
    if (options.max_entries_per_param && indices.size() > options.max_entries_per_param) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(options.max_entries_per_param);
      std::sort(indices.begin(), indices.end());
    }
    for (auto i : indices) {
      const Real orig = p.value[i];
      p.value[i] = orig + options.step;
      const Real up = evaluate(f, work);
      p.value[i] = orig - options.step;
      const Real down = evaluate(f, work);
      p.value[i] = orig;
      const double numeric = (static_cast<double>(up) - down) / (2.0 * options.step);
      const double a = grad[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), static_cast<double>(options.floor)});
      const double rel = std::abs(a - numeric) / denom;
      ++report.checked;
      if (rel > report.max_relative_error || report.checked == 1) {
        report.max_relative_error = rel;
        report.worst_param = p.name;
        report.worst_index = i;
        report.analytic = a;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace sedconv::ad
