// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/complexity.hpp"

namespace sedconv {

ComplexityReport count_parameters(const Model& model, bool include_bias) {
  ComplexityReport r;
  for (const auto& l : model.layers()) {
    const auto n = l->parameter_count(include_bias);
    if (n == 0) continue;
    r.layers.push_back({l->name(), n, 0});
    r.total_parameters += n;
  }
  return r;
}

ComplexityReport count_macs(const Model& model, const Shape& input_shape) {
  ComplexityReport r;
  Shape shape = input_shape;
  for (const auto& l : model.layers()) {
    const auto macs = l->macs(shape);
    const auto params = l->parameter_count(true);
    shape = l->output_shape(shape);
    if (macs == 0 && params == 0) continue;
    r.layers.push_back({l->name(), params, macs});
    r.total_parameters += params;
    r.total_macs += macs;
  }
  return r;
}

std::uint64_t dense_conv_parameters(std::uint64_t k_in, std::uint64_t k_out, std::uint64_t k_h, std::uint64_t k_w) {
  return k_in * k_out * k_h * k_w;
}

std::uint64_t dws_conv_parameters(std::uint64_t k_in, std::uint64_t k_out, std::uint64_t k_h, std::uint64_t k_w) {
  return k_in * k_h * k_w + k_in * k_out;
}

}  // namespace sedconv
