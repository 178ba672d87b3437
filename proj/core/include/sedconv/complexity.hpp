// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SEDCONV_COMPLEXITY_HPP_
#define SEDCONV_COMPLEXITY_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sedconv/model.hpp"

namespace sedconv {

struct LayerComplexity {
  std::string name;
  std::uint64_t parameters = 0;
  std::uint64_t macs = 0;
};

struct ComplexityReport {
  std::vector<LayerComplexity> layers;  // layers without parameters or MACs are omitted
  std::uint64_t total_parameters = 0;
  std::uint64_t total_macs = 0;
};

/// With include_bias = false only kernel/weight tensors are counted: biases
/// and batch-norm scale/shift are left out.
ComplexityReport count_parameters(const Model& model, bool include_bias = true);

/// MACs for one sequence of `input_shape` = [T, N]; parameter counts are
/// filled in as well (biases included).
ComplexityReport count_macs(const Model& model, const Shape& input_shape);

// Closed forms, bias omitted.
std::uint64_t dense_conv_parameters(std::uint64_t k_in, std::uint64_t k_out, std::uint64_t k_h, std::uint64_t k_w);
std::uint64_t dws_conv_parameters(std::uint64_t k_in, std::uint64_t k_out, std::uint64_t k_h, std::uint64_t k_w);

}  // namespace sedconv

#endif  // SEDCONV_COMPLEXITY_HPP_
