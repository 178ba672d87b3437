// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Frame-based F1 and error rate for multi-label activity matrices. Inputs
// are [T, C] or [B, T, C]; a batch axis is treated as more frames.

#ifndef SEDCONV_METRICS_HPP_
#define SEDCONV_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "sedconv/tensor.hpp"

namespace sedconv {

/// 1 where p > threshold, else 0. Throws std::domain_error for values
/// outside [0, 1].
Tensor binarize(const Tensor& probabilities, Real threshold = Real(0.5));

struct FrameStats {
  std::vector<std::uint32_t> tp, fp, fn;  // per frame
  std::uint64_t true_positives = 0;
  std::uint64_t false_positives = 0;
  std::uint64_t false_negatives = 0;
  std::uint64_t reference_active = 0;  // N_ref
  std::uint64_t substitutions = 0;
  std::uint64_t deletions = 0;
  std::uint64_t insertions = 0;
};

/// Both inputs must be binary and of equal shape.
FrameStats frame_stats(const Tensor& pred, const Tensor& ref);

/// 2TP / (2TP + FP + FN); 1 when neither input has an active entry.
double f1_score(const FrameStats& s);
double f1_score(const Tensor& pred, const Tensor& ref);

/// (S + D + I) / N_ref with per-frame S = min(FN, FP), D = max(0, FN - FP),
/// I = max(0, FP - FN). Empty when the reference has no active entry.
std::optional<double> error_rate(const FrameStats& s);
std::optional<double> error_rate(const Tensor& pred, const Tensor& ref);

enum class Averaging { kMicro, kMacro };

struct Scores {
  double f1 = 0;
  std::optional<double> error_rate;
};

/// Micro: counts pooled over every sequence. Macro: per-sequence scores
/// averaged, skipping sequences without reference activity for ER.
Scores evaluate(const std::vector<Tensor>& preds, const std::vector<Tensor>& refs,
                Averaging averaging = Averaging::kMicro);

}  // namespace sedconv

#endif  // SEDCONV_METRICS_HPP_
