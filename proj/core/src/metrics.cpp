// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace sedconv {

Tensor binarize(const Tensor& probabilities, Real threshold) {
  Tensor out(probabilities.shape());
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const Real p = probabilities[i];
    if (!(p >= 0 && p <= 1)) throw std::domain_error("binarize: probability outside [0, 1]");
    out[i] = p > threshold ? 1 : 0;
  }
  return out;
}

namespace {

std::size_t class_count(const Tensor& t) {
  if (t.rank() != 2 && t.rank() != 3) throw SizeError("expected [T, C] or [B, T, C], got " + shape_string(t.shape()));
  return t.dim(t.rank() - 1);
}

}  // namespace

FrameStats frame_stats(const Tensor& pred, const Tensor& ref) {
  if (pred.shape() != ref.shape()) {
    throw SizeError("prediction " + shape_string(pred.shape()) + " and reference " + shape_string(ref.shape()) +
                    " differ in shape");
  }
  const std::size_t C = class_count(ref);
  const std::size_t frames = ref.size() / C;
  FrameStats s;
  s.tp.assign(frames, 0);
  s.fp.assign(frames, 0);
  s.fn.assign(frames, 0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      const Real p = pred[t * C + c];
      const Real r = ref[t * C + c];
      if ((p != 0 && p != 1) || (r != 0 && r != 1)) throw std::domain_error("metrics expect binary matrices");
      if (p == 1 && r == 1) ++s.tp[t];
      if (p == 1 && r == 0) ++s.fp[t];
      if (p == 0 && r == 1) ++s.fn[t];
    }
    s.true_positives += s.tp[t];
    s.false_positives += s.fp[t];
    s.false_negatives += s.fn[t];
    s.substitutions += std::min(s.fn[t], s.fp[t]);
    if (s.fn[t] > s.fp[t]) s.deletions += s.fn[t] - s.fp[t];
    if (s.fp[t] > s.fn[t]) s.insertions += s.fp[t] - s.fn[t];
  }
  s.reference_active = s.true_positives + s.false_negatives;
  return s;
}

double f1_score(const FrameStats& s) {
  const auto denom = 2 * s.true_positives + s.false_positives + s.false_negatives;
  if (denom == 0) return 1.0;
  return 2.0 * static_cast<double>(s.true_positives) / static_cast<double>(denom);
}

double f1_score(const Tensor& pred, const Tensor& ref) { return f1_score(frame_stats(pred, ref)); }

std::optional<double> error_rate(const FrameStats& s) {
  if (s.reference_active == 0) return std::nullopt;
  return static_cast<double>(s.substitutions + s.deletions + s.insertions) / static_cast<double>(s.reference_active);
}

std::optional<double> error_rate(const Tensor& pred, const Tensor& ref) { return error_rate(frame_stats(pred, ref)); }

Scores evaluate(const std::vector<Tensor>& preds, const std::vector<Tensor>& refs, Averaging averaging) {
  if (preds.size() != refs.size()) throw SizeError("evaluate: prediction and reference counts differ");
  if (preds.empty()) throw SizeError("evaluate: no sequences");
  Scores out;
  if (averaging == Averaging::kMicro) {
    FrameStats total;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const auto s = frame_stats(preds[i], refs[i]);
      total.true_positives += s.true_positives;
      total.false_positives += s.false_positives;
      total.false_negatives += s.false_negatives;
      total.reference_active += s.reference_active;
      total.substitutions += s.substitutions;
      total.deletions += s.deletions;
      total.insertions += s.insertions;
    }
    out.f1 = f1_score(total);
    out.error_rate = error_rate(total);
    return out;
  }
  double f1 = 0, er = 0;
  std::size_t er_count = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto s = frame_stats(preds[i], refs[i]);
    f1 += f1_score(s);
    if (auto e = error_rate(s)) {
      er += *e;
      ++er_count;
    }
  }
  out.f1 = f1 / static_cast<double>(preds.size());
  if (er_count) out.error_rate = er / static_cast<double>(er_count);
  return out;
}

}  // namespace sedconv
