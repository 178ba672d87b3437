// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Loss, optimizer, early stopping, the training loop and repeated-run
// aggregation over a grid of model configurations.

#ifndef SEDCONV_TRAINING_HPP_
#define SEDCONV_TRAINING_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sedconv/autodiff.hpp"
#include "sedconv/data.hpp"
#include "sedconv/metrics.hpp"
#include "sedconv/model.hpp"

namespace sedconv {

/// A loss or parameter became NaN or infinite.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Empty or inconsistent training material.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  std::size_t batch_size = 16;
  AdamConfig adam;
  std::size_t patience = 30;
  std::size_t max_epochs = 200;
  std::uint64_t seed = 0;
  std::size_t repetitions = 10;

  void validate() const;
  KeyValueConfig to_kv() const;
  static TrainConfig from_kv(const KeyValueConfig& kv);
};

inline constexpr Real kBceEpsilon = Real(1e-12);

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
double bce_loss(const Tensor& pred, const Tensor& target, Real epsilon = kBceEpsilon);
ad::Var bce_loss(const ad::Var& pred, const Tensor& target, Real epsilon = kBceEpsilon);

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of every tensor in `params`, in place.
/// Moments are created on the first call.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads, AdamState& state,
               const AdamConfig& config);

/// Patience counter over validation losses; improvement means a strict
/// decrease of the best loss so far.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  /// Returns true if `loss` is a new best.
  bool observe(double loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t epochs() const { return epochs_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any epoch
  double best_loss() const { return best_; }
  std::size_t stale_epochs() const { return stale_; }

 private:
  std::size_t patience_;
  std::size_t epochs_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_;
};

struct EpochRecord {
  std::size_t index = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
  double seconds = 0;
};

struct RunRecord {
  std::string label;
  std::uint64_t seed = 0;
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_loss = 0;
  std::optional<double> test_f1;
  std::optional<double> test_er;

  double mean_epoch_seconds() const;
  /// '#'-prefixed header lines, then "index train_loss val_loss seconds" per epoch.
  std::string to_text() const;
  static RunRecord from_text(std::string_view text);
};

struct FitHooks {
  /// Replaces the computed validation loss, e.g. with a scripted sequence.
  std::function<double(std::size_t epoch, double computed)> validation_loss;
  /// Called whenever an epoch sets a new best validation loss.
  std::function<void(std::size_t epoch, Model& model)> on_new_best;
  std::function<void(const EpochRecord& epoch)> on_epoch_end;
};

/// Trains on `data.train` with seeded shuffling and stops after `patience`
/// non-improving epochs or `max_epochs`. The model is left holding the
/// parameters and batch-norm statistics of the best epoch.
RunRecord fit(Model& model, const Dataset& data, const TrainConfig& config, const FitHooks& hooks = {});

/// Eval-mode mean loss over `samples`.
double evaluate_loss(Model& model, const std::vector<SequenceSample>& samples, std::size_t batch_size = 16);

/// Eval-mode predictions binarized at 0.5 and scored against the targets.
Scores evaluate_split(Model& model, const std::vector<SequenceSample>& samples, std::size_t batch_size = 16,
                      Averaging averaging = Averaging::kMicro);

// ---------------------------------------------------------------------------
// Grids and aggregation

struct GridPoint {
  ModelConfig model;
};

/// Rows in table order: base, dil (kernel-major), dws, dnd. Kernels and
/// dilations only expand the dilated variants. Configurations are copied
/// from `base_config` with variant/kernel/dilation replaced.
std::vector<GridPoint> make_grid(const ModelConfig& base_config, const std::vector<Variant>& variants,
                                 const std::vector<std::size_t>& kernels, const std::vector<std::size_t>& dilations);
/// All four variants over kernels {3,5,7} and dilations {1,10,50,100}.
std::vector<GridPoint> full_grid(const ModelConfig& base_config);

/// Published parameter count for a full-size configuration, if any.
std::optional<double> reference_parameter_count(const ModelConfig& config);

struct MeanStd {
  double mean = 0;
  double std = 0;  // population standard deviation
};
MeanStd mean_std(const std::vector<double>& values);

struct AggregateRow {
  std::string label;
  Variant variant = Variant::kBase;
  bool dws = false;
  std::optional<std::size_t> dilation;
  std::optional<std::size_t> kernel;
  MeanStd f1, er, epoch_seconds;
  std::uint64_t parameters = 0;
  std::size_t repetitions = 0;
  bool failed = false;
  std::string error;
};

struct ExperimentHooks {
  /// Seeds per repetition; empty means config.seed + r.
  std::vector<std::uint64_t> seeds;
  std::function<void(const GridPoint&, std::size_t repetition, const RunRecord&, Model&)> on_run_end;
  FitHooks fit;
};

/// Trains every grid point `config.repetitions` times. A point whose build
/// or training throws becomes a failed row; the remaining points still run.
/// Throws ConfigError for an empty grid.
std::vector<AggregateRow> repeat_experiment(const std::vector<GridPoint>& grid, const Dataset& data,
                                            const TrainConfig& config, const ExperimentHooks& hooks = {});

std::string format_table_text(const std::vector<AggregateRow>& rows);
std::string format_table_csv(const std::vector<AggregateRow>& rows);

}  // namespace sedconv

#endif  // SEDCONV_TRAINING_HPP_
