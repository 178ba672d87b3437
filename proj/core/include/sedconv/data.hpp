// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic polyphonic event mixtures, the SEDFEAT1 feature file format and
// fixed-length sequence chunking.

#ifndef SEDCONV_DATA_HPP_
#define SEDCONV_DATA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "sedconv/io.hpp"
#include "sedconv/kv_config.hpp"
#include "sedconv/tensor.hpp"

namespace sedconv {

struct SequenceSample {
  Tensor features;  // [T, N]
  Tensor targets;   // [T, C], entries 0 or 1
  std::uint32_t mixture = 0;  // source mixture id; not stored in SEDFEAT1
};

enum class Partition { kTrain, kValidation, kTest };
std::string partition_name(Partition p);

struct DatasetSplit {
  Partition partition = Partition::kTrain;
  std::vector<SequenceSample> samples;
};

struct Dataset {
  DatasetSplit train{Partition::kTrain, {}};
  DatasetSplit validation{Partition::kValidation, {}};
  DatasetSplit test{Partition::kTest, {}};
};

struct SynthConfig {
  std::size_t mixtures = 20;
  std::size_t mixture_frames = 2048;
  std::size_t frames = 1024;  // T of each emitted sequence
  double overlap = 0.5;
  std::size_t features = 40;
  std::size_t classes = 16;
  std::size_t max_polyphony = 5;
  double mean_gap = 96;  // frames between the end of one event and the next onset, per class
  std::size_t min_duration = 24;
  std::size_t max_duration = 160;
  double noise = 0.1;  // std of the additive Gaussian noise
  std::uint64_t seed = 0;

  KeyValueConfig to_kv() const;
  static SynthConfig from_kv(const KeyValueConfig& kv);
};

/// Spectral template of each class: [C, N], one Gaussian bump per class
/// along the feature axis.
Tensor class_prototypes(std::size_t classes, std::size_t features);

/// Mixtures are split 60/20/20 (validation and test get max(1, floor(n/5))
/// mixtures each) before chunking, so no mixture spans two splits. Throws
/// ConfigError for fewer than 5 mixtures or an infeasible polyphony setting.
Dataset synthesize_dataset(const SynthConfig& config);

struct ChunkOptions {
  std::size_t frames = 1024;
  double overlap = 0.5;
  /// Shorter sources yield no chunks and a warning unless this is set.
  bool error_on_short = false;
};

/// Windows start every floor(T * (1 - overlap)) frames; a trailing partial
/// window is dropped.
std::vector<SequenceSample> chunk_sequences(const Tensor& features, const Tensor& targets,
                                            const ChunkOptions& options = {}, std::uint32_t mixture = 0,
                                            std::vector<std::string>* warnings = nullptr);

/// Writes "SEDFEAT1", u32 (samples, T, N, C), then per sample T*N float32
/// features and T*C target bytes. All samples must share T, N and C.
std::vector<char> encode_features(const std::vector<SequenceSample>& samples);
std::vector<SequenceSample> decode_features(const std::vector<char>& bytes);

void save_features(const std::string& path, const std::vector<SequenceSample>& samples);
std::vector<SequenceSample> load_features(const std::string& path);

/// Stacks samples [T, N] into a batch [B, T, N] (and targets alike).
Tensor stack_features(const std::vector<SequenceSample>& samples, const std::vector<std::size_t>& index);
Tensor stack_targets(const std::vector<SequenceSample>& samples, const std::vector<std::size_t>& index);

}  // namespace sedconv

#endif  // SEDCONV_DATA_HPP_
