// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint layout (little-endian):
//   "SEDCKPT1"  u32 version  u32 config_bytes  config text (key = value lines)
//   u32 records, then per record:
//     u32 name_bytes  name  u32 rank  u64 dims[rank]  f64 values[prod(dims)]
// Records hold the trainable parameters followed by batch-norm running
// statistics, in model order.

#ifndef SEDCONV_CHECKPOINT_HPP_
#define SEDCONV_CHECKPOINT_HPP_

#include <string>
#include <vector>

#include "sedconv/model.hpp"

namespace sedconv {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  ModelState state;
};

std::vector<char> encode_checkpoint(const ModelConfig& config, const ModelState& state);
/// Throws ParseError on malformed input.
Checkpoint decode_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const std::string& path, Model& model);
Checkpoint load_checkpoint(const std::string& path);
/// Builds the configured model and loads the saved tensors into it.
Model restore_model(const Checkpoint& checkpoint);

}  // namespace sedconv

#endif  // SEDCONV_CHECKPOINT_HPP_
