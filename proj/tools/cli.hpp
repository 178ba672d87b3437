// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// The sedconv command line as a library, so tests can drive every command
// without spawning processes.
//
//   sedconv generate-data --mixtures 20 --seed 7 --out data/
//   sedconv train --variant dnd --kernel 7 --dilation 10 --data data/ --out run/
//   sedconv analyze --grid paper --out report/
//   sedconv grid-search --manifest grid.txt

#ifndef SEDCONV_TOOLS_CLI_HPP_
#define SEDCONV_TOOLS_CLI_HPP_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sedconv/kv_config.hpp"
#include "sedconv/model.hpp"

namespace sedconv::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitData = 3,
  kExitNumeric = 4,
};

/// File names inside a generated data directory.
inline constexpr const char* kTrainFile = "train.sedfeat";
inline constexpr const char* kValidationFile = "validation.sedfeat";
inline constexpr const char* kTestFile = "test.sedfeat";
inline constexpr const char* kManifestEcho = "manifest.txt";

/// Keys of `kv` starting with `prefix`, with the prefix removed.
KeyValueConfig section(const KeyValueConfig& kv, const std::string& prefix);

/// Grid description for grid-search (and analyze --grid <file>):
///
///   config    = settings.txt      # optional: model.*, train.*, data.* keys
///   output    = results
///   data      = data              # optional: synthesize from data.* if absent
///   seeds     = 1, 2, 3
///   variants  = base, dws, dil, dnd
///   kernels   = 3, 5, 7
///   dilations = 1, 10, 50, 100
///
/// Relative paths resolve against the manifest's directory.
struct ExperimentManifest {
  std::filesystem::path config_path;
  std::filesystem::path output_dir;
  std::filesystem::path data_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<Variant> variants{Variant::kBase, Variant::kDws, Variant::kDil, Variant::kDnd};
  std::vector<std::size_t> kernels{3, 5, 7};
  std::vector<std::size_t> dilations{1, 10, 50, 100};

  static ExperimentManifest from_kv(const KeyValueConfig& kv, const std::filesystem::path& base_dir = {});
  static ExperimentManifest load(const std::filesystem::path& path);
  KeyValueConfig to_kv() const;
  /// Throws ConfigError when a selected kernel or dilation is unsupported.
  void validate() const;
};

struct GenerateOptions {
  std::size_t mixtures = 20;
  std::size_t frames = 1024;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path config;
};

struct TrainOptions {
  std::string variant;
  std::optional<std::size_t> kernel;
  std::optional<std::size_t> dilation;
  std::filesystem::path data;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  std::filesystem::path config;
};

struct AnalyzeOptions {
  std::string grid = "paper";  // "paper" or a manifest path
  std::filesystem::path out;
  std::filesystem::path config;
};

struct GridSearchOptions {
  std::filesystem::path manifest;
};

int generate_data(const GenerateOptions& options, std::ostream& out, std::ostream& err);
int train(const TrainOptions& options, std::ostream& out, std::ostream& err);
int analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err);
int grid_search(const GridSearchOptions& options, std::ostream& out, std::ostream& err);

/// Parses `args` (without the program name) and dispatches.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sedconv::cli

#endif  // SEDCONV_TOOLS_CLI_HPP_
