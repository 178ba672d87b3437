// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sedconv/checkpoint.hpp"
#include "sedconv/complexity.hpp"
#include "sedconv/data.hpp"
#include "sedconv/io.hpp"
#include "sedconv/training.hpp"

namespace sedconv::cli {
namespace fs = std::filesystem;

namespace {

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const auto& s : items) out += (out.empty() ? "" : ", ") + s;
  return out;
}

template <typename T>
std::string join_numbers(const std::vector<T>& items) {
  std::vector<std::string> s;
  for (auto v : items) s.push_back(std::to_string(v));
  return join(s);
}

void ensure_directory(const fs::path& dir) {
  if (dir.empty()) throw ConfigError("--out is required");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& path, const std::string& text) {
  write_file(path.string(), std::vector<char>(text.begin(), text.end()));
}

KeyValueConfig load_optional(const fs::path& path) {
  return path.empty() ? KeyValueConfig{} : KeyValueConfig::load(path);
}

/// Header shared by every manifest echo.
KeyValueConfig echo_header(const std::string& command) {
  KeyValueConfig kv;
  kv.set("command", command);
  kv.set("version", SEDCONV_VERSION);
  return kv;
}

void append(KeyValueConfig& dst, const KeyValueConfig& src, const std::string& prefix) {
  for (const auto& [k, v] : src.entries()) dst.set(prefix + k, v);
}

std::size_t checked_size(std::int64_t v, const std::string& key) {
  if (v < 0) throw ConfigError(key + " must be non-negative");
  return static_cast<std::size_t>(v);
}

void check_kernel(std::size_t k) {
  const auto& allowed = grid_kernels();
  if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
    throw ConfigError("kernel " + std::to_string(k) + " is not supported; allowed set {" + join_numbers(allowed) + "}");
  }
}

void check_dilation(std::size_t d) {
  const auto& allowed = grid_dilations();
  if (std::find(allowed.begin(), allowed.end(), d) == allowed.end()) {
    throw ConfigError("dilation " + std::to_string(d) + " is not supported; allowed set {" +
                      join_numbers(allowed) + "}");
  }
}

Dataset load_dataset(const fs::path& dir) {
  if (dir.empty()) throw DataError("--data is required");
  Dataset d;
  const auto load = [&](const char* name, DatasetSplit& split) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) throw DataError("missing " + p.string() + " (run generate-data first)");
    split.samples = load_features(p.string());
  };
  load(kTrainFile, d.train);
  load(kValidationFile, d.validation);
  load(kTestFile, d.test);
  if (d.train.samples.empty()) throw DataError(dir.string() + ": training split is empty");
  return d;
}

/// Input geometry and class count follow the data rather than the config.
void fit_to_data(ModelConfig& m, const Dataset& d) {
  const auto& s = d.train.samples.front();
  m.input_frames = s.features.dim(0);
  m.input_features = s.features.dim(1);
  m.classes = s.targets.dim(1);
}

/// Maps exceptions to exit codes and prints the diagnostic.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ParseError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

std::string run_file_name(const std::string& label, std::size_t repetition) {
  std::string safe;
  for (char c : label) safe += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  while (!safe.empty() && safe.back() == '_') safe.pop_back();
  return safe + "_run" + std::to_string(repetition + 1) + ".txt";
}

}  // namespace

KeyValueConfig section(const KeyValueConfig& kv, const std::string& prefix) {
  KeyValueConfig out;
  for (const auto& [k, v] : kv.entries()) {
    if (k.size() > prefix.size() && k.compare(0, prefix.size(), prefix) == 0) out.set(k.substr(prefix.size()), v);
  }
  return out;
}

// ---------------------------------------------------------------------------
// ExperimentManifest

ExperimentManifest ExperimentManifest::from_kv(const KeyValueConfig& kv, const fs::path& base_dir) {
  const auto resolve = [&](const std::string& key) -> fs::path {
    const auto v = kv.get(key);
    if (!v || v->empty()) return {};
    fs::path p(*v);
    return p.is_relative() && !base_dir.empty() ? base_dir / p : p;
  };
  ExperimentManifest m;
  m.config_path = resolve("config");
  m.output_dir = resolve("output");
  m.data_dir = resolve("data");
  for (auto s : kv.get_int_list("seeds", {})) {
    if (s < 0) throw ConfigError("seeds must be non-negative");
    m.seeds.push_back(static_cast<std::uint64_t>(s));
  }
  if (kv.has("variants")) {
    m.variants.clear();
    for (const auto& v : kv.get_string_list("variants", {})) m.variants.push_back(parse_variant(v));
  }
  if (kv.has("kernels")) {
    m.kernels.clear();
    for (auto k : kv.get_int_list("kernels", {})) m.kernels.push_back(checked_size(k, "kernels"));
  }
  if (kv.has("dilations")) {
    m.dilations.clear();
    for (auto d : kv.get_int_list("dilations", {})) m.dilations.push_back(checked_size(d, "dilations"));
  }
  m.validate();
  return m;
}

ExperimentManifest ExperimentManifest::load(const fs::path& path) {
  return from_kv(KeyValueConfig::load(path), path.parent_path());
}

KeyValueConfig ExperimentManifest::to_kv() const {
  KeyValueConfig kv;
  kv.set("config", config_path.string());
  kv.set("output", output_dir.string());
  kv.set("data", data_dir.string());
  kv.set("seeds", join_numbers(seeds));
  std::vector<std::string> names;
  for (auto v : variants) names.push_back(variant_name(v));
  kv.set("variants", join(names));
  kv.set("kernels", join_numbers(kernels));
  kv.set("dilations", join_numbers(dilations));
  return kv;
}

void ExperimentManifest::validate() const {
  for (auto k : kernels) check_kernel(k);
  for (auto d : dilations) check_dilation(d);
}

// ---------------------------------------------------------------------------
// generate-data

int generate_data(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    SynthConfig sc = SynthConfig::from_kv(load_optional(options.config));
    sc.mixtures = options.mixtures;
    sc.frames = options.frames;
    sc.seed = options.seed;
    // Each mixture yields three half-overlapping sequences unless the config
    // sets its own mixture length.
    if (options.config.empty() || !KeyValueConfig::load(options.config).has("mixture_frames")) {
      sc.mixture_frames = 2 * sc.frames;
    }
    const Dataset d = synthesize_dataset(sc);
    ensure_directory(options.out);
    save_features((options.out / kTrainFile).string(), d.train.samples);
    save_features((options.out / kValidationFile).string(), d.validation.samples);
    save_features((options.out / kTestFile).string(), d.test.samples);

    KeyValueConfig echo = echo_header("generate-data");
    append(echo, sc.to_kv(), "data.");
    write_text(options.out / kManifestEcho, echo.to_text());

    out << "wrote " << d.train.samples.size() << " train, " << d.validation.samples.size() << " validation, "
        << d.test.samples.size() << " test sequences to " << options.out.string() << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// train

int train(const TrainOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const KeyValueConfig file = load_optional(options.config);
    ModelConfig mc = ModelConfig::from_kv(section(file, "model."));
    TrainConfig tc = TrainConfig::from_kv(section(file, "train."));
    mc.variant = parse_variant(options.variant);
    if (options.kernel) check_kernel(*options.kernel);
    if (options.dilation) check_dilation(*options.dilation);
    if (uses_dilated(mc.variant)) {
      mc.dil_kernel = options.kernel.value_or(mc.dil_kernel);
      mc.dilation_time = options.dilation.value_or(mc.dilation_time);
    } else {
      if (options.kernel) err << "warning: --kernel is ignored for variant " << options.variant << "\n";
      if (options.dilation) err << "warning: --dilation is ignored for variant " << options.variant << "\n";
    }
    tc.seed = options.seed;
    tc.validate();

    const Dataset data = load_dataset(options.data);
    fit_to_data(mc, data);
    mc.validate();
    ensure_directory(options.out);

    KeyValueConfig echo = echo_header("train");
    echo.set("data", options.data.string());
    append(echo, mc.to_kv(), "model.");
    append(echo, tc.to_kv(), "train.");
    write_text(options.out / kManifestEcho, echo.to_text());

    Model model = Model::build(mc, tc.seed);
    const fs::path ckpt = options.out / "checkpoint.sedckpt";
    FitHooks hooks;
    hooks.on_new_best = [&](std::size_t, Model& m) { save_checkpoint(ckpt.string(), m); };
    hooks.on_epoch_end = [&](const EpochRecord& e) {
      err << "epoch " << e.index << "  train " << fmt(e.train_loss) << "  val " << fmt(e.val_loss) << "  "
          << fmt(e.seconds, "%.3f") << " s\n";
    };
    RunRecord record = fit(model, data, tc, hooks);
    const Scores s = evaluate_split(model, data.test.samples, tc.batch_size);
    record.test_f1 = s.f1;
    record.test_er = s.error_rate;
    write_text(options.out / "run.txt", record.to_text());

    const auto params = count_parameters(model).total_parameters;
    out << mc.label() << "  F1 " << fmt(s.f1, "%.4f") << "  ER "
        << (s.error_rate ? fmt(*s.error_rate, "%.4f") : std::string("n/a")) << "  N_P " << params
        << "  epoch seconds " << fmt(record.mean_epoch_seconds(), "%.3f") << "  best epoch " << record.best_epoch
        << "\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// analyze

int analyze(const AnalyzeOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    ModelConfig base = ModelConfig::from_kv(section(load_optional(options.config), "model."));
    std::vector<GridPoint> grid;
    std::string source = options.grid;
    if (options.grid == "paper") {
      grid = full_grid(base);
    } else {
      const auto m = ExperimentManifest::load(options.grid);
      if (!m.config_path.empty()) base = ModelConfig::from_kv(section(KeyValueConfig::load(m.config_path), "model."));
      grid = make_grid(base, m.variants, m.kernels, m.dilations);
    }
    if (grid.empty()) throw ConfigError("no grid points");

    std::ostringstream text, csv;
    char line[256];
    std::snprintf(line, sizeof line, "%-14s %-4s %-5s %-7s %12s %12s %16s %12s %9s\n", "model", "dws", "xi_h", "kernel",
                  "N_P", "N_P no bias", "MACs/sequence", "published", "delta %");
    text << line;
    csv << "model,dws,xi_h,kernel,n_p,n_p_no_bias,macs,published_n_p,delta_percent,flag\n";
    std::size_t flagged = 0;
    for (const auto& gp : grid) {
      const Model model = Model::build(gp.model, 0);
      const auto full = count_macs(model, {gp.model.input_frames, gp.model.input_features});
      const auto bare = count_parameters(model, false).total_parameters;
      const bool dil = uses_dilated(gp.model.variant);
      const std::string xi = dil ? std::to_string(gp.model.dilation_time) : "N/A";
      const std::string kernel = dil ? std::to_string(gp.model.dil_kernel) + "x" + std::to_string(gp.model.dil_kernel)
                                     : "N/A";
      const auto ref = reference_parameter_count(gp.model);
      std::string published = "-", delta = "-", flag;
      if (ref) {
        const double d = 100.0 * (static_cast<double>(full.total_parameters) - *ref) / *ref;
        published = fmt(*ref, "%.0f");
        delta = fmt(d, "%+.2f");
        if (std::abs(d) > 15.0) {
          flag = "DELTA>15%";
          ++flagged;
        }
      }
      const std::string dws = uses_dws(gp.model.variant) ? "yes" : "no";
      std::snprintf(line, sizeof line, "%-14s %-4s %-5s %-7s %12llu %12llu %16llu %12s %9s%s%s\n",
                    gp.model.label().c_str(), dws.c_str(), xi.c_str(), kernel.c_str(),
                    static_cast<unsigned long long>(full.total_parameters), static_cast<unsigned long long>(bare),
                    static_cast<unsigned long long>(full.total_macs), published.c_str(), delta.c_str(), flag.empty() ? "" : " ", flag.c_str());
      text << line;
      csv << gp.model.label() << ',' << dws << ',' << xi << ',' << kernel << ',' << full.total_parameters << ','
          << bare << ',' << full.total_macs << ',' << (ref ? published : "") << ',' << (ref ? delta : "") << ','
          << flag << '\n';
    }
    out << text.str();
    if (flagged) err << "warning: " << flagged << " grid point(s) deviate from the published N_P by more than 15%\n";

    if (!options.out.empty()) {
      ensure_directory(options.out);
      write_text(options.out / "analysis.txt", text.str());
      write_text(options.out / "analysis.csv", csv.str());
      KeyValueConfig echo = echo_header("analyze");
      echo.set("grid", source);
      append(echo, base.to_kv(), "model.");
      write_text(options.out / kManifestEcho, echo.to_text());
    }
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// grid-search

int grid_search(const GridSearchOptions& options, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (options.manifest.empty()) throw ConfigError("--manifest is required");
    const ExperimentManifest manifest = ExperimentManifest::load(options.manifest);
    const KeyValueConfig settings = load_optional(manifest.config_path);
    ModelConfig base = ModelConfig::from_kv(section(settings, "model."));
    TrainConfig tc = TrainConfig::from_kv(section(settings, "train."));
    if (!manifest.seeds.empty()) tc.repetitions = manifest.seeds.size();
    tc.validate();

    Dataset data;
    SynthConfig sc;
    if (!manifest.data_dir.empty()) {
      data = load_dataset(manifest.data_dir);
    } else {
      sc = SynthConfig::from_kv(section(settings, "data."));
      data = synthesize_dataset(sc);
      if (data.train.samples.empty()) throw DataError("synthetic training split is empty");
    }
    fit_to_data(base, data);

    const auto grid = make_grid(base, manifest.variants, manifest.kernels, manifest.dilations);
    if (grid.empty()) throw ConfigError("no grid points");

    const fs::path dir = manifest.output_dir.empty() ? fs::path("grid-search") : manifest.output_dir;
    ensure_directory(dir);
    ensure_directory(dir / "runs");
    KeyValueConfig echo = echo_header("grid-search");
    append(echo, manifest.to_kv(), "manifest.");
    append(echo, base.to_kv(), "model.");
    append(echo, tc.to_kv(), "train.");
    if (manifest.data_dir.empty()) append(echo, sc.to_kv(), "data.");
    write_text(dir / kManifestEcho, echo.to_text());

    ExperimentHooks hooks;
    hooks.seeds = manifest.seeds;
    hooks.on_run_end = [&](const GridPoint& gp, std::size_t r, const RunRecord& record, Model&) {
      write_text(dir / "runs" / run_file_name(gp.model.label(), r), record.to_text());
      err << gp.model.label() << " run " << r + 1 << "/" << tc.repetitions << " done\n";
    };
    const auto rows = repeat_experiment(grid, data, tc, hooks);
    const std::string table = format_table_text(rows);
    write_text(dir / "table.txt", table);
    write_text(dir / "table.csv", format_table_csv(rows));
    out << table;
    const auto failed = std::count_if(rows.begin(), rows.end(), [](const AggregateRow& r) { return r.failed; });
    if (failed) err << "warning: " << failed << " of " << rows.size() << " grid points FAILED\n";
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// Argument parsing

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sound event detection with depthwise-separable and dilated convolutions", "sedconv"};
  app.set_version_flag("--version", std::string(SEDCONV_VERSION));
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate-data", "Write synthetic train/validation/test feature files");
  gen_cmd->add_option("--mixtures", gen.mixtures, "Number of mixtures (split 60/20/20)")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Frames per emitted sequence")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--config", gen.config, "Key-value file with generator settings");

  TrainOptions tr;
  std::size_t kernel = 0, dilation = 0;
  auto* tr_cmd = app.add_subcommand("train", "Train one model and write its run record and checkpoint");
  tr_cmd->add_option("--variant", tr.variant, "base, dws, dil or dnd")->required();
  auto* kernel_opt = tr_cmd->add_option("--kernel", kernel, "Dilated kernel size (3, 5 or 7)");
  auto* dilation_opt = tr_cmd->add_option("--dilation", dilation, "Time dilation (1, 10, 50 or 100)");
  tr_cmd->add_option("--data", tr.data, "Directory written by generate-data")->required();
  tr_cmd->add_option("--seed", tr.seed, "Initialization and shuffling seed")->capture_default_str();
  tr_cmd->add_option("--out", tr.out, "Output directory")->required();
  tr_cmd->add_option("--config", tr.config, "Key-value file with model.* and train.* settings");

  AnalyzeOptions an;
  auto* an_cmd = app.add_subcommand("analyze", "Parameter and MAC counts for every grid point");
  an_cmd->add_option("--grid", an.grid, "'paper' or a manifest file")->capture_default_str();
  an_cmd->add_option("--out", an.out, "Output directory");
  an_cmd->add_option("--config", an.config, "Key-value file with model.* settings");

  GridSearchOptions gs;
  auto* gs_cmd = app.add_subcommand("grid-search", "Repeated training over a manifest grid");
  gs_cmd->add_option("--manifest", gs.manifest, "Experiment manifest")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*gen_cmd) return generate_data(gen, out, err);
  if (*tr_cmd) {
    if (*kernel_opt) tr.kernel = kernel;
    if (*dilation_opt) tr.dilation = dilation;
    return train(tr, out, err);
  }
  if (*an_cmd) return analyze(an, out, err);
  return grid_search(gs, out, err);
}

}  // namespace sedconv::cli
