// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SEDCONV_KV_CONFIG_HPP_
#define SEDCONV_KV_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sedconv {

/// Invalid configuration: unknown values, out-of-range settings, grid points
/// outside the supported set.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain-text `key = value` settings. Blank lines and lines starting with
/// '#' are ignored. Keys keep their first-insertion order.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value);
  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  double get_real(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  /// Comma-separated integers, e.g. "1, 10, 50".
  std::vector<std::int64_t> get_int_list(const std::string& key, std::vector<std::int64_t> fallback) const;
  std::vector<std::string> get_string_list(const std::string& key, std::vector<std::string> fallback) const;

  /// Copies every entry of `other` over this one.
  void merge(const KeyValueConfig& other);

  std::string to_text() const;
  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::vector<std::string> split_list(std::string_view text);
std::string trim(std::string_view s);

}  // namespace sedconv

#endif  // SEDCONV_KV_CONFIG_HPP_
