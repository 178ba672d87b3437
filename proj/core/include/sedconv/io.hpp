// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary helpers shared by the feature and checkpoint formats.

#ifndef SEDCONV_IO_HPP_
#define SEDCONV_IO_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sedconv {

/// Malformed binary input. `offset` is the byte position where decoding
/// failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// A file could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

/// Bounds-checked reader; every short read throws ParseError naming what
/// was expected.
class ByteReader {
 public:
  explicit ByteReader(const std::vector<char>& data) : data_(data) {}
  std::string bytes(std::size_t n, const char* what);
  std::uint8_t u8(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  float f32(const char* what);
  double f64(const char* what);

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }
  /// Throws unless at least n bytes remain.
  void require(std::size_t n, const std::string& what) const;

 private:
  const std::vector<char>& data_;
  std::size_t pos_ = 0;
};

std::vector<char> read_file(const std::string& path);
/// Throws std::runtime_error when the file cannot be written.
void write_file(const std::string& path, const std::vector<char>& data);

}  // namespace sedconv

#endif  // SEDCONV_IO_HPP_
