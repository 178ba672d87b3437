// Copyright 2026 The sedconv Authors
// SPDX-License-Identifier: Apache-2.0

#include "sedconv/checkpoint.hpp"

#include "sedconv/io.hpp"

namespace sedconv {

namespace {
constexpr std::string_view kMagic = "SEDCKPT1";
}

std::vector<char> encode_checkpoint(const ModelConfig& config, const ModelState& state) {
  ByteWriter w;
  w.bytes(kMagic);
  w.u32(kCheckpointVersion);
  const auto text = config.to_kv().to_text();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text);
  w.u32(static_cast<std::uint32_t>(state.tensors.size()));
  for (const auto& [name, t] : state.tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (auto v : t.data()) w.f64(static_cast<double>(v));
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  ByteReader r(bytes);
  const auto magic_at = r.offset();
  if (r.bytes(kMagic.size(), "magic") != kMagic) throw ParseError("bad checkpoint magic", magic_at);
  const auto version_at = r.offset();
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  Checkpoint ck;
  const auto text_len = r.u32("config length");
  const auto config_at = r.offset();
  try {
    ck.config = ModelConfig::from_kv(KeyValueConfig::parse(r.bytes(text_len, "config text")));
  } catch (const ConfigError& e) {
    throw ParseError(std::string("invalid checkpoint config: ") + e.what(), config_at);
  }
  const auto count = r.u32("record count");
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.u32("record name length");
    auto name = r.bytes(name_len, "record name");
    const auto rank_at = r.offset();
    const auto rank = r.u32("record rank");
    if (rank == 0 || rank > 8) throw ParseError("implausible tensor rank " + std::to_string(rank), rank_at);
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& d : shape) {
      const auto dim_at = r.offset();
      d = r.u64("record dimension");
      if (d == 0 || d > (std::uint64_t{1} << 40)) throw ParseError("invalid tensor dimension", dim_at);
      n *= d;
    }
    r.require(n * 8, "values of '" + name + "'");
    std::vector<Real> values(n);
    for (auto& v : values) v = static_cast<Real>(r.f64("value"));
    ck.state.tensors.emplace_back(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw ParseError("trailing bytes after last record", r.offset());
  return ck;
}

void save_checkpoint(const std::string& path, Model& model) {
  write_file(path, encode_checkpoint(model.config(), model.state()));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

Model restore_model(const Checkpoint& checkpoint) {
  auto model = Model::build(checkpoint.config, 0);
  model.load_state(checkpoint.state);
  return model;
}

}  // namespace sedconv
