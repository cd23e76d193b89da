// Copyright 2026 The GAC Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gac/checkpoint.hpp"

#include <algorithm>

#include "gac/error.hpp"
#include "gac/io.hpp"

namespace gac {

namespace {
constexpr char kMagic[4] = {'G', 'A', 'C', 'P'};
}

void Checkpoint::put(const std::string& name, const tk::Mat& m) {
  if (name.size() > 0xFFFF) throw ConfigError("checkpoint block name too long");
  auto it = std::find_if(blocks_.begin(), blocks_.end(),
                         [&](const auto& b) { return b.first == name; });
  if (it != blocks_.end()) {
    it->second = m;
  } else {
    blocks_.emplace_back(name, m);
  }
}

void Checkpoint::put(const std::string& name, const tk::Vec& v) { put(name, tk::Mat(v)); }

void Checkpoint::put_mlp(const std::string& prefix, const tk::MlpParams& p) {
  for (size_t i = 0; i < p.layers.size(); ++i) {
    put(prefix + "." + std::to_string(i) + ".w", p.layers[i].weight);
    put(prefix + "." + std::to_string(i) + ".b", p.layers[i].bias);
  }
}

bool Checkpoint::has(const std::string& name) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [&](const auto& b) { return b.first == name; });
}

const tk::Mat& Checkpoint::get(const std::string& name) const {
  for (const auto& b : blocks_) {
    if (b.first == name) return b.second;
  }
  throw FormatError("checkpoint has no block '" + name + "'");
}

tk::Vec Checkpoint::get_vec(const std::string& name) const {
  const auto& m = get(name);
  if (m.cols() != 1) throw ShapeError("checkpoint block '" + name + "' is not a vector");
  return m.col(0);
}

void Checkpoint::get_mlp(const std::string& prefix, tk::MlpParams& p) const {
  for (size_t i = 0; i < p.layers.size(); ++i) {
    const auto& w = get(prefix + "." + std::to_string(i) + ".w");
    const auto b = get_vec(prefix + "." + std::to_string(i) + ".b");
    auto& l = p.layers[i];
    if (w.rows() != l.weight.rows() || w.cols() != l.weight.cols() || b.size() != l.bias.size()) {
      throw ShapeError("checkpoint layer '" + prefix + "." + std::to_string(i) +
                       "' does not match the configured architecture");
    }
    l.weight = w;
    l.bias = b;
  }
}

std::vector<uint8_t> Checkpoint::serialize() const {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kMagic), 4});
  w.u8(kVersion);
  w.u32(static_cast<uint32_t>(blocks_.size()));
  for (const auto& [name, m] : blocks_) {
    w.u16(static_cast<uint16_t>(name.size()));
    w.text(name);
    w.u32(static_cast<uint32_t>(m.rows()));
    w.u32(static_cast<uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) w.f64(m(r, c));
    }
  }
  w.u32(io::crc32(w.data()));
  return w.take();
}

Checkpoint Checkpoint::deserialize(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 + 1 + 4 + 4) throw TruncationError("checkpoint too short");
  if (!std::equal(kMagic, kMagic + 4, bytes.begin())) throw FormatError("bad checkpoint magic");
  const auto body = bytes.first(bytes.size() - 4);
  io::ByteReader tail(bytes.last(4));
  if (tail.u32() != io::crc32(body)) throw CorruptionError("checkpoint CRC mismatch");

  io::ByteReader r(body);
  r.bytes(4);
  const uint8_t version = r.u8();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  const uint32_t count = r.u32();
  for (uint32_t i = 0; i < count; ++i) {
    const uint16_t len = r.u16();
    std::string name = r.text(len);
    const uint32_t rows = r.u32();
    const uint32_t cols = r.u32();
    if (static_cast<uint64_t>(rows) * cols * 8 > r.remaining()) {
      throw TruncationError("checkpoint block '" + name + "' truncated");
    }
    tk::Mat m(rows, cols);
    for (uint32_t a = 0; a < rows; ++a) {
      for (uint32_t b = 0; b < cols; ++b) m(a, b) = r.f64();
    }
    ck.blocks_.emplace_back(std::move(name), std::move(m));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint blocks");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  io::write_file(path, serialize());
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  return deserialize(io::read_file(path));
}

std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint) {
  auto p = checkpoint;
  p += ".json";
  return p;
}

}  // namespace gac
