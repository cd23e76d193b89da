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

#pragma once

// Checkpoint container ("GACP"):
//
//   magic "GACP" | version u8 (=1) | block count u32
//   per block: name length u16 | name bytes | rows u32 | cols u32 |
//              rows*cols f64 values (row-major, little-endian)
//   crc32 u32 over everything before it
//
// Blocks keep insertion order so a save is byte-stable.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gac/tensorkit.hpp"

namespace gac {

class Checkpoint {
 public:
  static constexpr uint8_t kVersion = 1;

  void put(const std::string& name, const tk::Mat& m);
  void put(const std::string& name, const tk::Vec& v);
  // Stores layers as "<prefix>.<i>.w" / "<prefix>.<i>.b".
  void put_mlp(const std::string& prefix, const tk::MlpParams& p);

  bool has(const std::string& name) const;
  const tk::Mat& get(const std::string& name) const;
  tk::Vec get_vec(const std::string& name) const;
  // Loads weights into an MLP whose shape and activations are already set.
  void get_mlp(const std::string& prefix, tk::MlpParams& p) const;

  const std::vector<std::pair<std::string, tk::Mat>>& blocks() const { return blocks_; }

  std::vector<uint8_t> serialize() const;
  static Checkpoint deserialize(std::span<const uint8_t> bytes);

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);

 private:
  std::vector<std::pair<std::string, tk::Mat>> blocks_;
};

// Sidecar JSON path for a checkpoint ("model.gacp" -> "model.gacp.json").
std::filesystem::path sidecar_path(const std::filesystem::path& checkpoint);

}  // namespace gac
