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

// Bitstream ("GACB", version 1):
//
//   offset size  field
//   0      4     magic "GACB"
//   4      1     version (1)
//   5      4     sample_rate   u32 LE
//   9      2     hop           u16 LE
//   11     2     codebook_size u16 LE
//   13     1     downsample    u8
//   14     4     num_tokens    u32 LE
//   18     P     payload: tokens MSB-first at ceil(log2 K) bits each,
//                zero-padded to a byte boundary
//   18+P   4     crc32 u32 LE over bytes [0, 18+P)
//
// Bitrate counts payload bits only: (sample_rate / hop) / s * ceil(log2 K).

#include <cstdint>
#include <span>
#include <vector>

#include "gac/signal.hpp"
#include "gac/stage1.hpp"
#include "gac/stage2.hpp"

namespace gac::codec {

inline constexpr uint8_t kVersion = 1;
inline constexpr size_t kHeaderBytes = 18;
inline constexpr size_t kCrcBytes = 4;
// Container bytes around the payload (header + CRC).
inline constexpr size_t kOverheadBits = 8 * (kHeaderBytes + kCrcBytes);

struct BitstreamHeader {
  uint32_t sample_rate = signal::kSampleRate;
  uint16_t hop = 160;
  uint16_t codebook_size = 2;
  uint8_t downsample = 1;
  uint32_t num_tokens = 0;

  int bits_per_token() const;
  // Throws FormatError on a violated invariant.
  void validate() const;
};

// ceil(log2 k) for k >= 2.
int bits_for(uint32_t k);

std::vector<uint8_t> pack(const stage1::TokenStream& ts, uint32_t sample_rate = signal::kSampleRate,
                          uint16_t hop = 160);

struct Unpacked {
  BitstreamHeader header;
  stage1::TokenStream tokens;
};

Unpacked unpack(std::span<const uint8_t> bytes);

double bitrate(const BitstreamHeader& h);
double compression_ratio(const BitstreamHeader& h, double source_bits_per_second);
// Same ratio from an already-known token bitrate.
double compression_ratio(double token_bps, double source_bits_per_second);

std::vector<uint8_t> encode_clip(const stage1::Stage1Model& s1, std::span<const double> wave,
                                 const signal::FeatureConfig& fcfg = {});

// Raw log band energies (T x F) reconstructed from a bitstream.
signal::FeatureSequence decode_clip(const stage1::Stage1Model& s1,
                                    const stage2::VelocityModel& v,
                                    std::span<const uint8_t> bytes, int n_steps, uint64_t seed,
                                    int frames = 31);

// Decoding from tokens already in hand (no bitstream round trip).
signal::FeatureSequence decode_tokens(const stage1::Stage1Model& s1,
                                      const stage2::VelocityModel& v,
                                      std::span<const int> tokens, int n_steps, uint64_t seed,
                                      int frames = 31);

}  // namespace gac::codec
