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

#include "gac/codec.hpp"

#include <algorithm>
#include <bit>

#include "gac/error.hpp"
#include "gac/io.hpp"

namespace gac::codec {

namespace {
constexpr uint8_t kMagic[4] = {'G', 'A', 'C', 'B'};
}

int bits_for(uint32_t k) {
  if (k < 2) throw RangeError("codebook size must be >= 2");
  return static_cast<int>(std::bit_width(k - 1));
}

int BitstreamHeader::bits_per_token() const { return bits_for(codebook_size); }

void BitstreamHeader::validate() const {
  if (codebook_size < 2) throw FormatError("codebook_size must be >= 2");
  if (downsample != 1 && downsample != 2 && downsample != 4) {
    throw FormatError("downsample must be 1, 2 or 4");
  }
  if (sample_rate == 0 || hop == 0) throw FormatError("sample_rate and hop must be non-zero");
}

std::vector<uint8_t> pack(const stage1::TokenStream& ts, uint32_t sample_rate, uint16_t hop) {
  BitstreamHeader h;
  h.sample_rate = sample_rate;
  h.hop = hop;
  if (ts.codebook_size < 2 || ts.codebook_size > 0xFFFF) {
    throw RangeError("pack: codebook size " + std::to_string(ts.codebook_size) +
                     " outside [2, 65535]");
  }
  h.codebook_size = static_cast<uint16_t>(ts.codebook_size);
  h.downsample = static_cast<uint8_t>(ts.downsample);
  h.num_tokens = static_cast<uint32_t>(ts.tokens.size());
  try {
    h.validate();
  } catch (const FormatError& e) {
    throw RangeError(std::string("pack: ") + e.what());
  }
  const int width = h.bits_per_token();

  io::ByteWriter w;
  w.bytes(kMagic);
  w.u8(kVersion);
  w.u32(h.sample_rate);
  w.u16(h.hop);
  w.u16(h.codebook_size);
  w.u8(h.downsample);
  w.u32(h.num_tokens);

  uint64_t acc = 0;
  int filled = 0;
  for (int tok : ts.tokens) {
    if (tok < 0 || tok >= ts.codebook_size) {
      throw RangeError("pack: token " + std::to_string(tok) + " outside [0, " +
                       std::to_string(ts.codebook_size) + ")");
    }
    acc = (acc << width) | static_cast<uint64_t>(tok);
    filled += width;
    while (filled >= 8) {
      filled -= 8;
      w.u8(static_cast<uint8_t>(acc >> filled));
    }
    acc &= (uint64_t{1} << filled) - 1;
  }
  if (filled > 0) w.u8(static_cast<uint8_t>(acc << (8 - filled)));
  w.u32(io::crc32(w.data()));
  return w.take();
}

Unpacked unpack(std::span<const uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    if (bytes.size() < 4) throw TruncationError("bitstream shorter than its magic");
    throw FormatError("bad bitstream magic");
  }
  io::ByteReader r(bytes);
  r.bytes(4);
  Unpacked out;
  auto& h = out.header;
  const uint8_t version = r.u8();
  if (version != kVersion) throw FormatError("unsupported bitstream version " + std::to_string(version));
  h.sample_rate = r.u32();
  h.hop = r.u16();
  h.codebook_size = r.u16();
  h.downsample = r.u8();
  h.num_tokens = r.u32();
  h.validate();

  const int width = h.bits_per_token();
  const uint64_t payload_bits = static_cast<uint64_t>(h.num_tokens) * width;
  const uint64_t payload_len = (payload_bits + 7) / 8;
  if (r.remaining() < payload_len + kCrcBytes) {
    throw TruncationError("bitstream truncated: need " + std::to_string(payload_len + kCrcBytes) +
                          " bytes after the header, have " + std::to_string(r.remaining()));
  }
  if (r.remaining() > payload_len + kCrcBytes) {
    throw FormatError("trailing bytes after bitstream CRC");
  }
  const auto payload = r.bytes(payload_len);
  const uint32_t stored = r.u32();
  if (stored != io::crc32(bytes.first(kHeaderBytes + payload_len))) {
    throw CorruptionError("bitstream CRC mismatch");
  }

  auto& ts = out.tokens;
  ts.codebook_size = h.codebook_size;
  ts.downsample = h.downsample;
  ts.tokens.resize(h.num_tokens);
  uint64_t acc = 0;
  int avail = 0;
  size_t pos = 0;
  for (auto& tok : ts.tokens) {
    while (avail < width) {
      acc = (acc << 8) | payload[pos++];
      avail += 8;
    }
    avail -= width;
    tok = static_cast<int>((acc >> avail) & ((uint64_t{1} << width) - 1));
    acc &= (uint64_t{1} << avail) - 1;
    if (tok >= h.codebook_size) {
      throw FormatError("decoded token " + std::to_string(tok) + " >= codebook size");
    }
  }
  if (pos < payload.size()) {
    acc = (acc << 8) | payload[pos++];
    avail += 8;
  }
  if (avail > 0 && acc != 0) throw FormatError("non-zero padding bits in bitstream");
  return out;
}

double bitrate(const BitstreamHeader& h) {
  h.validate();
  const double frames_per_second = static_cast<double>(h.sample_rate) / h.hop;
  return frames_per_second / h.downsample * h.bits_per_token();
}

double compression_ratio(double token_bps, double source_bits_per_second) {
  if (!(source_bits_per_second > 0)) throw RangeError("source bit rate must be > 0");
  if (!(token_bps > 0)) throw RangeError("token bit rate is zero");
  return source_bits_per_second / token_bps;
}

double compression_ratio(const BitstreamHeader& h, double source_bits_per_second) {
  return compression_ratio(bitrate(h), source_bits_per_second);
}

std::vector<uint8_t> encode_clip(const stage1::Stage1Model& s1, std::span<const double> wave,
                                 const signal::FeatureConfig& fcfg) {
  const auto feats = signal::extract_features(wave, fcfg);
  return pack(stage1::tokenize(s1, feats), signal::kSampleRate, static_cast<uint16_t>(fcfg.hop));
}

signal::FeatureSequence decode_tokens(const stage1::Stage1Model& s1,
                                      const stage2::VelocityModel& v,
                                      std::span<const int> tokens, int n_steps, uint64_t seed,
                                      int frames) {
  const tk::Mat cond = stage2::frame_conditions(s1.codebook, tokens, s1.cfg.downsample,
                                            v.cfg.window, frames);
  return s1.norm.invert(stage2::euler_sample(v, cond, n_steps, seed));
}

signal::FeatureSequence decode_clip(const stage1::Stage1Model& s1,
                                    const stage2::VelocityModel& v,
                                    std::span<const uint8_t> bytes, int n_steps, uint64_t seed,
                                    int frames) {
  const auto u = unpack(bytes);
  if (u.tokens.codebook_size != s1.cfg.codebook_size || u.tokens.downsample != s1.cfg.downsample) {
    throw FormatError("bitstream (K=" + std::to_string(u.tokens.codebook_size) +
                      ", s=" + std::to_string(u.tokens.downsample) +
                      ") does not match the stage-1 model");
  }
  if (u.tokens.tokens.empty()) throw FormatError("bitstream carries no tokens");
  return decode_tokens(s1, v, u.tokens.tokens, n_steps, seed, frames);
}

}  // namespace gac::codec
