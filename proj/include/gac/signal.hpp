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

// Synthetic labelled audio corpus and the log band-energy front end.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gac::signal {

inline constexpr int kSampleRate = 8000;
inline constexpr int kClipSamples = 5120;  // 0.64 s
inline constexpr int kNumPitchBuckets = 8;
inline constexpr int kNumFamilies = 3;
inline constexpr int kNumClasses = kNumFamilies * kNumPitchBuckets;

enum class Family : uint8_t { Tone = 0, Chirp = 1, NoiseBurst = 2 };

std::string to_string(Family f);

struct ClipSpec {
  Family family = Family::Tone;
  int pitch_bucket = 0;     // [0, 7]
  double amp = 1.0;         // [0.1, 1.0]
  double attack = 0.0;      // fraction of clip length, [0, 1)
  double decay = 0.0;       // fraction of clip length, [0, 1)
  int harmonics = 1;        // [1, 3], Tone only
  double sweep_rate = 0.0;  // Hz/s, Chirp only

  // 110 * 2^(pitch_bucket / 2) Hz.
  double f0() const;
  // Throws RangeError when a field is outside its declared range.
  void validate() const;
};

using Waveform = std::vector<double>;

struct Label {
  int class_id = 0;  // family * 8 + pitch_bucket

  static Label from_spec(const ClipSpec& s);
  Family family() const { return static_cast<Family>(class_id / kNumPitchBuckets); }
  int pitch_bucket() const { return class_id % kNumPitchBuckets; }
};

struct FeatureConfig {
  int frame_len = 320;
  int hop = 160;
  int n_bands = 32;
  double log_floor = 1e-8;

  int num_frames(int n_samples = kClipSamples) const {
    return 1 + (n_samples - frame_len) / hop;
  }
  double frame_rate() const { return static_cast<double>(kSampleRate) / hop; }
};

// T x F matrix of natural-log band energies, one frame per row.
using FeatureSequence = Eigen::MatrixXd;

struct Clip {
  Waveform wave;
  Label label;
  ClipSpec spec;
  uint64_t seed = 0;  // per-clip synthesis seed
};

struct Corpus {
  uint64_t seed = 0;
  std::vector<Clip> clips;
};

Waveform synth_clip(const ClipSpec& spec, uint64_t seed);

// Draws clip specs from a seeded stream. With `stratified`, clip i has
// class_id i % 24 and only the continuous fields are random.
Corpus make_corpus(int n_clips, uint64_t seed, bool stratified = false);

// Triangular band table: band b rises from edges[b] to centers[b] (= edges[b+1])
// and falls to edges[b+2]. Linear spacing below 500 Hz, logarithmic above.
struct BandTable {
  std::vector<double> points;  // n_bands + 2 frequencies in Hz
  Eigen::MatrixXd weights;     // n_bins x n_bands

  double center(int band) const { return points[band + 1]; }
};

const BandTable& band_table(const FeatureConfig& cfg);

FeatureSequence extract_features(std::span<const double> w, const FeatureConfig& cfg = {});

// Binary corpus file:
//   magic "GACC" | version u8 (=1) | clip count u32 | corpus seed u64
//   per clip: label u8 | family u8 | pitch u8 | harmonics u8 |
//             amp, attack, decay, sweep_rate f64 | clip seed u64 |
//             5120 x int16 PCM (little-endian)
std::vector<uint8_t> serialize_corpus(const Corpus& c);
Corpus deserialize_corpus(std::span<const uint8_t> bytes);
void save_corpus(const Corpus& c, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

int16_t to_pcm16(double s);
double from_pcm16(int16_t v);

}  // namespace gac::signal
