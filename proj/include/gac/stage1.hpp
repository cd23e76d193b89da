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

// Semantic bottleneck: frame encoder, vector quantizer, label head and the
// training objective
//
//   L = CE(head(mean_t q_t), y) + beta * KL(p_bar || uniform)
//       + gamma * mean_t |z_t - sg(q_t)|^2
//
// where z are encoder latents, q their nearest codes, and p_bar the batch
// mean of the soft assignments softmax(-|z - c_k|^2 / tau). Gradients pass
// straight through the quantizer; codebook rows follow an EMA of their
// assigned latents.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gac/signal.hpp"
#include "gac/tensorkit.hpp"

namespace gac::stage1 {

using tk::Mat;
using tk::Vec;
using tk::RowVec;

struct Stage1Config {
  int latent_dim = 16;
  int codebook_size = 64;
  int downsample = 1;  // frames per token, one of {1, 2, 4}
  double beta = 0.25;
  double gamma = 0.25;
  double tau = 1.0;
  int context = 3;  // blocks seen by the encoder: previous, current, next
  int encoder_hidden = 64;
  int head_hidden = 32;
  int steps = 20000;
  int batch_size = 16;
  double lr = 1e-3;
  double ema_decay = 0.99;

  // Throws ConfigError on violated invariants.
  void validate() const;
  int tokens_per_clip(int frames = 31) const { return (frames + downsample - 1) / downsample; }
};

// Per-band affine normalisation of log band energies, fitted on training data
// and shared by both stages.
struct FeatureNorm {
  Vec mean;
  Vec stddev;

  static FeatureNorm fit(std::span<const signal::FeatureSequence> feats);
  Mat apply(const Mat& f) const;
  Mat invert(const Mat& f) const;
};

struct TokenStream {
  std::vector<int> tokens;
  int codebook_size = 0;
  int downsample = 1;

  double tokens_per_second(double frame_rate = 50.0) const { return frame_rate / downsample; }
};

struct Stage1Model {
  Stage1Config cfg;
  FeatureNorm norm;
  tk::MlpParams encoder;  // 3*s*F -> hidden -> d
  Mat codebook;           // K x d
  tk::MlpParams head;     // d -> hidden -> 24

  static Stage1Model init(const Stage1Config& cfg, FeatureNorm norm, Rng& rng,
                          int n_bands = 32);
  void save(const std::filesystem::path& path) const;
  static Stage1Model load(const std::filesystem::path& path);
  // Stable digest of every parameter, for freeze checks.
  uint32_t digest() const;
};

// Builds encoder inputs from normalised features: frames are grouped into
// blocks of s (the last block zero-padded), and each block is concatenated
// with its left and right neighbour blocks (edge blocks repeated).
Mat encoder_inputs(const Mat& normalized, int downsample);

// Raw features -> ceil(T/s) x d latents.
Mat encode_frames(const Stage1Model& m, const signal::FeatureSequence& f);

struct VqResult {
  TokenStream tokens;
  Mat quantized;    // rows x d
  Mat soft_assign;  // rows x K
  Mat distances;    // rows x K, squared Euclidean
};

// Nearest-code assignment (ties to the lowest index) plus the soft
// assignment softmax(-distance / tau).
VqResult vq_quantize(const Mat& codebook, const Mat& latents, double tau, int downsample = 1);

// KL(p_bar || uniform) = ln K + sum_k p_bar_k ln p_bar_k, with p_bar the mean
// of the rows. Throws DataError if a row is not a probability vector.
double info_loss(const Mat& soft_assign);
// Gradient of info_loss w.r.t. each soft-assignment entry.
Mat info_loss_grad(const Mat& soft_assign);

// Cross-entropy of the label head on the time-mean of `quantized`.
double semantic_loss(const Stage1Model& m, const Mat& quantized, signal::Label label);
// Same loss plus its gradient w.r.t. `quantized`.
double semantic_loss_grad(const Stage1Model& m, const Mat& quantized, signal::Label label,
                          Mat& dquantized);

struct BatchLoss {
  double total = 0.0;
  double semantic = 0.0;
  double info = 0.0;
  double commit = 0.0;
  tk::GradBundle encoder_grad;
  tk::GradBundle head_grad;
  Mat latents;     // (B * rows) x d
  Mat dlatents;    // gradient w.r.t. latents
  std::vector<int> tokens;
};

// Combined loss over a batch of clips given their precomputed encoder
// inputs. With `bypass_quantizer` the head sees the latents directly and the
// commitment term vanishes.
BatchLoss batch_loss(const Stage1Model& m, std::span<const Mat> enc_inputs,
                     std::span<const signal::Label> labels, bool bypass_quantizer = false);

struct StepLog {
  double total;
  double semantic;
  double info;
  double commit;
  double perplexity;  // of the batch's hard tokens
};

struct TrainLog {
  std::vector<StepLog> steps;
};

struct TrainResult {
  Stage1Model model;
  TrainLog log;
};

// Trains on (features, labels); features are raw log band energies.
TrainResult train_stage1(std::span<const signal::FeatureSequence> features,
                         std::span<const signal::Label> labels, const Stage1Config& cfg,
                         uint64_t seed);

// Tokens of one clip through the full encoder path.
TokenStream tokenize(const Stage1Model& m, const signal::FeatureSequence& f);

}  // namespace gac::stage1
