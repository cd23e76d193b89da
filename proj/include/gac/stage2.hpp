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

// Conditional rectified flow over feature frames.
//
// Training regresses v(x_t, t, c) onto x1 - x0 along x_t = t x1 + (1 - t) x0
// with x0 ~ N(0, I) and t ~ U[0, 1]. Sampling integrates dx/dt = v with
// forward Euler on the left-endpoint grid t_i = i / n.
//
// The model works in normalised feature space (see stage1::FeatureNorm).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gac/stage1.hpp"
#include "gac/tensorkit.hpp"

namespace gac::stage2 {

using tk::Mat;
using tk::Vec;

enum class Tier { Small, Medium, Large };

std::string to_string(Tier t);
Tier tier_from_string(const std::string& s);

inline constexpr int kTimeEmbedDim = 5;

struct Stage2Config {
  std::string tier = "medium";
  int hidden_width = 64;
  int depth = 3;
  std::string activation = "tanh";
  int window = 3;  // token window (frames i-1, i, i+1 after upsampling)
  int ode_steps = 32;
  int steps = 20000;
  int batch_clips = 4;
  double lr = 1e-3;
  std::string lr_schedule = "cosine";  // or "constant"; cosine reaches 0 at the last step

  // Small 32x2, Medium 64x3, Large 128x4.
  static Stage2Config for_tier(Tier t);
  void validate() const;
};

struct VelocityModel {
  Stage2Config cfg;
  int feat_dim = 0;
  int cond_dim = 0;
  tk::MlpParams net;  // feat_dim + 5 + cond_dim -> hidden^depth -> feat_dim

  static VelocityModel init(const Stage2Config& cfg, int feat_dim, int cond_dim, Rng& rng);
  int input_dim() const { return feat_dim + kTimeEmbedDim + cond_dim; }
  void save(const std::filesystem::path& path) const;
  static VelocityModel load(const std::filesystem::path& path);
};

// [t, sin 2 pi t, cos 2 pi t, sin 4 pi t, cos 4 pi t]
Eigen::RowVectorXd time_embedding(double t);

// Network input rows [x_t | embed(t) | cond].
Mat velocity_inputs(const VelocityModel& v, const Mat& xt, const Vec& t, const Mat& cond);
Mat velocity(const VelocityModel& v, const Mat& xt, const Vec& t, const Mat& cond);

// Elementwise t * x1 + (1 - t) * x0. Throws RangeError when t is outside [0, 1].
Vec interpolate(const Vec& x0, const Vec& x1, double t);

struct FlowBatchItem {
  Vec x1;
  Vec cond;
  Vec x0;
  double t = 0.0;
};

// Row-stacked form of a list of FlowBatchItems.
struct FlowBatch {
  Mat x1;
  Mat cond;
  Mat x0;
  Vec t;

  static FlowBatch from_items(std::span<const FlowBatchItem> items);
  Eigen::Index size() const { return x1.rows(); }
};

// Mean over items of |v(x_t, t, c) - (x1 - x0)|^2.
double fm_loss(const VelocityModel& v, const FlowBatch& batch);
double fm_loss(const VelocityModel& v, std::span<const FlowBatchItem> items);
std::pair<double, tk::GradBundle> fm_loss_grad(const VelocityModel& v, const FlowBatch& batch);

// Integrates every row of x0 from t = 0 to 1 in n Euler steps.
Mat euler_integrate(const VelocityModel& v, const Mat& x0, const Mat& cond, int n);
// Same, starting from seeded standard-normal x0 (one row per condition row).
Mat euler_sample(const VelocityModel& v, const Mat& cond, int n, uint64_t seed);

// Per-frame condition rows for a token sequence: tokens are repeated s times
// (to frame rate, truncated to `frames`), then each frame i sees the code
// vectors of frames i-1, i, i+1 (edges repeated) plus i / (frames - 1).
Mat frame_conditions(const Mat& codebook, std::span<const int> tokens, int downsample,
                     int window, int frames = 31);

struct TrainLog {
  std::vector<double> loss;  // per step
  double final_loss = 0.0;   // mean of the last min(1000, steps) steps
  double final_loss_bits_per_frame = 0.0;  // final_loss / (2 ln 2)
  bool plateaued = true;     // < 1% change over the last 2000 steps
  long tokens_consumed = 0;
};

// Generic trainer over row-grouped data: each step draws `groups_per_step`
// groups of `group_size` consecutive rows of (x1_all, cond_all), and fresh
// (x0, t) per row from streams keyed by (step, row-in-batch).
struct FlowTrainData {
  Mat x1;        // rows x feat_dim
  Mat cond;      // rows x cond_dim (may have zero columns)
  int group_size = 1;
  int tokens_per_group = 1;
};

struct TrainResult {
  VelocityModel model;
  TrainLog log;
};

TrainResult train_flow(const FlowTrainData& data, const Stage2Config& cfg, int groups_per_step,
                       uint64_t seed);

// Trains a velocity model on raw features, conditioned through a frozen
// Stage-1 model (never modified).
TrainResult train_stage2(std::span<const signal::FeatureSequence> features,
                         const stage1::Stage1Model& frozen, const Stage2Config& cfg,
                         uint64_t seed);

// Plateau rule: relative change between the mean losses of the 500-step
// windows ending 2000 steps before the end and at the end is below 1%.
bool loss_plateaued(std::span<const double> loss);

}  // namespace gac::stage2
