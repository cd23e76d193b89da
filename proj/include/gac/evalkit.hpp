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

// Desk-scale quality metrics: log-spectral distance, kernel MMD between frame
// sets, codebook perplexity and the accuracy of a frozen label classifier
// ("judge") on reconstructed features.

#include <cstdint>
#include <span>
#include <vector>

#include "gac/signal.hpp"
#include "gac/tensorkit.hpp"

namespace gac::evalkit {

using tk::Mat;
using tk::Vec;

// Mean over frames of sqrt(mean over bands of ((10 / ln 10) (ref - rec))^2), dB.
double lsd(const signal::FeatureSequence& ref, const signal::FeatureSequence& rec);

// Median of all pairwise Euclidean distances between rows of [A; B].
double median_pairwise_distance(const Mat& a, const Mat& b);

// Unbiased squared MMD with a Gaussian kernel exp(-|x - y|^2 / (2 sigma^2)).
// sigma <= 0 selects the median heuristic over A and B together (an evenly
// strided subset of 4000 points when the sets are larger).
double mmd_frames(const Mat& a, const Mat& b, double sigma = 0.0);

// exp(entropy) of the normalised histogram, in [1, K].
double codebook_perplexity(std::span<const double> histogram);
double codebook_perplexity(std::span<const int> tokens, int k);

struct JudgeConfig {
  int hidden = 64;
  int steps = 3000;
  int batch_size = 32;
  double lr = 3e-3;
};

// Classifier on the time-mean feature frame.
struct JudgeModel {
  Vec mean;
  Vec stddev;
  tk::MlpParams net;

  Mat logits(std::span<const signal::FeatureSequence> feats) const;
  std::vector<int> predict(std::span<const signal::FeatureSequence> feats) const;
};

// Stratified split: within each class the first round(0.8 n) of a seeded
// shuffle go to train, the rest to held-out. Indices are returned sorted.
struct Split {
  std::vector<size_t> train;
  std::vector<size_t> heldout;
};
Split stratified_split(std::span<const signal::Label> labels, uint64_t seed,
                       double train_fraction = 0.8);

// Mean softmax cross-entropy of net(x) against class targets, with gradient.
std::pair<double, tk::GradBundle> judge_loss_grad(const tk::MlpParams& net, const Mat& x,
                                                  std::span<const int> targets);

JudgeModel train_judge(std::span<const signal::FeatureSequence> feats,
                       std::span<const signal::Label> labels, uint64_t seed,
                       const JudgeConfig& cfg = {});

// Fraction of clips whose argmax logit equals the label.
double judge_accuracy(const JudgeModel& j, std::span<const signal::FeatureSequence> feats,
                      std::span<const signal::Label> labels);
double accuracy_from_logits(const Mat& logits, std::span<const signal::Label> labels);

struct EvalConfig {
  int mmd_max_frames = 0;  // per side; 0 keeps every frame, otherwise a seeded subsample
  int ode_steps = 32;
  uint64_t decode_seed = 7;
  JudgeConfig judge;
};

struct MetricReport {
  double bitrate_bps = 0.0;
  double lsd = 0.0;
  double mmd = 0.0;
  double judge_accuracy = 0.0;
  double perplexity = 1.0;
};

// Stacks the rows of every sequence, keeping at most `max_rows` picked with a
// seeded shuffle.
Mat stack_frames(std::span<const signal::FeatureSequence> feats, int max_rows, uint64_t seed);

}  // namespace gac::evalkit
