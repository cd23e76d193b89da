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

// Dense-math and learning substrate: MLPs with hand-derived backprop, Adam,
// and central-difference gradient verification. Storage and GEMM are Eigen;
// everything else is written out here.
//
// Batched convention: one sample per row. A layer maps X (batch x in) to
// act(X * W^T + 1 b^T) with W of shape out x in.

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gac/prng.hpp"

namespace gac::tk {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

enum class Activation { Tanh, Relu, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
  Activation act = Activation::Identity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

struct MlpParams {
  std::vector<Layer> layers;

  Eigen::Index in_dim() const;
  Eigen::Index out_dim() const;
  // Sum over layers of out*in + out.
  size_t param_count() const;
  // Throws ShapeError when adjacent layers do not chain.
  void validate() const;
};

// Gradients with the exact shape of an MlpParams.
struct GradBundle {
  std::vector<Mat> weight;
  std::vector<Vec> bias;

  static GradBundle zeros_like(const MlpParams& p);
  GradBundle& operator+=(const GradBundle& o);
  GradBundle& operator*=(double s);
  bool congruent(const MlpParams& p) const;
  double squared_norm() const;
};

// Activations saved by a forward pass.
struct MlpCache {
  std::vector<Mat> inputs;  // input to each layer
  std::vector<Mat> outputs; // post-activation output of each layer
};

// Builds an MLP with the given widths, e.g. {in, h1, h2, out}. Hidden layers
// use `hidden`, the last layer `output`. Weights ~ N(0, 1/sqrt(fan_in)),
// biases zero.
MlpParams make_mlp(const std::vector<int>& widths, Activation hidden, Activation output,
                   Rng& rng);

std::pair<Mat, MlpCache> mlp_forward(const MlpParams& p, const Mat& x);
std::pair<Vec, MlpCache> mlp_forward(const MlpParams& p, const Vec& x);
// Forward pass without keeping a cache.
Mat mlp_apply(const MlpParams& p, const Mat& x);

// Reverse-mode gradients of the scalar whose derivative w.r.t. the network
// output is dy. Gradients are summed over the batch rows.
std::pair<GradBundle, Mat> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                        const Mat& dy);
std::pair<GradBundle, Vec> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                        const Vec& dy);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  GradBundle m;
  GradBundle v;
  long step = 0;

  static AdamState fresh(const MlpParams& p, AdamConfig cfg = {});
};

// Bias-corrected Adam update, in place.
void adam_step(AdamState& s, MlpParams& p, const GradBundle& g);

// Flat views over parameter storage for generic traversal.
std::vector<std::span<double>> param_spans(MlpParams& p);
std::vector<std::span<const double>> grad_spans(const GradBundle& g);

// Compares `analytic` against central differences of `loss` w.r.t. every
// scalar in `params` (perturbed in place and restored). Returns the max over
// parameters of |g_fd - g_bp| / max(1e-8, |g_fd| + |g_bp|). Throws DataError
// if the loss is not finite.
double finite_diff_check(const std::function<double()>& loss,
                         const std::vector<std::span<double>>& params,
                         const std::vector<std::span<const double>>& analytic, double eps);

using LossAndGrad = std::function<std::pair<double, GradBundle>(const MlpParams&)>;

double finite_diff_check(const LossAndGrad& fn, MlpParams p, double eps);

// Numerically stable softmax cross-entropy for one row of logits. Writes the
// gradient w.r.t. the logits into dlogits.
double softmax_cross_entropy(const RowVec& logits, int target, RowVec& dlogits);

}  // namespace gac::tk
