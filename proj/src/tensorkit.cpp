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

#include "gac/tensorkit.hpp"

#include <algorithm>
#include <cmath>

#include "gac/error.hpp"

namespace gac::tk {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh:
      return "tanh";
    case Activation::Relu:
      return "relu";
    case Activation::Identity:
      return "identity";
  }
  return "identity";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw ConfigError("unknown activation '" + s + "'");
}

Eigen::Index MlpParams::in_dim() const {
  return layers.empty() ? 0 : layers.front().in_dim();
}

Eigen::Index MlpParams::out_dim() const {
  return layers.empty() ? 0 : layers.back().out_dim();
}

size_t MlpParams::param_count() const {
  size_t n = 0;
  for (const auto& l : layers) n += static_cast<size_t>(l.weight.size() + l.bias.size());
  return n;
}

void MlpParams::validate() const {
  if (layers.empty()) throw ShapeError("MLP has no layers");
  for (size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.bias.size() != l.out_dim()) {
      throw ShapeError("layer " + std::to_string(i) + ": bias size does not match output dim");
    }
    if (i > 0 && layers[i - 1].out_dim() != l.in_dim()) {
      throw ShapeError("layer " + std::to_string(i) + ": input dim " +
                       std::to_string(l.in_dim()) + " does not chain with previous output " +
                       std::to_string(layers[i - 1].out_dim()));
    }
  }
}

GradBundle GradBundle::zeros_like(const MlpParams& p) {
  GradBundle g;
  for (const auto& l : p.layers) {
    g.weight.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
    g.bias.push_back(Vec::Zero(l.bias.size()));
  }
  return g;
}

GradBundle& GradBundle::operator+=(const GradBundle& o) {
  if (o.weight.size() != weight.size()) throw ShapeError("gradient bundles differ in depth");
  for (size_t i = 0; i < weight.size(); ++i) {
    weight[i] += o.weight[i];
    bias[i] += o.bias[i];
  }
  return *this;
}

GradBundle& GradBundle::operator*=(double s) {
  for (size_t i = 0; i < weight.size(); ++i) {
    weight[i] *= s;
    bias[i] *= s;
  }
  return *this;
}

bool GradBundle::congruent(const MlpParams& p) const {
  if (weight.size() != p.layers.size() || bias.size() != p.layers.size()) return false;
  for (size_t i = 0; i < weight.size(); ++i) {
    if (weight[i].rows() != p.layers[i].weight.rows() ||
        weight[i].cols() != p.layers[i].weight.cols() ||
        bias[i].size() != p.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

double GradBundle::squared_norm() const {
  double s = 0.0;
  for (size_t i = 0; i < weight.size(); ++i) {
    s += weight[i].squaredNorm() + bias[i].squaredNorm();
  }
  return s;
}

MlpParams make_mlp(const std::vector<int>& widths, Activation hidden, Activation output,
                   Rng& rng) {
  if (widths.size() < 2) throw ConfigError("an MLP needs at least input and output widths");
  MlpParams p;
  for (size_t i = 0; i + 1 < widths.size(); ++i) {
    const int in = widths[i];
    const int out = widths[i + 1];
    if (in <= 0 || out <= 0) throw ConfigError("MLP widths must be positive");
    Layer l;
    l.weight.resize(out, in);
    const double sd = 1.0 / std::sqrt(static_cast<double>(in));
    // Row-major fill order so the draw sequence is independent of storage.
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) l.weight(r, c) = sd * rng.normal();
    }
    l.bias = Vec::Zero(out);
    l.act = (i + 2 == widths.size()) ? output : hidden;
    p.layers.push_back(std::move(l));
  }
  return p;
}

namespace {

void apply_activation(Activation a, Mat& m) {
  switch (a) {
    case Activation::Tanh:
      m = m.array().tanh();
      break;
    case Activation::Relu:
      m = m.cwiseMax(0.0);
      break;
    case Activation::Identity:
      break;
  }
}

// Multiplies dy in place by the activation derivative, expressed through the
// post-activation output y.
void activation_backward(Activation a, const Mat& y, Mat& dy) {
  switch (a) {
    case Activation::Tanh:
      dy.array() *= (1.0 - y.array().square());
      break;
    case Activation::Relu:
      dy.array() *= (y.array() > 0.0).cast<double>();
      break;
    case Activation::Identity:
      break;
  }
}

Mat layer_forward(const Layer& l, const Mat& x) {
  Mat y = x * l.weight.transpose();
  y.rowwise() += l.bias.transpose();
  apply_activation(l.act, y);
  return y;
}

}  // namespace

std::pair<Mat, MlpCache> mlp_forward(const MlpParams& p, const Mat& x) {
  if (p.layers.empty()) throw ShapeError("MLP has no layers");
  if (x.cols() != p.in_dim()) {
    throw ShapeError("mlp_forward: input has " + std::to_string(x.cols()) +
                     " columns, network expects " + std::to_string(p.in_dim()));
  }
  MlpCache cache;
  cache.inputs.reserve(p.layers.size());
  cache.outputs.reserve(p.layers.size());
  Mat h = x;
  for (const auto& l : p.layers) {
    if (h.cols() != l.in_dim()) throw ShapeError("mlp_forward: layers do not chain");
    cache.inputs.push_back(h);
    h = layer_forward(l, h);
    cache.outputs.push_back(h);
  }
  return {std::move(h), std::move(cache)};
}

std::pair<Vec, MlpCache> mlp_forward(const MlpParams& p, const Vec& x) {
  auto [y, cache] = mlp_forward(p, Mat(x.transpose()));
  return {Vec(y.row(0).transpose()), std::move(cache)};
}

Mat mlp_apply(const MlpParams& p, const Mat& x) {
  if (p.layers.empty()) throw ShapeError("MLP has no layers");
  if (x.cols() != p.in_dim()) {
    throw ShapeError("mlp_apply: input has " + std::to_string(x.cols()) +
                     " columns, network expects " + std::to_string(p.in_dim()));
  }
  Mat h = layer_forward(p.layers.front(), x);
  for (size_t i = 1; i < p.layers.size(); ++i) h = layer_forward(p.layers[i], h);
  return h;
}

std::pair<GradBundle, Mat> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                        const Mat& dy) {
  const size_t n = p.layers.size();
  if (cache.inputs.size() != n || cache.outputs.size() != n) {
    throw ShapeError("mlp_backward: cache depth does not match network");
  }
  if (dy.rows() != cache.outputs.back().rows() || dy.cols() != p.out_dim()) {
    throw ShapeError("mlp_backward: upstream gradient shape does not match cached output");
  }
  GradBundle g;
  g.weight.resize(n);
  g.bias.resize(n);
  Mat delta = dy;
  for (size_t k = n; k-- > 0;) {
    const auto& l = p.layers[k];
    if (cache.inputs[k].cols() != l.in_dim() || cache.outputs[k].cols() != l.out_dim()) {
      throw ShapeError("mlp_backward: stale cache for layer " + std::to_string(k));
    }
    activation_backward(l.act, cache.outputs[k], delta);
    g.weight[k] = delta.transpose() * cache.inputs[k];
    g.bias[k] = delta.colwise().sum().transpose();
    delta = delta * l.weight;
  }
  return {std::move(g), std::move(delta)};
}

std::pair<GradBundle, Vec> mlp_backward(const MlpParams& p, const MlpCache& cache,
                                        const Vec& dy) {
  auto [g, dx] = mlp_backward(p, cache, Mat(dy.transpose()));
  return {std::move(g), Vec(dx.row(0).transpose())};
}

AdamState AdamState::fresh(const MlpParams& p, AdamConfig cfg) {
  AdamState s;
  s.cfg = cfg;
  s.m = GradBundle::zeros_like(p);
  s.v = GradBundle::zeros_like(p);
  return s;
}

void adam_step(AdamState& s, MlpParams& p, const GradBundle& g) {
  if (!g.congruent(p) || !s.m.congruent(p) || !s.v.congruent(p)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  ++s.step;
  const auto& c = s.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(s.step));
  auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
    m = c.beta1 * m + (1.0 - c.beta1) * grad;
    v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
    param.array() -=
        c.lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.eps);
  };
  for (size_t i = 0; i < p.layers.size(); ++i) {
    update(p.layers[i].weight, s.m.weight[i], s.v.weight[i], g.weight[i]);
    update(p.layers[i].bias, s.m.bias[i], s.v.bias[i], g.bias[i]);
  }
}

std::vector<std::span<double>> param_spans(MlpParams& p) {
  std::vector<std::span<double>> out;
  for (auto& l : p.layers) {
    out.emplace_back(l.weight.data(), static_cast<size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> grad_spans(const GradBundle& g) {
  std::vector<std::span<const double>> out;
  for (size_t i = 0; i < g.weight.size(); ++i) {
    out.emplace_back(g.weight[i].data(), static_cast<size_t>(g.weight[i].size()));
    out.emplace_back(g.bias[i].data(), static_cast<size_t>(g.bias[i].size()));
  }
  return out;
}

double finite_diff_check(const std::function<double()>& loss,
                         const std::vector<std::span<double>>& params,
                         const std::vector<std::span<const double>>& analytic, double eps) {
  if (params.size() != analytic.size()) {
    throw ShapeError("finite_diff_check: parameter and gradient block counts differ");
  }
  auto eval = [&] {
    const double v = loss();
    if (!std::isfinite(v)) throw DataError("finite_diff_check: loss is not finite");
    return v;
  };
  eval();
  double worst = 0.0;
  for (size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != analytic[b].size()) {
      throw ShapeError("finite_diff_check: block " + std::to_string(b) + " size mismatch");
    }
    for (size_t i = 0; i < params[b].size(); ++i) {
      double& x = params[b][i];
      const double saved = x;
      x = saved + eps;
      const double up = eval();
      x = saved - eps;
      const double down = eval();
      x = saved;
      const double fd = (up - down) / (2.0 * eps);
      const double bp = analytic[b][i];
      const double rel = std::abs(fd - bp) / std::max(1e-8, std::abs(fd) + std::abs(bp));
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

double finite_diff_check(const LossAndGrad& fn, MlpParams p, double eps) {
  const GradBundle g = fn(p).second;
  if (!g.congruent(p)) throw ShapeError("finite_diff_check: gradient shape mismatch");
  auto spans = param_spans(p);
  return finite_diff_check([&] { return fn(p).first; }, spans, grad_spans(g), eps);
}

double softmax_cross_entropy(const RowVec& logits, int target, RowVec& dlogits) {
  if (target < 0 || target >= logits.size()) {
    throw RangeError("softmax_cross_entropy: target " + std::to_string(target) +
                     " outside [0, " + std::to_string(logits.size()) + ")");
  }
  const double mx = logits.maxCoeff();
  RowVec e = (logits.array() - mx).exp();
  const double z = e.sum();
  dlogits = e / z;
  const double loss = std::log(z) - (logits(target) - mx);
  dlogits(target) -= 1.0;
  return loss;
}

}  // namespace gac::tk
