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

#include "gac/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "gac/error.hpp"
#include "gac/prng.hpp"

namespace gac::evalkit {

double lsd(const signal::FeatureSequence& ref, const signal::FeatureSequence& rec) {
  if (ref.rows() != rec.rows() || ref.cols() != rec.cols()) {
    throw ShapeError("lsd: feature shapes differ");
  }
  if (ref.size() == 0) throw ShapeError("lsd: empty features");
  constexpr double kDb = 10.0 / std::numbers::ln10;
  const Mat diff = kDb * (ref - rec);
  return diff.array().square().rowwise().mean().sqrt().mean();
}

namespace {

Mat squared_distance_matrix(const Mat& a, const Mat& b) {
  Mat d = -2.0 * a * b.transpose();
  d.colwise() += a.rowwise().squaredNorm();
  d.rowwise() += b.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

}  // namespace

double median_pairwise_distance(const Mat& a, const Mat& b) {
  Mat all(a.rows() + b.rows(), a.cols());
  all << a, b;
  const Mat d2 = squared_distance_matrix(all, all);
  std::vector<double> v;
  v.reserve(static_cast<size_t>(all.rows() * (all.rows() - 1) / 2));
  for (Eigen::Index j = 1; j < all.rows(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) v.push_back(d2(i, j));
  }
  if (v.empty()) throw DataError("median_pairwise_distance: need at least two points");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double med = *mid;
  if (v.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(v.begin(), mid));
  }
  return std::sqrt(med);
}

namespace {

// Pairs for the median heuristic beyond this many points come from an evenly
// strided subset; the median of ~8M distances is stable to well under 1%.
constexpr Eigen::Index kMedianPoints = 4000;
constexpr Eigen::Index kBlock = 1024;

Mat strided_rows(const Mat& m, Eigen::Index count) {
  if (m.rows() <= count) return m;
  Mat out(count, m.cols());
  for (Eigen::Index i = 0; i < count; ++i) out.row(i) = m.row(i * m.rows() / count);
  return out;
}

// Sum of exp(g |x_i - y_j|^2) over all pairs, block by block so that large
// frame sets never materialise a full kernel matrix. With `self` (y == x) the
// diagonal is dropped and only the upper block triangle is evaluated.
double kernel_sum(const Mat& x, const Mat& y, double g, bool self) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); i += kBlock) {
    const auto bi = std::min(kBlock, x.rows() - i);
    for (Eigen::Index j = self ? i : 0; j < y.rows(); j += kBlock) {
      const auto bj = std::min(kBlock, y.rows() - j);
      const Mat k =
          (squared_distance_matrix(x.middleRows(i, bi), y.middleRows(j, bj)) * g).array().exp();
      if (!self) {
        s += k.sum();
      } else if (i == j) {
        s += k.sum() - k.diagonal().sum();
      } else {
        s += 2.0 * k.sum();
      }
    }
  }
  return s;
}

}  // namespace

double mmd_frames(const Mat& a, const Mat& b, double sigma) {
  if (a.rows() < 2 || b.rows() < 2) throw DataError("mmd_frames: each set needs >= 2 points");
  if (a.cols() != b.cols()) throw ShapeError("mmd_frames: dimension mismatch");
  if (sigma <= 0.0) {
    const auto total = a.rows() + b.rows();
    if (total <= kMedianPoints) {
      sigma = median_pairwise_distance(a, b);
    } else {
      const auto na = std::max<Eigen::Index>(1, kMedianPoints * a.rows() / total);
      sigma = median_pairwise_distance(strided_rows(a, na), strided_rows(b, kMedianPoints - na));
    }
  }
  if (!(sigma > 0.0)) throw DataError("mmd_frames: degenerate sets (zero bandwidth)");
  const double g = -1.0 / (2.0 * sigma * sigma);
  const double m = static_cast<double>(a.rows());
  const double n = static_cast<double>(b.rows());
  return kernel_sum(a, a, g, true) / (m * (m - 1)) + kernel_sum(b, b, g, true) / (n * (n - 1)) -
         2.0 * kernel_sum(a, b, g, false) / (m * n);
}

double codebook_perplexity(std::span<const double> histogram) {
  const double total = std::accumulate(histogram.begin(), histogram.end(), 0.0);
  if (histogram.empty() || !(total > 0.0)) throw DataError("codebook_perplexity: empty histogram");
  double h = 0.0;
  for (double c : histogram) {
    if (c < 0) throw DataError("codebook_perplexity: negative count");
    if (c > 0) h -= (c / total) * std::log(c / total);
  }
  return std::clamp(std::exp(h), 1.0, static_cast<double>(histogram.size()));
}

double codebook_perplexity(std::span<const int> tokens, int k) {
  std::vector<double> hist(static_cast<size_t>(k), 0.0);
  for (int t : tokens) {
    if (t < 0 || t >= k) throw RangeError("codebook_perplexity: token out of range");
    hist[static_cast<size_t>(t)] += 1.0;
  }
  return codebook_perplexity(hist);
}

namespace {

Mat pooled_inputs(std::span<const signal::FeatureSequence> feats) {
  if (feats.empty()) throw DataError("judge: no features");
  Mat x(static_cast<Eigen::Index>(feats.size()), feats.front().cols());
  for (size_t i = 0; i < feats.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = feats[i].colwise().mean();
  }
  return x;
}

}  // namespace

Mat JudgeModel::logits(std::span<const signal::FeatureSequence> feats) const {
  Mat x = pooled_inputs(feats);
  x = (x.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
  return tk::mlp_apply(net, x);
}

std::vector<int> JudgeModel::predict(std::span<const signal::FeatureSequence> feats) const {
  const Mat l = logits(feats);
  std::vector<int> out(static_cast<size_t>(l.rows()));
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    Eigen::Index arg;
    l.row(i).maxCoeff(&arg);
    out[static_cast<size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

Split stratified_split(std::span<const signal::Label> labels, uint64_t seed,
                       double train_fraction) {
  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i].class_id].push_back(i);
  Split s;
  const Rng root(seed);
  for (auto& [cls, idx] : by_class) {
    Rng r = root.split(static_cast<uint64_t>(cls));
    for (size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[r.below(i)]);
    const auto n_train = static_cast<size_t>(std::lround(train_fraction * idx.size()));
    s.train.insert(s.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.heldout.insert(s.heldout.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.heldout.begin(), s.heldout.end());
  return s;
}

std::pair<double, tk::GradBundle> judge_loss_grad(const tk::MlpParams& net, const Mat& x,
                                                  std::span<const int> targets) {
  if (static_cast<size_t>(x.rows()) != targets.size() || targets.empty()) {
    throw DataError("judge loss: inputs/targets size mismatch");
  }
  auto [logits, cache] = tk::mlp_forward(net, x);
  const double n = static_cast<double>(x.rows());
  double loss = 0.0;
  Mat dl(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    tk::RowVec d;
    loss += tk::softmax_cross_entropy(logits.row(i), targets[static_cast<size_t>(i)], d);
    dl.row(i) = d / n;
  }
  auto [g, unused] = tk::mlp_backward(net, cache, dl);
  return {loss / n, std::move(g)};
}

JudgeModel train_judge(std::span<const signal::FeatureSequence> feats,
                       std::span<const signal::Label> labels, uint64_t seed,
                       const JudgeConfig& cfg) {
  if (feats.size() != labels.size() || feats.empty()) {
    throw DataError("train_judge: need one label per feature sequence");
  }
  const Rng root(seed);
  JudgeModel j;
  Mat x = pooled_inputs(feats);
  j.mean = x.colwise().mean().transpose();
  j.stddev = ((x.rowwise() - j.mean.transpose()).array().square().colwise().mean().sqrt())
                 .matrix()
                 .transpose()
                 .cwiseMax(1e-6);
  x = (x.rowwise() - j.mean.transpose()).array().rowwise() / j.stddev.transpose().array();
  Rng init = root.split("init");
  j.net = tk::make_mlp({static_cast<int>(x.cols()), cfg.hidden, signal::kNumClasses},
                       tk::Activation::Tanh, tk::Activation::Identity, init);
  auto adam = tk::AdamState::fresh(j.net, {.lr = cfg.lr});
  const Rng batches = root.split("batches");
  const auto n = static_cast<uint64_t>(x.rows());
  Mat xb(cfg.batch_size, x.cols());
  std::vector<int> yb(static_cast<size_t>(cfg.batch_size));
  for (int step = 0; step < cfg.steps; ++step) {
    Rng br = batches.split(static_cast<uint64_t>(step));
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto idx = br.below(n);
      xb.row(i) = x.row(static_cast<Eigen::Index>(idx));
      yb[static_cast<size_t>(i)] = labels[idx].class_id;
    }
    auto [loss, g] = judge_loss_grad(j.net, xb, yb);
    tk::adam_step(adam, j.net, g);
  }
  return j;
}

double accuracy_from_logits(const Mat& logits, std::span<const signal::Label> labels) {
  if (static_cast<size_t>(logits.rows()) != labels.size() || labels.empty()) {
    throw DataError("accuracy: logits/labels size mismatch");
  }
  size_t correct = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    if (static_cast<int>(arg) == labels[static_cast<size_t>(i)].class_id) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double judge_accuracy(const JudgeModel& j, std::span<const signal::FeatureSequence> feats,
                      std::span<const signal::Label> labels) {
  return accuracy_from_logits(j.logits(feats), labels);
}

Mat stack_frames(std::span<const signal::FeatureSequence> feats, int max_rows, uint64_t seed) {
  if (feats.empty()) throw DataError("stack_frames: no features");
  Eigen::Index total = 0;
  for (const auto& f : feats) total += f.rows();
  const auto cols = feats.front().cols();
  Mat all(total, cols);
  Eigen::Index r = 0;
  for (const auto& f : feats) {
    all.middleRows(r, f.rows()) = f;
    r += f.rows();
  }
  if (max_rows <= 0 || total <= max_rows) return all;
  std::vector<Eigen::Index> idx(static_cast<size_t>(total));
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  for (size_t i = 0; i < static_cast<size_t>(max_rows); ++i) {
    const auto j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<size_t>(max_rows));
  std::sort(idx.begin(), idx.end());
  Mat out(max_rows, cols);
  for (int i = 0; i < max_rows; ++i) out.row(i) = all.row(idx[static_cast<size_t>(i)]);
  return out;
}

}  // namespace gac::evalkit
