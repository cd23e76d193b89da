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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "gac/error.hpp"
#include "gac/evalkit.hpp"

using namespace gac;
using namespace gac::evalkit;

namespace {

Mat gaussian(int n, int d, double mu, uint64_t seed) {
  Rng r(seed);
  Mat m(n, d);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = mu + r.normal();
  return m;
}

struct Data {
  std::vector<signal::FeatureSequence> feats;
  std::vector<signal::Label> labels;
};

Data features(int n, uint64_t seed) {
  const auto c = signal::make_corpus(n, seed);
  Data d;
  for (const auto& clip : c.clips) {
    d.feats.push_back(signal::extract_features(clip.wave));
    d.labels.push_back(clip.label);
  }
  return d;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<size_t>& idx) {
  std::vector<T> out;
  for (size_t i : idx) out.push_back(v[i]);
  return out;
}

}  // namespace

TEST_CASE("lsd") {
  const Mat ref = gaussian(31, 32, 0.0, 1);
  CHECK(lsd(ref, ref) == 0.0);
  // An offset of ln(10) / 10 nats in every band is exactly 1 dB.
  const Mat one_db = (ref.array() + std::log(10.0) / 10.0).matrix();
  CHECK(lsd(ref, one_db) == doctest::Approx(1.0).epsilon(1e-12));
  const Mat two_db = (ref.array() - 2 * std::log(10.0) / 10.0).matrix();
  CHECK(lsd(ref, two_db) == doctest::Approx(2.0).epsilon(1e-12));
  const Mat other = gaussian(31, 32, 0.0, 2);
  CHECK(lsd(ref, other) == doctest::Approx(lsd(other, ref)));
  CHECK(lsd(ref, other) > 0.0);
  CHECK_THROWS_AS(lsd(ref, Mat(30, 32)), ShapeError);
}

TEST_CASE("mmd of a set with itself is not positive") {
  const Mat a = gaussian(100, 4, 0.0, 3);
  CHECK(mmd_frames(a, a) <= 1e-12);
}

TEST_CASE("mmd separates distant Gaussians") {
  const Mat a = gaussian(200, 4, 0.0, 4);
  const Mat b = gaussian(200, 4, 10.0, 5);
  CHECK(mmd_frames(a, b) > 0.5);
  // Two samples from the same law stay near zero.
  CHECK(std::abs(mmd_frames(a, gaussian(200, 4, 0.0, 6))) < 0.02);
}

TEST_CASE("mmd symmetry and permutation invariance") {
  const Mat a = gaussian(60, 3, 0.0, 7);
  const Mat b = gaussian(50, 3, 0.5, 8);
  const double m = mmd_frames(a, b);
  CHECK(mmd_frames(b, a) == doctest::Approx(m).epsilon(1e-12));
  Mat p = a.colwise().reverse();
  CHECK(mmd_frames(p, b) == doctest::Approx(m).epsilon(1e-12));
  CHECK(mmd_frames(a, b, 2.0) != doctest::Approx(m));
  CHECK_THROWS_AS(mmd_frames(a.topRows(1), b), DataError);
  CHECK_THROWS_AS(mmd_frames(Mat::Zero(5, 3), Mat::Zero(5, 3)), DataError);
}

TEST_CASE("median pairwise distance") {
  Mat a(2, 1), b(1, 1);
  a << 0, 1;
  b << 3;
  // Distances: 1, 3, 2 -> median 2.
  CHECK(median_pairwise_distance(a, b) == doctest::Approx(2.0));
}

TEST_CASE("codebook perplexity") {
  std::vector<double> uniform(64, 5.0);
  CHECK(codebook_perplexity(uniform) == doctest::Approx(64.0));
  std::vector<double> one_hot(64, 0.0);
  one_hot[3] = 10;
  CHECK(codebook_perplexity(one_hot) == doctest::Approx(1.0));
  CHECK(codebook_perplexity(std::vector<double>{2, 2, 0, 0}) == doctest::Approx(2.0));
  CHECK(codebook_perplexity(std::vector<int>{0, 1, 0, 1}, 4) == doctest::Approx(2.0));
  const double p = codebook_perplexity(std::vector<double>{5, 1, 1, 3});
  CHECK(p > 1.0);
  CHECK(p < 4.0);
  CHECK_THROWS_AS(codebook_perplexity(std::vector<double>(4, 0.0)), DataError);
}

TEST_CASE("stratified split") {
  const auto d = features(480, 9);
  const auto s = stratified_split(d.labels, 3);
  CHECK(s.train.size() + s.heldout.size() == 480);
  std::vector<int> seen(480, 0);
  for (size_t i : s.train) ++seen[i];
  for (size_t i : s.heldout) ++seen[i];
  for (int n : seen) CHECK(n == 1);
  CHECK(std::is_sorted(s.train.begin(), s.train.end()));
  std::vector<int> per_class(24, 0), held(24, 0);
  for (const auto& l : d.labels) ++per_class[l.class_id];
  for (size_t i : s.heldout) ++held[d.labels[i].class_id];
  for (int c = 0; c < 24; ++c) {
    CHECK(held[c] == per_class[c] - std::lround(0.8 * per_class[c]));
  }
  const auto again = stratified_split(d.labels, 3);
  CHECK(again.train == s.train);
  CHECK(stratified_split(d.labels, 4).train != s.train);
}

TEST_CASE("judge separates ground-truth classes") {
  const auto d = features(1200, 11);
  const auto s = stratified_split(d.labels, 1);
  const auto j = train_judge(pick(d.feats, s.train), pick(d.labels, s.train), 5);
  const double acc = judge_accuracy(j, pick(d.feats, s.heldout), pick(d.labels, s.heldout));
  MESSAGE("held-out judge accuracy " << acc);
  CHECK(acc >= 0.9);

  // Evaluation order does not matter.
  auto order = s.heldout;
  std::reverse(order.begin(), order.end());
  CHECK(judge_accuracy(j, pick(d.feats, order), pick(d.labels, order)) == acc);

  const auto j2 = train_judge(pick(d.feats, s.train), pick(d.labels, s.train), 5);
  CHECK(j2.logits(d.feats) == j.logits(d.feats));
}

TEST_CASE("random logits score near chance") {
  Rng r(13);
  Mat logits(2000, 24);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i) = r.normal();
  std::vector<signal::Label> labels(2000);
  for (auto& l : labels) l.class_id = static_cast<int>(r.below(24));
  CHECK(std::abs(accuracy_from_logits(logits, labels) - 1.0 / 24) <= 0.04);
}

TEST_CASE("stack_frames") {
  const auto d = features(10, 2);
  const Mat all = stack_frames(d.feats, 0, 1);
  CHECK(all.rows() == 310);
  CHECK(all.row(31) == d.feats[1].row(0));
  const Mat some = stack_frames(d.feats, 50, 1);
  CHECK(some.rows() == 50);
  CHECK(some == stack_frames(d.feats, 50, 1));
  CHECK(some != stack_frames(d.feats, 50, 2));
}

TEST_CASE("judge loss gradient matches finite differences") {
  Rng r(21);
  const auto net = tk::make_mlp({5, 7, 24}, tk::Activation::Tanh, tk::Activation::Identity, r);
  const Mat x = gaussian(9, 5, 0.0, 22);
  const std::vector<int> y{0, 3, 23, 7, 7, 12, 1, 19, 4};
  CHECK(tk::finite_diff_check([&](const tk::MlpParams& p) { return judge_loss_grad(p, x, y); },
                              net, 1e-6) < 1e-4);
  // With all-zero weights every class is equally likely.
  auto flat = net;
  for (auto& l : flat.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  CHECK(judge_loss_grad(flat, x, y).first == doctest::Approx(std::log(24.0)));
  CHECK_THROWS_AS(judge_loss_grad(net, x, std::vector<int>{1}), DataError);
}

TEST_CASE("blocked mmd matches the direct formula") {
  const Mat a = gaussian(1500, 3, 0.0, 31);
  const Mat b = gaussian(1300, 3, 0.3, 32);
  const double sigma = 1.7;
  auto k = [&](const Mat& x, const Mat& y) {
    Mat d(x.rows(), y.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) {
        d(i, j) = std::exp(-(x.row(i) - y.row(j)).squaredNorm() / (2 * sigma * sigma));
      }
    }
    return d;
  };
  const Mat kaa = k(a, a), kbb = k(b, b), kab = k(a, b);
  const double m = 1500, n = 1300;
  const double direct = (kaa.sum() - kaa.trace()) / (m * (m - 1)) +
                        (kbb.sum() - kbb.trace()) / (n * (n - 1)) - 2 * kab.sum() / (m * n);
  CHECK(mmd_frames(a, b, sigma) == doctest::Approx(direct).epsilon(1e-9));
  // Above 4000 points the bandwidth comes from a strided subset.
  const Mat big_a = gaussian(4000, 3, 0.0, 33);
  const Mat big_b = gaussian(4000, 3, 0.0, 34);
  const double sub = median_pairwise_distance(big_a(Eigen::seq(0, Eigen::last, 2), Eigen::all),
                                              big_b(Eigen::seq(0, Eigen::last, 2), Eigen::all));
  CHECK(mmd_frames(big_a, big_b) == doctest::Approx(mmd_frames(big_a, big_b, sub)).epsilon(1e-12));
}
