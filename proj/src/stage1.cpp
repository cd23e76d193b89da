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

#include "gac/stage1.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gac/checkpoint.hpp"
#include "gac/config.hpp"
#include "gac/error.hpp"
#include "gac/io.hpp"

namespace gac::stage1 {

void Stage1Config::validate() const {
  if (latent_dim < 1) throw ConfigError("stage1.latent_dim must be >= 1");
  if (codebook_size < 2 || codebook_size > 0xFFFF) {
    throw ConfigError("stage1.codebook_size must lie in [2, 65535]");
  }
  if (downsample != 1 && downsample != 2 && downsample != 4) {
    throw ConfigError("stage1.downsample must be 1, 2 or 4");
  }
  if (beta < 0 || gamma < 0) throw ConfigError("stage1.beta and stage1.gamma must be >= 0");
  if (!(tau > 0)) throw ConfigError("stage1.tau must be > 0");
  if (context != 3) throw ConfigError("stage1.context must be 3");
  if (encoder_hidden < 1 || head_hidden < 0) throw ConfigError("stage1 hidden widths invalid");
  if (steps < 0 || batch_size < 1) throw ConfigError("stage1.steps/batch_size invalid");
  if (!(lr > 0)) throw ConfigError("stage1.lr must be > 0");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("stage1.ema_decay must lie in [0, 1)");
}

FeatureNorm FeatureNorm::fit(std::span<const signal::FeatureSequence> feats) {
  if (feats.empty()) throw DataError("FeatureNorm::fit: no features");
  const auto bands = feats.front().cols();
  Vec sum = Vec::Zero(bands);
  Vec sq = Vec::Zero(bands);
  double n = 0;
  for (const auto& f : feats) {
    sum += f.colwise().sum().transpose();
    sq += f.array().square().matrix().colwise().sum().transpose();
    n += static_cast<double>(f.rows());
  }
  FeatureNorm norm;
  norm.mean = sum / n;
  norm.stddev = (sq / n - norm.mean.cwiseProduct(norm.mean)).cwiseMax(0.0).cwiseSqrt();
  norm.stddev = norm.stddev.cwiseMax(1e-6);
  return norm;
}

Mat FeatureNorm::apply(const Mat& f) const {
  if (f.cols() != mean.size()) throw ShapeError("FeatureNorm: band count mismatch");
  return (f.rowwise() - mean.transpose()).array().rowwise() / stddev.transpose().array();
}

Mat FeatureNorm::invert(const Mat& f) const {
  if (f.cols() != mean.size()) throw ShapeError("FeatureNorm: band count mismatch");
  Mat out = f.array().rowwise() * stddev.transpose().array();
  out.rowwise() += mean.transpose();
  return out;
}

Stage1Model Stage1Model::init(const Stage1Config& cfg, FeatureNorm norm, Rng& rng, int n_bands) {
  cfg.validate();
  Stage1Model m;
  m.cfg = cfg;
  m.norm = std::move(norm);
  Rng enc_rng = rng.split("encoder");
  Rng head_rng = rng.split("head");
  Rng cb_rng = rng.split("codebook");
  const int in = cfg.context * cfg.downsample * n_bands;
  m.encoder = tk::make_mlp({in, cfg.encoder_hidden, cfg.latent_dim}, tk::Activation::Tanh,
                           tk::Activation::Identity, enc_rng);
  std::vector<int> head_widths{cfg.latent_dim};
  if (cfg.head_hidden > 0) head_widths.push_back(cfg.head_hidden);
  head_widths.push_back(signal::kNumClasses);
  m.head = tk::make_mlp(head_widths, tk::Activation::Tanh, tk::Activation::Identity, head_rng);
  m.codebook.resize(cfg.codebook_size, cfg.latent_dim);
  for (int k = 0; k < cfg.codebook_size; ++k) {
    for (int j = 0; j < cfg.latent_dim; ++j) m.codebook(k, j) = cb_rng.normal();
  }
  return m;
}

namespace {

Checkpoint to_checkpoint(const Stage1Model& m) {
  Checkpoint ck;
  ck.put_mlp("enc", m.encoder);
  ck.put("cb", m.codebook);
  ck.put_mlp("head", m.head);
  ck.put("norm.mean", m.norm.mean);
  ck.put("norm.std", m.norm.stddev);
  return ck;
}

}  // namespace

void Stage1Model::save(const std::filesystem::path& path) const {
  to_checkpoint(*this).save(path);
  io::write_text(sidecar_path(path), to_json(cfg).dump(2) + "\n");
}

Stage1Model Stage1Model::load(const std::filesystem::path& path) {
  const auto side = sidecar_path(path);
  if (!std::filesystem::exists(side)) {
    throw ConfigError("missing stage-1 config sidecar " + side.string());
  }
  Stage1Config cfg;
  try {
    from_json_strict(json::parse(io::read_text(side)), cfg);
  } catch (const json::exception& e) {
    throw ConfigError("bad stage-1 sidecar " + side.string() + ": " + e.what());
  }
  const auto ck = Checkpoint::load(path);
  FeatureNorm norm{ck.get_vec("norm.mean"), ck.get_vec("norm.std")};
  Rng dummy(0);
  auto m = Stage1Model::init(cfg, norm, dummy, static_cast<int>(norm.mean.size()));
  ck.get_mlp("enc", m.encoder);
  ck.get_mlp("head", m.head);
  const auto& cb = ck.get("cb");
  if (cb.rows() != cfg.codebook_size || cb.cols() != cfg.latent_dim) {
    throw ShapeError("stage-1 codebook shape does not match its config");
  }
  m.codebook = cb;
  return m;
}

uint32_t Stage1Model::digest() const {
  // The serialized form ends with its own CRC; hashing those bytes too would
  // give the same residue for every model.
  const auto bytes = to_checkpoint(*this).serialize();
  return io::crc32(std::span(bytes).first(bytes.size() - 4));
}

Mat encoder_inputs(const Mat& normalized, int downsample) {
  const auto t_frames = normalized.rows();
  const auto bands = normalized.cols();
  const int s = downsample;
  const auto rows = (t_frames + s - 1) / s;
  // blocks(r) = frames r*s .. r*s+s-1 flattened, zero past the end.
  Mat blocks = Mat::Zero(rows, s * bands);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int j = 0; j < s; ++j) {
      const auto t = r * s + j;
      if (t < t_frames) blocks.block(r, j * bands, 1, bands) = normalized.row(t);
    }
  }
  const auto w = s * bands;
  Mat out(rows, 3 * w);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto prev = std::max<Eigen::Index>(r - 1, 0);
    const auto next = std::min<Eigen::Index>(r + 1, rows - 1);
    out.block(r, 0, 1, w) = blocks.row(prev);
    out.block(r, w, 1, w) = blocks.row(r);
    out.block(r, 2 * w, 1, w) = blocks.row(next);
  }
  return out;
}

Mat encode_frames(const Stage1Model& m, const signal::FeatureSequence& f) {
  if (f.cols() != m.norm.mean.size()) {
    throw ShapeError("encode_frames: feature band count does not match the model");
  }
  return tk::mlp_apply(m.encoder, encoder_inputs(m.norm.apply(f), m.cfg.downsample));
}

namespace {

Mat squared_distances(const Mat& latents, const Mat& codebook) {
  Mat d(latents.rows(), codebook.rows());
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    for (Eigen::Index k = 0; k < codebook.rows(); ++k) {
      d(i, k) = (latents.row(i) - codebook.row(k)).squaredNorm();
    }
  }
  return d;
}

}  // namespace

VqResult vq_quantize(const Mat& codebook, const Mat& latents, double tau, int downsample) {
  if (latents.cols() != codebook.cols()) {
    throw ShapeError("vq_quantize: latent dim " + std::to_string(latents.cols()) +
                     " != code dim " + std::to_string(codebook.cols()));
  }
  VqResult r;
  r.distances = squared_distances(latents, codebook);
  r.tokens.codebook_size = static_cast<int>(codebook.rows());
  r.tokens.downsample = downsample;
  r.tokens.tokens.resize(latents.rows());
  r.quantized.resize(latents.rows(), latents.cols());
  r.soft_assign.resize(latents.rows(), codebook.rows());
  for (Eigen::Index i = 0; i < latents.rows(); ++i) {
    Eigen::Index best = 0;
    const auto& d = r.distances.row(i);
    for (Eigen::Index k = 1; k < codebook.rows(); ++k) {
      if (d(k) < d(best)) best = k;
    }
    r.tokens.tokens[i] = static_cast<int>(best);
    r.quantized.row(i) = codebook.row(best);
    const double mn = d.minCoeff();
    auto e = (-(d.array() - mn) / tau).exp();
    r.soft_assign.row(i) = e / e.sum();
  }
  return r;
}

namespace {

void check_probability_rows(const Mat& p) {
  if (p.rows() == 0) throw DataError("info_loss: no soft-assignment rows");
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if ((p.row(i).array() < 0.0).any() || std::abs(p.row(i).sum() - 1.0) > 1e-6) {
      throw DataError("info_loss: row " + std::to_string(i) + " is not a probability vector");
    }
  }
}

constexpr double kProbFloor = 1e-300;

}  // namespace

double info_loss(const Mat& soft_assign) {
  check_probability_rows(soft_assign);
  const RowVec pbar = soft_assign.colwise().mean();
  double loss = std::log(static_cast<double>(soft_assign.cols()));
  for (Eigen::Index k = 0; k < pbar.size(); ++k) {
    if (pbar(k) > 0.0) loss += pbar(k) * std::log(pbar(k));
  }
  return std::max(loss, 0.0);
}

Mat info_loss_grad(const Mat& soft_assign) {
  const RowVec pbar = soft_assign.colwise().mean();
  RowVec g(pbar.size());
  for (Eigen::Index k = 0; k < pbar.size(); ++k) {
    g(k) = (std::log(std::max(pbar(k), kProbFloor)) + 1.0) / static_cast<double>(soft_assign.rows());
  }
  return g.replicate(soft_assign.rows(), 1);
}

double semantic_loss_grad(const Stage1Model& m, const Mat& quantized, signal::Label label,
                          Mat& dquantized) {
  if (quantized.cols() != m.head.in_dim()) throw ShapeError("semantic_loss: latent dim mismatch");
  if (label.class_id < 0 || label.class_id >= signal::kNumClasses) {
    throw RangeError("semantic_loss: invalid class_id " + std::to_string(label.class_id));
  }
  const Mat pooled = quantized.colwise().mean();
  auto [logits, cache] = tk::mlp_forward(m.head, pooled);
  RowVec dlogits;
  const double loss = tk::softmax_cross_entropy(logits.row(0), label.class_id, dlogits);
  auto [g, dpooled] = tk::mlp_backward(m.head, cache, Mat(dlogits));
  dquantized = dpooled.replicate(quantized.rows(), 1) / static_cast<double>(quantized.rows());
  return loss;
}

double semantic_loss(const Stage1Model& m, const Mat& quantized, signal::Label label) {
  Mat unused;
  return semantic_loss_grad(m, quantized, label, unused);
}

BatchLoss batch_loss(const Stage1Model& m, std::span<const Mat> enc_inputs,
                     std::span<const signal::Label> labels, bool bypass_quantizer) {
  const auto b = static_cast<Eigen::Index>(enc_inputs.size());
  if (b == 0 || labels.size() != enc_inputs.size()) {
    throw ShapeError("batch_loss: need one label per clip and a non-empty batch");
  }
  const auto rows = enc_inputs.front().rows();
  const auto in = enc_inputs.front().cols();
  const double tau = m.cfg.tau;

  Mat x(b * rows, in);
  for (Eigen::Index i = 0; i < b; ++i) {
    if (enc_inputs[i].rows() != rows || enc_inputs[i].cols() != in) {
      throw ShapeError("batch_loss: clips in a batch must share a shape");
    }
    x.middleRows(i * rows, rows) = enc_inputs[i];
  }

  BatchLoss out;
  auto [z, enc_cache] = tk::mlp_forward(m.encoder, x);
  VqResult vq = vq_quantize(m.codebook, z, tau, m.cfg.downsample);
  const Mat& q = bypass_quantizer ? z : vq.quantized;

  // Semantic alignment on the time-pooled codes.
  Mat pooled(b, z.cols());
  for (Eigen::Index i = 0; i < b; ++i) pooled.row(i) = q.middleRows(i * rows, rows).colwise().mean();
  auto [logits, head_cache] = tk::mlp_forward(m.head, pooled);
  Mat dlogits(b, logits.cols());
  double ce = 0.0;
  for (Eigen::Index i = 0; i < b; ++i) {
    const int cls = labels[i].class_id;
    if (cls < 0 || cls >= signal::kNumClasses) {
      throw RangeError("batch_loss: invalid class_id " + std::to_string(cls));
    }
    RowVec d;
    ce += tk::softmax_cross_entropy(logits.row(i), cls, d);
    dlogits.row(i) = d / static_cast<double>(b);
  }
  ce /= static_cast<double>(b);
  auto [head_grad, dpooled] = tk::mlp_backward(m.head, head_cache, dlogits);

  Mat dz(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < b; ++i) {
    dz.middleRows(i * rows, rows) =
        dpooled.row(i).replicate(rows, 1) / static_cast<double>(rows);
  }

  // Commitment, straight-through: only the latents move.
  double commit = 0.0;
  if (!bypass_quantizer) {
    const Mat diff = z - vq.quantized;
    const double n = static_cast<double>(z.rows());
    commit = diff.squaredNorm() / n;
    dz += (2.0 * m.cfg.gamma / n) * diff;
  }

  // Information constraint through the soft assignments.
  const double info = info_loss(vq.soft_assign);
  if (m.cfg.beta > 0.0) {
    const Mat g = m.cfg.beta * info_loss_grad(vq.soft_assign);
    const Mat& p = vq.soft_assign;
    const Vec inner = (p.array() * g.array()).rowwise().sum();
    // d/d logits, with logits = -distance / tau.
    Mat dlogit = p.array() * (g.colwise() - inner).array();
    const Mat ddist = -dlogit / tau;
    const Vec row_sum = ddist.rowwise().sum();
    dz += 2.0 * (z.array().colwise() * row_sum.array()).matrix() - 2.0 * ddist * m.codebook;
  }

  auto [enc_grad, unused_dx] = tk::mlp_backward(m.encoder, enc_cache, dz);

  out.semantic = ce;
  out.commit = commit;
  out.info = info;
  out.total = ce + m.cfg.gamma * commit + m.cfg.beta * info;
  out.encoder_grad = std::move(enc_grad);
  out.head_grad = std::move(head_grad);
  out.latents = std::move(z);
  out.dlatents = std::move(dz);
  out.tokens = std::move(vq.tokens.tokens);
  return out;
}

namespace {

double hard_perplexity(const std::vector<int>& tokens, int k) {
  std::vector<double> hist(k, 0.0);
  for (int t : tokens) hist[t] += 1.0;
  const double n = static_cast<double>(tokens.size());
  double h = 0.0;
  for (double c : hist) {
    if (c > 0) h -= (c / n) * std::log(c / n);
  }
  return std::exp(h);
}

}  // namespace

TrainResult train_stage1(std::span<const signal::FeatureSequence> features,
                         std::span<const signal::Label> labels, const Stage1Config& cfg,
                         uint64_t seed) {
  cfg.validate();
  if (features.empty()) throw DataError("train_stage1: empty corpus");
  if (features.size() != labels.size()) throw ShapeError("train_stage1: features/labels size mismatch");

  Rng root(seed);
  Rng init_rng = root.split("init");
  TrainResult res;
  auto& m = res.model;
  m = Stage1Model::init(cfg, FeatureNorm::fit(features), init_rng,
                        static_cast<int>(features.front().cols()));

  std::vector<Mat> inputs;
  inputs.reserve(features.size());
  for (const auto& f : features) inputs.push_back(encoder_inputs(m.norm.apply(f), cfg.downsample));

  const int k_codes = cfg.codebook_size;
  const auto n_clips = static_cast<uint64_t>(features.size());

  // Codebook initialised from encoder outputs at distinct random rows.
  {
    Rng pick = root.split("codebook-init");
    const auto rows = inputs.front().rows();
    for (int k = 0; k < k_codes; ++k) {
      const auto clip = pick.below(n_clips);
      const auto row = static_cast<Eigen::Index>(pick.below(static_cast<uint64_t>(rows)));
      m.codebook.row(k) = tk::mlp_apply(m.encoder, inputs[clip].row(row));
      // Small jitter keeps rows distinct even when the same row is drawn twice.
      for (int j = 0; j < cfg.latent_dim; ++j) m.codebook(k, j) += 1e-3 * pick.normal();
    }
  }
  Vec ema_count = Vec::Ones(k_codes);
  Mat ema_sum = m.codebook;

  auto enc_adam = tk::AdamState::fresh(m.encoder, {.lr = cfg.lr});
  auto head_adam = tk::AdamState::fresh(m.head, {.lr = cfg.lr});
  const Rng batch_root = root.split("batches");
  const Rng restart_root = root.split("restart");
  constexpr double kDeadFraction = 0.03;

  std::vector<Mat> batch_in(cfg.batch_size);
  std::vector<signal::Label> batch_lab(cfg.batch_size);
  res.log.steps.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng br = batch_root.split(static_cast<uint64_t>(step));
    for (int i = 0; i < cfg.batch_size; ++i) {
      const auto idx = br.below(n_clips);
      batch_in[i] = inputs[idx];
      batch_lab[i] = labels[idx];
    }
    BatchLoss bl = batch_loss(m, batch_in, batch_lab);
    if (!std::isfinite(bl.total)) {
      throw DivergenceError("stage-1 training diverged at step " + std::to_string(step) +
                            " (loss " + std::to_string(bl.total) + ")");
    }
    tk::adam_step(enc_adam, m.encoder, bl.encoder_grad);
    tk::adam_step(head_adam, m.head, bl.head_grad);

    // EMA codebook update with Laplace-smoothed counts.
    Vec counts = Vec::Zero(k_codes);
    Mat sums = Mat::Zero(k_codes, cfg.latent_dim);
    for (size_t i = 0; i < bl.tokens.size(); ++i) {
      counts(bl.tokens[i]) += 1.0;
      sums.row(bl.tokens[i]) += bl.latents.row(static_cast<Eigen::Index>(i));
    }
    const double decay = cfg.ema_decay;
    ema_count = decay * ema_count + (1.0 - decay) * counts;
    ema_sum = decay * ema_sum + (1.0 - decay) * sums;
    const double total = ema_count.sum();
    constexpr double kSmooth = 1e-5;
    for (int k = 0; k < k_codes; ++k) {
      const double n = (ema_count(k) + kSmooth) / (total + k_codes * kSmooth) * total;
      m.codebook.row(k) = ema_sum.row(k) / n;
    }

    // Codes whose usage has decayed to almost nothing are moved onto a
    // latent from the current batch.
    Rng restart = restart_root.split(static_cast<uint64_t>(step));
    const double dead_below = kDeadFraction * total / k_codes;
    for (int k = 0; k < k_codes; ++k) {
      if (ema_count(k) >= dead_below) continue;
      const auto row = static_cast<Eigen::Index>(restart.below(bl.tokens.size()));
      ema_count(k) = total / k_codes;
      m.codebook.row(k) = bl.latents.row(row);
      ema_sum.row(k) = m.codebook.row(k) * ema_count(k);
    }

    res.log.steps.push_back(
        {bl.total, bl.semantic, bl.info, bl.commit, hard_perplexity(bl.tokens, k_codes)});
  }
  return res;
}

TokenStream tokenize(const Stage1Model& m, const signal::FeatureSequence& f) {
  return vq_quantize(m.codebook, encode_frames(m, f), m.cfg.tau, m.cfg.downsample).tokens;
}

}  // namespace gac::stage1
