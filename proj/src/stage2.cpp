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

#include "gac/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "gac/checkpoint.hpp"
#include "gac/config.hpp"
#include "gac/error.hpp"
#include "gac/io.hpp"

namespace gac::stage2 {

std::string to_string(Tier t) {
  switch (t) {
    case Tier::Small:
      return "small";
    case Tier::Medium:
      return "medium";
    case Tier::Large:
      return "large";
  }
  return "medium";
}

Tier tier_from_string(const std::string& s) {
  if (s == "small") return Tier::Small;
  if (s == "medium") return Tier::Medium;
  if (s == "large") return Tier::Large;
  throw ConfigError("unknown tier '" + s + "' (expected small, medium or large)");
}

Stage2Config Stage2Config::for_tier(Tier t) {
  Stage2Config c;
  c.tier = to_string(t);
  switch (t) {
    case Tier::Small:
      c.hidden_width = 32;
      c.depth = 2;
      break;
    case Tier::Medium:
      c.hidden_width = 64;
      c.depth = 3;
      break;
    case Tier::Large:
      c.hidden_width = 128;
      c.depth = 4;
      break;
  }
  return c;
}

void Stage2Config::validate() const {
  tier_from_string(tier);
  tk::activation_from_string(activation);
  if (hidden_width < 1 || depth < 1) throw ConfigError("stage2 hidden_width/depth must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("stage2.window must be a positive odd number");
  if (ode_steps < 1) throw ConfigError("stage2.ode_steps must be >= 1");
  if (steps < 0 || batch_clips < 1) throw ConfigError("stage2.steps/batch_clips invalid");
  if (!(lr > 0)) throw ConfigError("stage2.lr must be > 0");
  if (lr_schedule != "constant" && lr_schedule != "cosine") {
    throw ConfigError("stage2.lr_schedule must be 'constant' or 'cosine'");
  }
}

VelocityModel VelocityModel::init(const Stage2Config& cfg, int feat_dim, int cond_dim, Rng& rng) {
  cfg.validate();
  VelocityModel v;
  v.cfg = cfg;
  v.feat_dim = feat_dim;
  v.cond_dim = cond_dim;
  std::vector<int> widths{v.input_dim()};
  for (int i = 0; i < cfg.depth; ++i) widths.push_back(cfg.hidden_width);
  widths.push_back(feat_dim);
  v.net = tk::make_mlp(widths, tk::activation_from_string(cfg.activation),
                       tk::Activation::Identity, rng);
  return v;
}

void VelocityModel::save(const std::filesystem::path& path) const {
  Checkpoint ck;
  ck.put_mlp("vel", net);
  ck.save(path);
  json side{{"config", to_json(cfg)}, {"feat_dim", feat_dim}, {"cond_dim", cond_dim}};
  io::write_text(sidecar_path(path), side.dump(2) + "\n");
}

VelocityModel VelocityModel::load(const std::filesystem::path& path) {
  const auto side_path = sidecar_path(path);
  if (!std::filesystem::exists(side_path)) {
    throw ConfigError("missing stage-2 config sidecar " + side_path.string());
  }
  Stage2Config cfg;
  int feat_dim = 0, cond_dim = 0;
  try {
    const auto side = json::parse(io::read_text(side_path));
    for (const auto& [k, _] : side.items()) {
      if (k != "config" && k != "feat_dim" && k != "cond_dim") {
        throw ConfigError("unknown key '" + k + "' in " + side_path.string());
      }
    }
    from_json_strict(side.at("config"), cfg);
    feat_dim = side.at("feat_dim").get<int>();
    cond_dim = side.at("cond_dim").get<int>();
  } catch (const json::exception& e) {
    throw ConfigError("bad stage-2 sidecar " + side_path.string() + ": " + e.what());
  }
  Rng dummy(0);
  auto v = VelocityModel::init(cfg, feat_dim, cond_dim, dummy);
  Checkpoint::load(path).get_mlp("vel", v.net);
  return v;
}

Eigen::RowVectorXd time_embedding(double t) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  Eigen::RowVectorXd e(kTimeEmbedDim);
  e << t, std::sin(kTwoPi * t), std::cos(kTwoPi * t), std::sin(2 * kTwoPi * t),
      std::cos(2 * kTwoPi * t);
  return e;
}

Mat velocity_inputs(const VelocityModel& v, const Mat& xt, const Vec& t, const Mat& cond) {
  const auto n = xt.rows();
  if (xt.cols() != v.feat_dim || t.size() != n || cond.rows() != n || cond.cols() != v.cond_dim) {
    throw ShapeError("velocity: state/time/condition shapes do not match the model");
  }
  Mat in(n, v.input_dim());
  in.leftCols(v.feat_dim) = xt;
  for (Eigen::Index i = 0; i < n; ++i) {
    in.block(i, v.feat_dim, 1, kTimeEmbedDim) = time_embedding(t(i));
  }
  if (v.cond_dim > 0) in.rightCols(v.cond_dim) = cond;
  return in;
}

Mat velocity(const VelocityModel& v, const Mat& xt, const Vec& t, const Mat& cond) {
  return tk::mlp_apply(v.net, velocity_inputs(v, xt, t, cond));
}

Vec interpolate(const Vec& x0, const Vec& x1, double t) {
  if (!(t >= 0.0 && t <= 1.0)) throw RangeError("interpolate: t must lie in [0, 1]");
  if (x0.size() != x1.size()) throw ShapeError("interpolate: x0 and x1 differ in size");
  return t * x1 + (1.0 - t) * x0;
}

FlowBatch FlowBatch::from_items(std::span<const FlowBatchItem> items) {
  if (items.empty()) throw DataError("flow batch is empty");
  const auto f = items.front().x1.size();
  const auto c = items.front().cond.size();
  FlowBatch b;
  const auto n = static_cast<Eigen::Index>(items.size());
  b.x1.resize(n, f);
  b.x0.resize(n, f);
  b.cond.resize(n, c);
  b.t.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& it = items[i];
    if (it.x1.size() != f || it.x0.size() != f || it.cond.size() != c) {
      throw ShapeError("flow batch items differ in shape");
    }
    if (!(it.t >= 0.0 && it.t <= 1.0)) throw RangeError("flow batch item t outside [0, 1]");
    b.x1.row(i) = it.x1.transpose();
    b.x0.row(i) = it.x0.transpose();
    if (c > 0) b.cond.row(i) = it.cond.transpose();
    b.t(i) = it.t;
  }
  return b;
}

namespace {

Mat interpolate_rows(const FlowBatch& b) {
  return (b.x1.array().colwise() * b.t.array() +
          b.x0.array().colwise() * (1.0 - b.t.array()))
      .matrix();
}

void require_finite(const Mat& m, const char* what) {
  if (!m.allFinite()) throw DataError(std::string("fm_loss: non-finite ") + what);
}

}  // namespace

double fm_loss(const VelocityModel& v, const FlowBatch& batch) {
  if (batch.size() == 0) throw DataError("fm_loss: empty batch");
  const Mat pred = velocity(v, interpolate_rows(batch), batch.t, batch.cond);
  require_finite(pred, "activations");
  return (pred - (batch.x1 - batch.x0)).rowwise().squaredNorm().mean();
}

double fm_loss(const VelocityModel& v, std::span<const FlowBatchItem> items) {
  return fm_loss(v, FlowBatch::from_items(items));
}

std::pair<double, tk::GradBundle> fm_loss_grad(const VelocityModel& v, const FlowBatch& batch) {
  if (batch.size() == 0) throw DataError("fm_loss: empty batch");
  auto [pred, cache] =
      tk::mlp_forward(v.net, velocity_inputs(v, interpolate_rows(batch), batch.t, batch.cond));
  require_finite(pred, "activations");
  const Mat diff = pred - (batch.x1 - batch.x0);
  const double n = static_cast<double>(batch.size());
  const double loss = diff.rowwise().squaredNorm().sum() / n;
  auto [g, dx] = tk::mlp_backward(v.net, cache, Mat((2.0 / n) * diff));
  return {loss, std::move(g)};
}

Mat euler_integrate(const VelocityModel& v, const Mat& x0, const Mat& cond, int n) {
  if (n < 1) throw ConfigError("euler: step count must be >= 1");
  Mat x = x0;
  const double h = 1.0 / n;
  Vec t(x.rows());
  for (int i = 0; i < n; ++i) {
    t.setConstant(static_cast<double>(i) / n);
    x += h * velocity(v, x, t, cond);
  }
  return x;
}

Mat euler_sample(const VelocityModel& v, const Mat& cond, int n, uint64_t seed) {
  Rng rng(seed);
  Mat x0(cond.rows(), v.feat_dim);
  for (Eigen::Index i = 0; i < x0.rows(); ++i) {
    for (Eigen::Index j = 0; j < x0.cols(); ++j) x0(i, j) = rng.normal();
  }
  return euler_integrate(v, x0, cond, n);
}

Mat frame_conditions(const Mat& codebook, std::span<const int> tokens, int downsample,
                     int window, int frames) {
  if (tokens.empty()) throw DataError("frame_conditions: no tokens");
  const auto d = codebook.cols();
  std::vector<int> per_frame(frames);
  for (int i = 0; i < frames; ++i) {
    const auto j = std::min<size_t>(static_cast<size_t>(i / downsample), tokens.size() - 1);
    const int tok = tokens[j];
    if (tok < 0 || tok >= codebook.rows()) throw RangeError("frame_conditions: token out of range");
    per_frame[i] = tok;
  }
  const int half = window / 2;
  Mat c(frames, window * d + 1);
  for (int i = 0; i < frames; ++i) {
    for (int w = 0; w < window; ++w) {
      const int f = std::clamp(i + w - half, 0, frames - 1);
      c.block(i, w * d, 1, d) = codebook.row(per_frame[f]);
    }
    c(i, window * d) = frames > 1 ? static_cast<double>(i) / (frames - 1) : 0.0;
  }
  return c;
}

bool loss_plateaued(std::span<const double> loss) {
  constexpr size_t kWindow = 500;
  constexpr size_t kSpan = 2000;
  if (loss.size() < kSpan + kWindow) return false;
  auto mean = [&](size_t end) {
    double s = 0;
    for (size_t i = end - kWindow; i < end; ++i) s += loss[i];
    return s / kWindow;
  };
  const double later = mean(loss.size());
  const double earlier = mean(loss.size() - kSpan);
  return std::abs(later - earlier) < 0.01 * std::abs(earlier);
}

TrainResult train_flow(const FlowTrainData& data, const Stage2Config& cfg, int groups_per_step,
                       uint64_t seed) {
  cfg.validate();
  if (data.group_size < 1 || data.x1.rows() < data.group_size ||
      data.x1.rows() % data.group_size != 0) {
    throw DataError("train_flow: data rows must be a positive multiple of group_size");
  }
  if (data.cond.rows() != data.x1.rows()) throw ShapeError("train_flow: cond rows != x1 rows");
  const auto feat = static_cast<int>(data.x1.cols());
  const auto cdim = static_cast<int>(data.cond.cols());
  const Rng root(seed);
  Rng init_rng = root.split("init");
  TrainResult res;
  res.model = VelocityModel::init(cfg, feat, cdim, init_rng);
  auto& v = res.model;
  auto adam = tk::AdamState::fresh(v.net, {.lr = cfg.lr});
  const bool cosine = cfg.lr_schedule == "cosine";

  const uint64_t n_groups = static_cast<uint64_t>(data.x1.rows() / data.group_size);
  const auto batch_rows = static_cast<Eigen::Index>(groups_per_step) * data.group_size;
  const Rng batch_root = root.split("batches");
  const Rng noise_root = root.split("noise");

  FlowBatch b;
  b.x1.resize(batch_rows, feat);
  b.x0.resize(batch_rows, feat);
  b.cond.resize(batch_rows, cdim);
  b.t.resize(batch_rows);
  res.log.loss.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    Rng br = batch_root.split(static_cast<uint64_t>(step));
    for (int g = 0; g < groups_per_step; ++g) {
      const auto grp = static_cast<Eigen::Index>(br.below(n_groups));
      const auto dst = static_cast<Eigen::Index>(g) * data.group_size;
      b.x1.middleRows(dst, data.group_size) = data.x1.middleRows(grp * data.group_size, data.group_size);
      if (cdim > 0) {
        b.cond.middleRows(dst, data.group_size) =
            data.cond.middleRows(grp * data.group_size, data.group_size);
      }
    }
    for (Eigen::Index i = 0; i < batch_rows; ++i) {
      Rng nr = noise_root.split(static_cast<uint64_t>(step), static_cast<uint64_t>(i));
      b.t(i) = nr.uniform();
      for (int j = 0; j < feat; ++j) b.x0(i, j) = nr.normal();
    }
    auto [loss, grad] = fm_loss_grad(v, b);
    if (!std::isfinite(loss)) {
      throw DivergenceError("stage-2 training diverged at step " + std::to_string(step));
    }
    if (cosine) {
      adam.cfg.lr = 0.5 * cfg.lr * (1.0 + std::cos(std::numbers::pi * step / cfg.steps));
    }
    tk::adam_step(adam, v.net, grad);
    res.log.loss.push_back(loss);
  }

  const size_t tail = std::min<size_t>(1000, res.log.loss.size());
  double s = 0;
  for (size_t i = res.log.loss.size() - tail; i < res.log.loss.size(); ++i) s += res.log.loss[i];
  res.log.final_loss = tail > 0 ? s / static_cast<double>(tail) : 0.0;
  res.log.final_loss_bits_per_frame = res.log.final_loss / (2.0 * std::numbers::ln2);
  res.log.plateaued = loss_plateaued(res.log.loss);
  res.log.tokens_consumed =
      static_cast<long>(cfg.steps) * groups_per_step * data.tokens_per_group;
  return res;
}

TrainResult train_stage2(std::span<const signal::FeatureSequence> features,
                         const stage1::Stage1Model& frozen, const Stage2Config& cfg,
                         uint64_t seed) {
  if (features.empty()) throw DataError("train_stage2: empty corpus");
  const auto frames = static_cast<int>(features.front().rows());
  const auto bands = features.front().cols();
  const int cdim = cfg.window * static_cast<int>(frozen.codebook.cols()) + 1;
  FlowTrainData data;
  data.group_size = frames;
  data.tokens_per_group = frozen.cfg.tokens_per_clip(frames);
  data.x1.resize(static_cast<Eigen::Index>(features.size()) * frames, bands);
  data.cond.resize(data.x1.rows(), cdim);
  for (size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (f.rows() != frames || f.cols() != bands) throw ShapeError("train_stage2: ragged features");
    const auto row = static_cast<Eigen::Index>(i) * frames;
    data.x1.middleRows(row, frames) = frozen.norm.apply(f);
    const auto toks = stage1::tokenize(frozen, f);
    data.cond.middleRows(row, frames) =
        frame_conditions(frozen.codebook, toks.tokens, frozen.cfg.downsample, cfg.window, frames);
  }
  return train_flow(data, cfg, cfg.batch_clips, seed);
}

}  // namespace gac::stage2
