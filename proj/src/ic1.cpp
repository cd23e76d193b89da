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

#include "gac/ic1.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "gac/codec.hpp"
#include "gac/error.hpp"
#include "gac/prng.hpp"

namespace gac::ic1 {

double capacity_fit(const CapacityRecord& r) {
  if (r.N == 0.0 || r.D == 0.0) throw RangeError("capacity_fit: N and D must be non-zero");
  return r.D * (r.H - r.L) / r.N;
}

EntropyEstimate entropy_estimate(const tk::Mat& frames, int downsample) {
  if (frames.rows() < 2) throw DataError("entropy_estimate: need at least two frames");
  if (downsample < 1) throw RangeError("entropy_estimate: downsample must be >= 1");
  EntropyEstimate e;
  const tk::RowVec mean = frames.colwise().mean();
  const tk::RowVec var = (frames.rowwise() - mean).array().square().colwise().mean();
  double per_frame = 0.0;
  for (Eigen::Index f = 0; f < var.size(); ++f) {
    if (var(f) < 1e-12) {
      e.skipped_bands.push_back(static_cast<int>(f));
      continue;
    }
    per_frame += 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * var(f));
  }
  e.bits_per_token = std::max(0.0, per_frame * downsample);
  return e;
}

EntropyEstimate entropy_estimate(std::span<const signal::FeatureSequence> feats, int downsample) {
  if (feats.size() < 100) {
    throw DataError("entropy_estimate: need at least 100 clips, got " +
                    std::to_string(feats.size()));
  }
  auto e = entropy_estimate(evalkit::stack_frames(feats, 0, 0), downsample);
  if (!e.skipped_bands.empty()) {
    std::cerr << "warning: entropy_estimate skipped " << e.skipped_bands.size()
              << " constant band(s)\n";
  }
  return e;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double point_bitrate(int k, int s) {
  codec::BitstreamHeader h;
  h.codebook_size = static_cast<uint16_t>(k);
  h.downsample = static_cast<uint8_t>(s);
  return codec::bitrate(h);
}

}  // namespace

TradeoffTable tradeoff_table(std::span<const CapacityRecord> records) {
  if (records.size() < 2) throw DataError("tradeoff_table: need at least two records");
  TradeoffTable t;
  std::vector<double> etas;
  for (const auto& r : records) etas.push_back(capacity_fit(r));
  t.eta_pooled = median(etas);
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    t.rows.push_back({r.R, r.N, r.L, etas[i], r.H - r.R - t.eta_pooled * r.N / r.D});
  }
  return t;
}

std::vector<TierRanking> rank_tiers(std::span<const ScalingRecord> records) {
  // bitrate -> tier -> mmd values, with tiers kept in first-seen order
  std::map<double, std::vector<std::pair<std::string, std::vector<double>>>> groups;
  for (const auto& r : records) {
    auto& tiers = groups[r.metrics.bitrate_bps];
    auto it = std::find_if(tiers.begin(), tiers.end(),
                           [&](const auto& p) { return p.first == r.tier; });
    if (it == tiers.end()) {
      tiers.push_back({r.tier, {}});
      it = tiers.end() - 1;
    }
    it->second.push_back(r.metrics.mmd);
  }
  std::vector<TierRanking> out;
  for (const auto& [bps, tiers] : groups) {
    TierRanking rk{bps, {}};
    for (const auto& [tier, v] : tiers) rk.tiers.push_back({tier, mean_of(v)});
    std::stable_sort(rk.tiers.begin(), rk.tiers.end(),
                     [](const auto& a, const auto& b) { return a.second < b.second; });
    out.push_back(std::move(rk));
  }
  return out;
}

EvalContext EvalContext::build(const signal::Corpus& corpus, uint64_t split_seed,
                               const evalkit::JudgeConfig& jcfg) {
  if (corpus.clips.empty()) throw DataError("empty corpus");
  std::vector<signal::Label> labels;
  for (const auto& c : corpus.clips) labels.push_back(c.label);
  const auto split = evalkit::stratified_split(labels, split_seed);
  if (split.heldout.empty() || split.train.empty()) {
    throw DataError("corpus too small for an 80/20 split");
  }
  EvalContext ctx;
  for (size_t i : split.train) {
    ctx.train_feats.push_back(signal::extract_features(corpus.clips[i].wave));
    ctx.train_labels.push_back(labels[i]);
  }
  for (size_t i : split.heldout) {
    ctx.heldout_feats.push_back(signal::extract_features(corpus.clips[i].wave));
    ctx.heldout_labels.push_back(labels[i]);
  }
  ctx.judge = evalkit::train_judge(ctx.train_feats, ctx.train_labels, split_seed, jcfg);
  return ctx;
}

evalkit::MetricReport evaluate_codec(const stage1::Stage1Model& s1,
                                     const stage2::VelocityModel& v, const EvalContext& ctx,
                                     const evalkit::EvalConfig& cfg) {
  const auto& feats = ctx.heldout_feats;
  if (feats.empty()) throw DataError("evaluate_codec: no held-out clips");
  const auto frames = feats.front().rows();
  const auto n = static_cast<Eigen::Index>(feats.size());

  tk::Mat cond(n * frames, v.cond_dim);
  tk::Mat x0(n * frames, v.feat_dim);
  std::vector<int> all_tokens;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& f = feats[static_cast<size_t>(i)];
    if (f.rows() != frames) throw ShapeError("evaluate_codec: ragged features");
    const auto ts = stage1::tokenize(s1, f);
    all_tokens.insert(all_tokens.end(), ts.tokens.begin(), ts.tokens.end());
    cond.middleRows(i * frames, frames) = stage2::frame_conditions(
        s1.codebook, ts.tokens, s1.cfg.downsample, v.cfg.window, static_cast<int>(frames));
    Rng rng(splitmix64(cfg.decode_seed ^ static_cast<uint64_t>(i)));
    for (Eigen::Index r = 0; r < frames; ++r) {
      for (Eigen::Index c = 0; c < x0.cols(); ++c) x0(i * frames + r, c) = rng.normal();
    }
  }
  const tk::Mat rec_all = s1.norm.invert(stage2::euler_integrate(v, x0, cond, cfg.ode_steps));
  if (!rec_all.allFinite()) throw DivergenceError("decoded features are not finite");

  std::vector<signal::FeatureSequence> rec(static_cast<size_t>(n));
  double lsd_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    rec[static_cast<size_t>(i)] = rec_all.middleRows(i * frames, frames);
    lsd_sum += evalkit::lsd(feats[static_cast<size_t>(i)], rec[static_cast<size_t>(i)]);
  }
  evalkit::MetricReport m;
  m.bitrate_bps = point_bitrate(s1.cfg.codebook_size, s1.cfg.downsample);
  m.lsd = lsd_sum / static_cast<double>(n);
  const Rng sub(cfg.decode_seed);
  m.mmd = evalkit::mmd_frames(evalkit::stack_frames(feats, cfg.mmd_max_frames, sub.split("ref").seed()),
                              evalkit::stack_frames(rec, cfg.mmd_max_frames, sub.split("rec").seed()));
  m.judge_accuracy = evalkit::judge_accuracy(ctx.judge, rec, ctx.heldout_labels);
  m.perplexity = evalkit::codebook_perplexity(all_tokens, s1.cfg.codebook_size);
  return m;
}

namespace {

struct PointData {
  stage1::Stage1Model s1;
  double H = 0.0;
};

ScalingRecord run_cell(const ScalingGrid& grid, const PointData& pd, const EvalContext& ctx,
                       const std::string& tier, uint64_t seed) {
  const auto shape = stage2::Stage2Config::for_tier(stage2::tier_from_string(tier));
  auto cfg = grid.base;
  cfg.tier = shape.tier;
  cfg.hidden_width = shape.hidden_width;
  cfg.depth = shape.depth;
  cfg.ode_steps = grid.eval.ode_steps;
  cfg.steps = grid.options.steps;
  const auto trained = stage2::train_stage2(ctx.train_feats, pd.s1, cfg, seed);

  ScalingRecord r;
  r.tier = tier;
  r.codebook_size = pd.s1.cfg.codebook_size;
  r.downsample = pd.s1.cfg.downsample;
  r.seed = seed;
  r.plateaued = trained.log.plateaued;
  r.metrics = evaluate_codec(pd.s1, trained.model, ctx, grid.eval);
  r.cap.N = static_cast<double>(trained.model.net.param_count());
  r.cap.D = static_cast<double>(trained.log.tokens_consumed);
  r.cap.H = pd.H;
  r.cap.L = trained.log.final_loss_bits_per_frame * r.downsample;
  r.cap.R = codec::bits_for(static_cast<uint32_t>(r.codebook_size));
  r.eta = capacity_fit(r.cap);
  return r;
}

}  // namespace

ScalingResult run_scaling_experiment(const ScalingGrid& grid, const signal::Corpus& corpus) {
  const auto& opt = grid.options;
  if (opt.tiers.empty() || opt.points.empty() || opt.seeds.empty()) {
    throw ConfigError("scaling grid needs at least one tier, point and seed");
  }
  for (const auto& t : opt.tiers) stage2::tier_from_string(t);

  std::vector<PointData> points;
  for (const auto& p : opt.points) {
    if (p.stage1.empty() || !std::filesystem::exists(p.stage1)) {
      throw ConfigError("missing stage-1 checkpoint for K=" + std::to_string(p.codebook_size) +
                        ", s=" + std::to_string(p.downsample) + ": '" + p.stage1 + "'");
    }
    PointData pd{stage1::Stage1Model::load(p.stage1), 0.0};
    if (pd.s1.cfg.codebook_size != p.codebook_size || pd.s1.cfg.downsample != p.downsample) {
      throw ConfigError("checkpoint " + p.stage1 + " has K=" +
                        std::to_string(pd.s1.cfg.codebook_size) + ", s=" +
                        std::to_string(pd.s1.cfg.downsample) + ", grid expects K=" +
                        std::to_string(p.codebook_size) + ", s=" + std::to_string(p.downsample));
    }
    points.push_back(std::move(pd));
  }

  const auto ctx = EvalContext::build(corpus, grid.split_seed, grid.eval.judge);
  for (auto& pd : points) pd.H = entropy_estimate(ctx.train_feats, pd.s1.cfg.downsample).bits_per_token;

  struct Cell {
    size_t point;
    std::string tier;
    uint64_t seed;
  };
  std::vector<Cell> cells;
  for (size_t p = 0; p < points.size(); ++p) {
    for (const auto& t : opt.tiers) {
      for (uint64_t s : opt.seeds) cells.push_back({p, t, s});
    }
  }

  std::vector<ScalingRecord> records(cells.size());
  std::vector<std::exception_ptr> errors(cells.size());
  std::mutex log_mu;
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      const std::string name = c.tier + " K=" + std::to_string(points[c.point].s1.cfg.codebook_size) +
                               " s=" + std::to_string(points[c.point].s1.cfg.downsample) +
                               " seed=" + std::to_string(c.seed);
      try {
        records[i] = run_cell(grid, points[c.point], ctx, c.tier, c.seed);
        std::lock_guard lk(log_mu);
        std::cerr << "cell " << (i + 1) << "/" << cells.size() << " " << name
                  << " mmd=" << records[i].metrics.mmd << "\n";
      } catch (const DivergenceError& e) {
        errors[i] = std::make_exception_ptr(DivergenceError("cell " + name + ": " + e.what()));
      } catch (const ConfigError& e) {
        errors[i] = std::make_exception_ptr(ConfigError("cell " + name + ": " + e.what()));
      } catch (const DataError& e) {
        errors[i] = std::make_exception_ptr(DataError("cell " + name + ": " + e.what()));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::max(1, std::min<int>(opt.jobs, static_cast<int>(cells.size())));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ScalingResult out;
  out.records = std::move(records);
  out.csv = records_csv(out.records);
  out.report = scaling_report(out.records);
  return out;
}

std::string records_csv(std::span<const ScalingRecord> records) {
  std::ostringstream os;
  os << kRecordsHeader << "\n";
  for (const auto& r : records) {
    os << r.tier << ',' << r.codebook_size << ',' << r.downsample << ',' << r.seed << ','
       << fmt("%.0f", r.cap.N) << ',' << fmt("%.0f", r.cap.D) << ','
       << fmt("%.17g", r.metrics.bitrate_bps) << ',' << fmt("%.17g", r.cap.L) << ','
       << fmt("%.17g", r.cap.H) << ',' << fmt("%.17g", r.eta) << ','
       << fmt("%.17g", r.metrics.lsd) << ',' << fmt("%.17g", r.metrics.mmd) << ','
       << fmt("%.17g", r.metrics.judge_accuracy) << ',' << fmt("%.17g", r.metrics.perplexity)
       << "\n";
  }
  return os.str();
}

std::vector<ScalingRecord> parse_records_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("records csv: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kRecordsHeader) throw FormatError("records csv: unexpected header '" + line + "'");
  std::vector<ScalingRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) f.push_back(cell);
    if (f.size() != 14) {
      throw FormatError("records csv line " + std::to_string(lineno) + ": expected 14 fields");
    }
    try {
      ScalingRecord r;
      r.tier = f[0];
      r.codebook_size = std::stoi(f[1]);
      r.downsample = std::stoi(f[2]);
      r.seed = std::stoull(f[3]);
      r.cap.N = std::stod(f[4]);
      r.cap.D = std::stod(f[5]);
      r.metrics.bitrate_bps = std::stod(f[6]);
      r.cap.L = std::stod(f[7]);
      r.cap.H = std::stod(f[8]);
      r.eta = std::stod(f[9]);
      r.metrics.lsd = std::stod(f[10]);
      r.metrics.mmd = std::stod(f[11]);
      r.metrics.judge_accuracy = std::stod(f[12]);
      r.metrics.perplexity = std::stod(f[13]);
      r.cap.R = codec::bits_for(static_cast<uint32_t>(r.codebook_size));
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("records csv line " + std::to_string(lineno) + ": bad number");
    }
  }
  return out;
}

namespace {

// Rows = bitrate (ascending), cols = tiers in first-seen order.
struct Grid2 {
  std::vector<double> rates;
  std::vector<std::string> tiers;
  std::map<std::pair<double, std::string>, std::vector<const ScalingRecord*>> cells;
};

Grid2 group(std::span<const ScalingRecord> records) {
  Grid2 g;
  for (const auto& r : records) {
    const double b = r.metrics.bitrate_bps;
    if (std::find(g.rates.begin(), g.rates.end(), b) == g.rates.end()) g.rates.push_back(b);
    if (std::find(g.tiers.begin(), g.tiers.end(), r.tier) == g.tiers.end()) g.tiers.push_back(r.tier);
    g.cells[{b, r.tier}].push_back(&r);
  }
  std::sort(g.rates.begin(), g.rates.end());
  return g;
}

using Getter = double (*)(const ScalingRecord&);

void metric_table(std::ostringstream& os, const Grid2& g, const char* title, Getter get,
                  bool normalized) {
  std::map<std::pair<double, std::string>, double> means;
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (const auto& [key, rs] : g.cells) {
    std::vector<double> v;
    for (const auto* r : rs) v.push_back(get(*r));
    const double m = mean_of(v);
    means[key] = m;
    lo = first ? m : std::min(lo, m);
    hi = first ? m : std::max(hi, m);
    first = false;
  }
  os << "### " << title << "\n\n| bitrate (bps) |";
  for (const auto& t : g.tiers) os << ' ' << t << " |";
  os << "\n|---|";
  for (size_t i = 0; i < g.tiers.size(); ++i) os << "---|";
  os << "\n";
  for (double b : g.rates) {
    os << "| " << fmt("%g", b) << " |";
    for (const auto& t : g.tiers) {
      const auto it = g.cells.find({b, t});
      if (it == g.cells.end()) {
        os << " - |";
        continue;
      }
      if (normalized) {
        const double m = means[{b, t}];
        os << ' ' << fmt("%.3f", hi > lo ? (m - lo) / (hi - lo) : 0.0) << " |";
      } else {
        std::vector<double> v;
        for (const auto* r : it->second) v.push_back(get(*r));
        os << ' ' << fmt("%.4g", mean_of(v)) << " ± " << fmt("%.2g", sd_of(v)) << " |";
      }
    }
    os << "\n";
  }
  os << "\n";
}

}  // namespace

std::string scaling_report(std::span<const ScalingRecord> records) {
  std::ostringstream os;
  const auto g = group(records);
  os << "# Decoder scaling report\n\n";
  os << records.size() << " cells. Cells show mean ± sd over seeds.\n\n";
  metric_table(os, g, "MMD (lower is better)", [](const ScalingRecord& r) { return r.metrics.mmd; },
               false);
  metric_table(os, g, "LSD, dB (lower is better)",
               [](const ScalingRecord& r) { return r.metrics.lsd; }, false);
  metric_table(os, g, "Judge accuracy (higher is better)",
               [](const ScalingRecord& r) { return r.metrics.judge_accuracy; }, false);
  os << "Normalised scores below use min-max scaling of the cell means over the whole grid,\n"
        "separately for each metric (0 = best observed MMD, 1 = worst).\n\n";
  metric_table(os, g, "MMD, min-max normalised",
               [](const ScalingRecord& r) { return r.metrics.mmd; }, true);

  os << "### Tier ranking by mean MMD\n\n";
  for (const auto& rk : rank_tiers(records)) {
    os << "- " << fmt("%g", rk.bitrate_bps) << " bps:";
    for (size_t i = 0; i < rk.tiers.size(); ++i) {
      os << (i ? " <" : "") << ' ' << rk.tiers[i].first << " (" << fmt("%.4g", rk.tiers[i].second)
         << ")";
    }
    os << "\n";
  }
  os << "\n### Capacity\n\n" << eta_table(records);

  std::vector<std::string> flagged;
  for (const auto& r : records) {
    if (!r.plateaued) {
      flagged.push_back(r.tier + " K=" + std::to_string(r.codebook_size) + " s=" +
                        std::to_string(r.downsample) + " seed=" + std::to_string(r.seed));
    }
  }
  os << "\n### Plateau check\n\n";
  if (flagged.empty()) {
    os << "Every cell changed by less than 1% over its last 2000 steps.\n";
  } else {
    os << "Not plateaued (loss still moving by 1% or more over the last 2000 steps):\n\n";
    for (const auto& f : flagged) os << "- " << f << "\n";
  }
  return os.str();
}

std::string eta_table(std::span<const ScalingRecord> records) {
  std::ostringstream os;
  os << "| tier | K | s | seed | N_params | N_bits | D_tokens | R | H | L | eta/param | eta/bit | residual |\n";
  os << "|---|---|---|---|---|---|---|---|---|---|---|---|---|\n";
  std::vector<CapacityRecord> caps;
  for (const auto& r : records) caps.push_back(r.cap);
  std::vector<double> residual(records.size(), 0.0);
  double pooled = 0.0;
  if (caps.size() >= 2) {
    const auto t = tradeoff_table(caps);
    pooled = t.eta_pooled;
    for (size_t i = 0; i < t.rows.size(); ++i) residual[i] = t.rows[i].residual;
  }
  for (size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const double eta = capacity_fit(r.cap);
    os << "| " << r.tier << " | " << r.codebook_size << " | " << r.downsample << " | " << r.seed
       << " | " << fmt("%.0f", r.cap.N) << " | " << fmt("%.0f", r.cap.N * kBitsPerParam) << " | "
       << fmt("%.0f", r.cap.D) << " | " << fmt("%g", r.cap.R) << " | " << fmt("%.4g", r.cap.H)
       << " | " << fmt("%.4g", r.cap.L) << " | " << fmt("%.6g", eta) << " | "
       << fmt("%.6g", eta / kBitsPerParam) << " | " << fmt("%.6g", residual[i]) << " |\n";
  }
  if (caps.size() >= 2) {
    os << "\nPooled eta (median): " << fmt("%.6g", pooled) << " bits/param, "
       << fmt("%.6g", pooled / kBitsPerParam) << " bits/bit.\n";
  }
  return os.str();
}

}  // namespace gac::ic1
