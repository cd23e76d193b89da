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

// Acceptance runner. One line per criterion on stdout:
//
//   criterion N: PASS|FAIL  <measurements>
//
// Details go to stderr. `--prepare` builds the shared corpus and the frozen
// 20k-step stage-1 checkpoints used by criteria 7 and 8; the other
// criteria are self-contained.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "CLI11.hpp"

#include "gac/codec.hpp"
#include "gac/error.hpp"
#include "gac/evalkit.hpp"
#include "gac/ic1.hpp"
#include "gac/io.hpp"
#include "gac/signal.hpp"
#include "gac/stage1.hpp"
#include "gac/stage2.hpp"

using namespace gac;
namespace fs = std::filesystem;
using tk::Mat;
using tk::Vec;

namespace {

constexpr int kCorpusClips = 2000;
constexpr uint64_t kCorpusSeed = 1;
constexpr uint64_t kSplitSeed = 1;
constexpr int kSteps = 20000;

fs::path g_work = "acceptance_work";

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

std::string join(const std::vector<double>& v, const char* f) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(f, v[i]);
  return s;
}

struct Features {
  std::vector<signal::FeatureSequence> feats;
  std::vector<signal::Label> labels;
};

Features features_of(const signal::Corpus& c, const std::vector<size_t>* subset = nullptr) {
  Features f;
  auto add = [&](size_t i) {
    f.feats.push_back(signal::extract_features(c.clips[i].wave));
    f.labels.push_back(c.clips[i].label);
  };
  if (subset) {
    for (size_t i : *subset) add(i);
  } else {
    for (size_t i = 0; i < c.clips.size(); ++i) add(i);
  }
  return f;
}

fs::path corpus_path() { return g_work / "corpus.gacc"; }
fs::path stage1_path(int k, int s) {
  return g_work / ("stage1_K" + std::to_string(k) + "_s" + std::to_string(s) + ".ckpt");
}

void prepare() {
  fs::create_directories(g_work);
  const auto corpus = signal::make_corpus(kCorpusClips, kCorpusSeed);
  signal::save_corpus(corpus, corpus_path());
  std::vector<signal::Label> labels;
  for (const auto& c : corpus.clips) labels.push_back(c.label);
  const auto split = evalkit::stratified_split(labels, kSplitSeed);
  const auto train = features_of(corpus, &split.train);
  for (int s : {2, 1}) {
    Timer t;
    stage1::Stage1Config cfg;
    cfg.codebook_size = 128;
    cfg.downsample = s;
    cfg.steps = kSteps;
    const auto res = stage1::train_stage1(train.feats, train.labels, cfg, kSplitSeed);
    res.model.save(stage1_path(128, s));
    std::cerr << "  stage1 K=128 s=" << s << " trained in " << fmt("%.0f", t.seconds())
              << " s, last batch perplexity " << fmt("%.1f", res.log.steps.back().perplexity)
              << "\n";
  }
}

void ensure_prepared() {
  if (!fs::exists(corpus_path()) || !fs::exists(stage1_path(128, 1)) ||
      !fs::exists(stage1_path(128, 2))) {
    std::cerr << "  shared artefacts missing, preparing\n";
    prepare();
  }
}

Outcome gradient_suite() {
  Timer t;
  double worst_s1 = 0, worst_fm = 0, worst_judge = 0;

  for (uint64_t seed : {1, 2, 3}) {
    stage1::Stage1Config cfg;
    cfg.latent_dim = 4;
    cfg.codebook_size = 4;
    cfg.encoder_hidden = 6;
    cfg.head_hidden = 5;
    Rng rng(seed);
    auto m = stage1::Stage1Model::init(cfg, {Vec::Zero(2), Vec::Ones(2)}, rng, 2);
    std::vector<Mat> inputs;
    for (int c = 0; c < 3; ++c) {
      Mat f(8, 2);
      for (Eigen::Index i = 0; i < f.size(); ++i) f(i) = rng.normal();
      inputs.push_back(stage1::encoder_inputs(f, cfg.downsample));
    }
    const std::vector<signal::Label> labels{{0}, {9}, {17}};
    const auto bl = stage1::batch_loss(m, inputs, labels, true);
    auto params = tk::param_spans(m.encoder);
    for (auto s : tk::param_spans(m.head)) params.push_back(s);
    auto grads = tk::grad_spans(bl.encoder_grad);
    for (auto s : tk::grad_spans(bl.head_grad)) grads.push_back(s);
    worst_s1 = std::max(worst_s1, tk::finite_diff_check(
                                      [&] { return stage1::batch_loss(m, inputs, labels, true).total; },
                                      params, grads, 1e-6));

    stage2::Stage2Config vcfg;
    vcfg.hidden_width = 8;
    vcfg.depth = 2;
    const auto v = stage2::VelocityModel::init(vcfg, 2, 1, rng);
    stage2::FlowBatch b;
    b.x1.resize(5, 2);
    b.x0.resize(5, 2);
    b.cond.resize(5, 1);
    b.t.resize(5);
    for (int i = 0; i < 5; ++i) {
      b.x1.row(i) << rng.normal(), rng.normal();
      b.x0.row(i) << rng.normal(), rng.normal();
      b.cond(i, 0) = rng.normal();
      b.t(i) = rng.uniform();
    }
    worst_fm = std::max(worst_fm, tk::finite_diff_check(
                                      [&](const tk::MlpParams& p) {
                                        auto w = v;
                                        w.net = p;
                                        return stage2::fm_loss_grad(w, b);
                                      },
                                      v.net, 1e-6));

    const auto net = tk::make_mlp({4, 8, signal::kNumClasses}, tk::Activation::Tanh,
                                  tk::Activation::Identity, rng);
    Mat x(6, 4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
    const std::vector<int> y{0, 5, 11, 23, 5, 2};
    worst_judge = std::max(
        worst_judge,
        tk::finite_diff_check([&](const tk::MlpParams& p) { return evalkit::judge_loss_grad(p, x, y); },
                              net, 1e-6));
  }
  const double secs = t.seconds();
  Outcome o;
  o.pass = worst_s1 < 1e-4 && worst_fm < 1e-4 && worst_judge < 1e-4 && secs < 30;
  o.detail = "stage1 " + fmt("%.2e", worst_s1) + ", fm_loss " + fmt("%.2e", worst_fm) +
             ", judge " + fmt("%.2e", worst_judge) + " (limit 1e-4), " + fmt("%.1f", secs) +
             " s (limit 30)";
  return o;
}

Outcome bitrate_reproduction() {
  codec::BitstreamHeader h175, h275;
  h175.codebook_size = 128;
  h175.downsample = 2;
  h275.codebook_size = 2048;
  h275.downsample = 2;
  const double b175 = codec::bitrate(h175);
  const double b275 = codec::bitrate(h275);
  const double ratio = codec::compression_ratio(h175, 512000.0);
  Outcome o;
  o.pass = b175 == 175.0 && b275 == 275.0 && ratio >= 2900 && ratio <= 2950;
  o.detail = "K=128 s=2 " + fmt("%g", b175) + " bps, K=2048 s=2 " + fmt("%g", b275) +
             " bps, 512 kbps / 175 bps = " + fmt("%.1f", ratio) + "x";
  return o;
}

Outcome bitstream() {
  Timer t;
  Rng rng(3);
  int roundtrip_ok = 0;
  const int ks[] = {2, 64, 1024};
  for (int trial = 0; trial < 1000; ++trial) {
    stage1::TokenStream ts;
    ts.codebook_size = ks[trial % 3];
    ts.downsample = 1 << rng.below(3);
    ts.tokens.resize(rng.below(200));
    for (auto& x : ts.tokens) x = static_cast<int>(rng.below(ts.codebook_size));
    const auto u = codec::unpack(codec::pack(ts));
    roundtrip_ok += u.tokens.tokens == ts.tokens && u.tokens.codebook_size == ts.codebook_size &&
                    u.tokens.downsample == ts.downsample;
  }
  long flips = 0, detected = 0;
  for (int k : ks) {
    for (int n = 0;; ++n) {
      stage1::TokenStream ts;
      ts.codebook_size = k;
      ts.tokens.resize(n);
      for (auto& x : ts.tokens) x = static_cast<int>(rng.below(k));
      const auto bytes = codec::pack(ts);
      if (bytes.size() > 64) break;
      for (size_t i = 0; i < bytes.size(); ++i) {
        for (int bit = 0; bit < 8; ++bit) {
          auto bad = bytes;
          bad[i] ^= static_cast<uint8_t>(1u << bit);
          ++flips;
          try {
            codec::unpack(bad);
          } catch (const DataError&) {
            ++detected;
          }
        }
      }
    }
  }
  const double secs = t.seconds();
  Outcome o;
  o.pass = roundtrip_ok == 1000 && detected == flips && secs < 60;
  o.detail = std::to_string(roundtrip_ok) + "/1000 round trips exact, " +
             std::to_string(detected) + "/" + std::to_string(flips) +
             " single-bit flips detected, " + fmt("%.1f", secs) + " s (limit 60)";
  return o;
}

Mat gmm_samples(int n, Rng& rng) {
  const double centers[4][2] = {{2, 2}, {2, -2}, {-2, 2}, {-2, -2}};
  Mat x(n, 2);
  for (int i = 0; i < n; ++i) {
    const auto c = rng.below(4);
    x(i, 0) = centers[c][0] + 0.5 * rng.normal();
    x(i, 1) = centers[c][1] + 0.5 * rng.normal();
  }
  return x;
}

Outcome flow_sanity() {
  Timer t;
  std::vector<double> ratios;
  for (uint64_t seed : {1, 2, 3}) {
    Rng data_rng = Rng(seed).split("data");
    stage2::FlowTrainData data;
    data.x1 = gmm_samples(2000, data_rng);
    data.cond.resize(2000, 0);
    auto cfg = stage2::Stage2Config::for_tier(stage2::Tier::Medium);
    cfg.steps = kSteps;
    const auto res = stage2::train_flow(data, cfg, 64, seed);

    Rng eval_rng = Rng(seed).split("eval");
    const Mat ref = gmm_samples(2000, eval_rng);
    Mat prior(2000, 2);
    for (Eigen::Index i = 0; i < prior.size(); ++i) prior(i) = eval_rng.normal();
    const Mat samples = stage2::euler_sample(res.model, Mat(2000, 0), 64, seed + 1000);
    const double m_samples = evalkit::mmd_frames(samples, ref);
    const double m_prior = evalkit::mmd_frames(prior, ref);
    ratios.push_back(m_samples / m_prior);
    std::cerr << "  seed " << seed << ": MMD(samples, data) " << fmt("%.5f", m_samples)
              << ", MMD(prior, data) " << fmt("%.5f", m_prior) << ", final loss "
              << fmt("%.4f", res.log.final_loss) << "\n";
  }
  const double secs = t.seconds();
  const double med = median(ratios);
  Outcome o;
  o.pass = med <= 0.2 && secs < 300;
  o.detail = "median MMD ratio " + fmt("%.4f", med) + " (limit 0.2; per seed " +
             join(ratios, "%.4f") + "), " + fmt("%.0f", secs) + " s (limit 300)";
  return o;
}

Outcome integrator_order() {
  stage2::VelocityModel v;
  v.feat_dim = 3;
  v.cond_dim = 0;
  tk::Layer l;
  l.weight = Mat::Zero(3, 3 + stage2::kTimeEmbedDim);
  l.weight.leftCols(3) = -Mat::Identity(3, 3);
  l.bias = Vec::Zero(3);
  v.net.layers.push_back(l);
  Mat x0(1, 3);
  x0 << 1.0, -0.5, 2.0;
  auto err = [&](int n) {
    const Mat x = stage2::euler_integrate(v, x0, Mat(1, 0), n);
    return (x - x0 * std::exp(-1.0)).norm() / (x0 * std::exp(-1.0)).norm();
  };
  const double e8 = err(8), e64 = err(64), e512 = err(512);
  const double r1 = e8 / e64, r2 = e64 / e512;
  Outcome o;
  o.pass = r1 >= 3.0 && r2 >= 3.0;
  o.detail = "errors " + fmt("%.3e", e8) + " / " + fmt("%.3e", e64) + " / " + fmt("%.3e", e512) +
             " at n = 8 / 64 / 512, reductions " + fmt("%.2f", r1) + "x and " + fmt("%.2f", r2) +
             "x (limit 3x)";
  return o;
}

Outcome codebook_utilization() {
  Timer t;
  const auto corpus = signal::make_corpus(kCorpusClips, kCorpusSeed);
  const auto data = features_of(corpus);
  std::vector<double> ppl;
  for (uint64_t seed : {1, 2, 3}) {
    stage1::Stage1Config cfg;
    cfg.codebook_size = 64;
    cfg.beta = 0.25;
    cfg.steps = kSteps;
    const auto res = stage1::train_stage1(data.feats, data.labels, cfg, seed);
    std::vector<int> toks;
    for (const auto& f : data.feats) {
      const auto ts = stage1::tokenize(res.model, f);
      toks.insert(toks.end(), ts.tokens.begin(), ts.tokens.end());
    }
    ppl.push_back(evalkit::codebook_perplexity(toks, 64));
    std::cerr << "  seed " << seed << ": corpus token perplexity " << fmt("%.2f", ppl.back())
              << "\n";
  }
  const double secs = t.seconds();
  const double med = median(ppl);
  Outcome o;
  o.pass = med >= 0.7 * 64 && secs < 600;
  o.detail = "median perplexity " + fmt("%.2f", med) + " (limit 44.8; per seed " +
             join(ppl, "%.2f") + "), " + fmt("%.0f", secs) + " s (limit 600)";
  return o;
}

Outcome semantic_preservation() {
  ensure_prepared();
  Timer t;
  const auto corpus = signal::load_corpus(corpus_path());
  const auto s1 = stage1::Stage1Model::load(stage1_path(128, 1));
  evalkit::EvalConfig ecfg;
  const auto ctx = ic1::EvalContext::build(corpus, kSplitSeed, ecfg.judge);
  const double truth = evalkit::judge_accuracy(ctx.judge, ctx.heldout_feats, ctx.heldout_labels);
  std::vector<double> ratios;
  for (uint64_t seed : {1, 2, 3}) {
    auto cfg = stage2::Stage2Config::for_tier(stage2::Tier::Medium);
    cfg.steps = kSteps;
    const auto res = stage2::train_stage2(ctx.train_feats, s1, cfg, seed);
    const auto m = ic1::evaluate_codec(s1, res.model, ctx, ecfg);
    ratios.push_back(m.judge_accuracy / truth);
    std::cerr << "  seed " << seed << ": decoded judge accuracy " << fmt("%.4f", m.judge_accuracy)
              << " vs ground truth " << fmt("%.4f", truth) << " (" << fmt("%g", m.bitrate_bps)
              << " bps, lsd " << fmt("%.2f", m.lsd) << " dB)\n";
  }
  const double med = median(ratios);
  Outcome o;
  o.pass = med >= 0.8;
  o.detail = "median accuracy ratio " + fmt("%.4f", med) + " (limit 0.8; per seed " +
             join(ratios, "%.4f") + "), ground truth " + fmt("%.4f", truth) + ", " +
             fmt("%.0f", t.seconds()) + " s";
  return o;
}

Outcome scaling_trend() {
  ensure_prepared();
  Timer t;
  const auto corpus = signal::load_corpus(corpus_path());
  ic1::ScalingGrid g;
  g.split_seed = kSplitSeed;
  g.options.steps = kSteps;
  g.options.points = {{128, 2, stage1_path(128, 2).string()}, {128, 1, stage1_path(128, 1).string()}};
  const auto res = ic1::run_scaling_experiment(g, corpus);
  io::write_text(g_work / "records.csv", res.csv);
  io::write_text(g_work / "report.md", res.report);
  const double secs = t.seconds();

  const std::vector<std::string> tiers{"small", "medium", "large"};
  auto cell_mean = [&](const std::string& tier, double bps, auto field) {
    std::vector<double> v;
    for (const auto& r : res.records) {
      if (r.tier == tier && r.metrics.bitrate_bps == bps) v.push_back(field(r));
    }
    return mean(v);
  };
  auto mmd = [](const ic1::ScalingRecord& r) { return r.metrics.mmd; };
  auto loss = [](const ic1::ScalingRecord& r) { return r.cap.L / r.downsample; };

  int ok = 0;
  for (double bps : {175.0, 350.0}) {
    std::vector<double> m;
    for (const auto& tier : tiers) m.push_back(cell_mean(tier, bps, mmd));
    std::cerr << "  " << fmt("%g", bps) << " bps mean MMD small/medium/large: " << join(m, "%.5f")
              << "\n";
    std::vector<double> l;
    for (const auto& tier : tiers) l.push_back(cell_mean(tier, bps, loss));
    std::cerr << "  " << fmt("%g", bps) << " bps mean final loss (bits/frame) small/medium/large: "
              << join(l, "%.4f") << "\n";
    ok += m[1] <= m[0];
    ok += m[2] <= m[1];
    ok += m[2] <= m[0];
  }
  const double large175 = cell_mean("large", 175.0, mmd);
  const double small350 = cell_mean("small", 350.0, mmd);
  const bool b = large175 <= small350;
  Outcome o;
  o.pass = ok >= 5 && secs < 90 * 60;
  o.detail = "(a) " + std::to_string(ok) + "/6 tier comparisons non-increasing (need 5); (b) " +
             (b ? "pass" : "WARN") + ": Large@175 " + fmt("%.5f", large175) + " vs Small@350 " +
             fmt("%.5f", small350) + "; " + fmt("%.0f", secs) + " s (limit 5400)";
  return o;
}

Outcome capacity_arithmetic() {
  struct Case {
    ic1::CapacityRecord r;
    double eta;
  };
  // eta = D (H - L) / N, worked by hand.
  const Case cases[] = {
      {{1e6, 1e6, 8, 2, 7}, 6.0},
      {{2e6, 1e6, 8, 2, 7}, 3.0},
      {{4, 10, 3.5, 1.5, 7}, 5.0},
      {{16, 4, 1, 5, 7}, -1.0},
      {{1000, 1000, 2.25, 2.25, 7}, 0.0},
  };
  int exact = 0;
  for (const auto& c : cases) exact += ic1::capacity_fit(c.r) == c.eta;

  // H = R + eta N / D with eta = 2 and L = H - eta N / D, all dyadic.
  std::vector<ic1::CapacityRecord> recs;
  for (double n : {64.0, 256.0, 1024.0, 4096.0}) {
    ic1::CapacityRecord r{n, 1024.0, 0.0, 0.0, 7.0};
    r.H = r.R + 2.0 * n / r.D;
    r.L = r.H - 2.0 * n / r.D;
    recs.push_back(r);
  }
  const auto table = ic1::tradeoff_table(recs);
  bool zero = table.eta_pooled == 2.0;
  for (const auto& row : table.rows) zero = zero && row.residual == 0.0;
  Outcome o;
  o.pass = exact == 5 && zero;
  o.detail = std::to_string(exact) + "/5 eta values exact, tradeoff residuals " +
             (zero ? "all 0" : "non-zero") + " (pooled eta " + fmt("%g", table.eta_pooled) + ")";
  return o;
}

int shell(const std::string& cmd) {
  const int s = std::system(cmd.c_str());
  return WIFEXITED(s) ? WEXITSTATUS(s) : -1;
}

Outcome determinism() {
  Timer t;
  const fs::path root = g_work / "determinism";
  fs::remove_all(root);
  const std::string bin = GAC_CLI_PATH;
  const std::string config =
      R"({"seed": 4, "corpus": {"n_clips": 200},
          "stage1": {"codebook_size": 128, "downsample": 2, "steps": 1000},
          "stage2": {"tier": "small", "steps": 1000},
          "eval": {"ode_steps": 16, "judge": {"steps": 500}}})";
  std::vector<std::string> files{"corpus.gacc", "s1.ckpt", "s1.ckpt.json", "s2.ckpt",
                                 "s2.ckpt.json", "clip.gacb", "rec.csv", "metrics.csv"};
  for (const char* run : {"a", "b"}) {
    const fs::path d = root / run;
    fs::create_directories(d);
    io::write_text(d / "config.json", config);
    const std::string p = d.string() + "/";
    const std::vector<std::string> cmds{
        "gen-data --config " + p + "config.json --corpus-out " + p + "corpus.gacc",
        "train-stage1 --config " + p + "config.json --corpus " + p + "corpus.gacc --out " + p +
            "s1.ckpt",
        "train-stage2 --config " + p + "config.json --corpus " + p + "corpus.gacc --stage1 " + p +
            "s1.ckpt --tier small --out " + p + "s2.ckpt",
        "encode --stage1 " + p + "s1.ckpt --corpus " + p + "corpus.gacc --in 7 --out " + p +
            "clip.gacb",
        "decode --stage1 " + p + "s1.ckpt --stage2 " + p + "s2.ckpt --in " + p +
            "clip.gacb --steps 32 --seed 7 --features-out " + p + "rec.csv",
        "eval --config " + p + "config.json --corpus " + p + "corpus.gacc --stage1 " + p +
            "s1.ckpt --stage2 " + p + "s2.ckpt --csv-out " + p + "metrics.csv",
    };
    for (const auto& c : cmds) {
      const int code = shell(bin + " " + c + " >> " + p + "log.txt 2>&1");
      if (code != 0) return {false, "command failed with exit " + std::to_string(code) + ": " + c};
    }
  }
  int same = 0;
  std::string differing;
  for (const auto& f : files) {
    const auto a = io::read_file(root / "a" / f);
    const auto b = io::read_file(root / "b" / f);
    if (a == b && !a.empty()) {
      ++same;
    } else {
      differing += " " + f;
    }
  }
  Outcome o;
  o.pass = same == static_cast<int>(files.size());
  o.detail = std::to_string(same) + "/" + std::to_string(files.size()) +
             " artefacts byte-identical across two runs" +
             (differing.empty() ? "" : " (differ:" + differing + ")") + ", " +
             fmt("%.0f", t.seconds()) + " s";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria 1-10");
  std::vector<int> which;
  bool prep = false;
  std::string work = g_work.string();
  app.add_option("--criterion", which, "Criterion number(s) to run (default: all)")
      ->check(CLI::Range(1, 10));
  app.add_flag("--prepare", prep, "Build the shared corpus and stage-1 checkpoints");
  app.add_option("--work-dir", work, "Directory for shared artefacts")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  g_work = work;

  const std::vector<std::pair<int, std::function<Outcome()>>> all{
      {1, gradient_suite},        {2, bitrate_reproduction}, {3, bitstream},
      {4, flow_sanity},           {5, integrator_order},     {6, codebook_utilization},
      {7, semantic_preservation}, {8, scaling_trend},        {9, capacity_arithmetic},
      {10, determinism},
  };

  if (prep) {
    try {
      prepare();
    } catch (const std::exception& e) {
      std::cout << "prepare: FAIL  " << e.what() << std::endl;
      return 1;
    }
    std::cout << "prepare: done" << std::endl;
    if (which.empty()) return 0;
  }

  bool ok = true;
  for (const auto& [n, fn] : all) {
    if (!which.empty() && std::find(which.begin(), which.end(), n) == which.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << "  " << o.detail
              << std::endl;
    ok = ok && o.pass;
  }
  return ok ? 0 : 1;
}
