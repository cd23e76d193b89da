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

// Information-capacity bookkeeping for the decoder scaling study.
//
//   eta * N = D * (H - L)        H = R + eta * N / D
//
// N: decoder parameters, D: training tokens, H: entropy proxy of the data,
// L: final decoder loss, R: channel rate. H, L and R are in bits per token.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gac/evalkit.hpp"
#include "gac/signal.hpp"
#include "gac/stage1.hpp"
#include "gac/stage2.hpp"

namespace gac::ic1 {

struct CapacityRecord {
  double N = 0.0;
  double D = 0.0;
  double H = 0.0;
  double L = 0.0;
  double R = 0.0;
};

// D (H - L) / N. Negative when L > H. Throws RangeError when N or D is zero.
double capacity_fit(const CapacityRecord& r);

inline constexpr int kBitsPerParam = 64;

struct EntropyEstimate {
  double bits_per_token = 0.0;
  std::vector<int> skipped_bands;  // variance below 1e-12
};

// Gaussian per-band proxy: s * sum_f 0.5 log2(2 pi e var_f), floored at 0.
// Variances are population variances over every frame.
EntropyEstimate entropy_estimate(const tk::Mat& frames, int downsample);
// Requires at least 100 clips.
EntropyEstimate entropy_estimate(std::span<const signal::FeatureSequence> feats, int downsample);

struct TradeoffRow {
  double R = 0.0;
  double N = 0.0;
  double L = 0.0;
  double eta = 0.0;
  double residual = 0.0;  // H - R - eta_pooled N / D
};

struct TradeoffTable {
  double eta_pooled = 0.0;  // median of per-record eta
  std::vector<TradeoffRow> rows;
};

// Throws DataError with fewer than two records.
TradeoffTable tradeoff_table(std::span<const CapacityRecord> records);

struct BitratePoint {
  int codebook_size = 128;
  int downsample = 2;
  std::string stage1;  // frozen stage-1 checkpoint for this point
};

struct ScalingOptions {
  std::string corpus;  // corpus file; relative paths resolve against the grid file
  std::vector<std::string> tiers = {"small", "medium", "large"};
  std::vector<BitratePoint> points = {{128, 2, ""}, {128, 1, ""}};
  std::vector<uint64_t> seeds = {1, 2, 3};
  int steps = 20000;
  int jobs = 1;
};

// One trained and evaluated cell of the grid.
struct ScalingRecord {
  std::string tier;
  int codebook_size = 0;
  int downsample = 1;
  uint64_t seed = 0;
  CapacityRecord cap;
  double eta = 0.0;
  evalkit::MetricReport metrics;
  bool plateaued = true;
};

// Every fixed input of a scaling run.
struct ScalingGrid {
  ScalingOptions options;
  uint64_t split_seed = 1;  // held-out split and judge seed
  stage2::Stage2Config base;  // tier fields are overwritten per cell
  evalkit::EvalConfig eval;
};

// Per-bitrate ordering of tiers by mean MMD over seeds, best first.
struct TierRanking {
  double bitrate_bps = 0.0;
  std::vector<std::pair<std::string, double>> tiers;
};
std::vector<TierRanking> rank_tiers(std::span<const ScalingRecord> records);

// Frozen pieces shared by every cell: corpus features, split and judge.
struct EvalContext {
  std::vector<signal::FeatureSequence> train_feats;
  std::vector<signal::Label> train_labels;
  std::vector<signal::FeatureSequence> heldout_feats;
  std::vector<signal::Label> heldout_labels;
  evalkit::JudgeModel judge;

  static EvalContext build(const signal::Corpus& corpus, uint64_t split_seed,
                           const evalkit::JudgeConfig& jcfg);
};

// Decodes every held-out clip through (s1, v) and scores it. Clip i is
// sampled with seed splitmix64(decode_seed ^ i).
evalkit::MetricReport evaluate_codec(const stage1::Stage1Model& s1,
                                     const stage2::VelocityModel& v, const EvalContext& ctx,
                                     const evalkit::EvalConfig& cfg);

struct ScalingResult {
  std::vector<ScalingRecord> records;  // grid order: point, tier, seed
  std::string csv;
  std::string report;
};

// Trains and evaluates every cell. Missing checkpoints raise ConfigError;
// training failures are rethrown with the cell named.
ScalingResult run_scaling_experiment(const ScalingGrid& grid, const signal::Corpus& corpus);

inline constexpr const char* kRecordsHeader =
    "tier,K,s,seed,N_params,D_tokens,R_bps,L_bits,H_bits,eta,lsd,mmd,judge_acc,perplexity";

std::string records_csv(std::span<const ScalingRecord> records);
std::vector<ScalingRecord> parse_records_csv(const std::string& text);
std::string scaling_report(std::span<const ScalingRecord> records);
// Table printed by `ic1-fit`.
std::string eta_table(std::span<const ScalingRecord> records);

}  // namespace gac::ic1
