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

#include "gac/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "gac/codec.hpp"
#include "gac/config.hpp"
#include "gac/error.hpp"
#include "gac/evalkit.hpp"
#include "gac/ic1.hpp"
#include "gac/io.hpp"
#include "gac/signal.hpp"
#include "gac/stage1.hpp"
#include "gac/stage2.hpp"

namespace gac::cli {

namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

RunConfig config_or_default(const std::string& path) {
  return path.empty() ? RunConfig{} : load_run_config(path);
}

struct SplitFeatures {
  std::vector<signal::FeatureSequence> feats;
  std::vector<signal::Label> labels;
};

// Training side of the seeded 80/20 split.
SplitFeatures train_split(const signal::Corpus& corpus, uint64_t seed) {
  std::vector<signal::Label> labels;
  for (const auto& c : corpus.clips) labels.push_back(c.label);
  const auto split = evalkit::stratified_split(labels, seed);
  if (split.train.empty()) throw DataError("corpus too small to train on");
  SplitFeatures out;
  for (size_t i : split.train) {
    out.feats.push_back(signal::extract_features(corpus.clips[i].wave));
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::string default_help() {
  return "Config defaults (JSON accepted by --config / --grid):\n" +
         to_json(RunConfig{}).dump(2) + "\n";
}

struct Args {
  std::string config, corpus, corpus_out, out, stage1, stage2, in, features_out, csv_out, grid,
      out_dir, records, tier;
  std::optional<uint64_t> seed;
  std::optional<int> n_clips, steps, codebook_size, downsample, jobs;
  int clip_index = 0;
  int decode_steps = 32;
  uint64_t decode_seed = 7;
};

int cmd_gen_data(const Args& a, std::ostream& out) {
  auto cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.n_clips) cfg.corpus.n_clips = *a.n_clips;
  if (cfg.corpus.n_clips < 1) throw ConfigError("n_clips must be >= 1");
  const auto corpus = signal::make_corpus(cfg.corpus.n_clips, cfg.seed, cfg.corpus.stratified);
  signal::save_corpus(corpus, a.corpus_out);
  out << "wrote " << corpus.clips.size() << " clips to " << a.corpus_out << "\n";
  return kExitOk;
}

int cmd_train_stage1(const Args& a, std::ostream& out) {
  auto cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (a.steps) cfg.stage1.steps = *a.steps;
  if (a.codebook_size) cfg.stage1.codebook_size = *a.codebook_size;
  if (a.downsample) cfg.stage1.downsample = *a.downsample;
  cfg.stage1.validate();
  const auto corpus = signal::load_corpus(a.corpus);
  const auto data = train_split(corpus, cfg.seed);
  const auto res = stage1::train_stage1(data.feats, data.labels, cfg.stage1, cfg.seed);
  res.model.save(a.out);
  const auto& last = res.log.steps.back();
  out << "stage1 K=" << cfg.stage1.codebook_size << " s=" << cfg.stage1.downsample
      << " steps=" << cfg.stage1.steps << " loss=" << last.total
      << " batch_perplexity=" << last.perplexity << " -> " << a.out << "\n";
  return kExitOk;
}

int cmd_train_stage2(const Args& a, std::ostream& out) {
  auto cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  if (!a.tier.empty()) {
    const auto keep = cfg.stage2;
    cfg.stage2 = stage2::Stage2Config::for_tier(stage2::tier_from_string(a.tier));
    cfg.stage2.activation = keep.activation;
    cfg.stage2.window = keep.window;
    cfg.stage2.ode_steps = keep.ode_steps;
    cfg.stage2.steps = keep.steps;
    cfg.stage2.batch_clips = keep.batch_clips;
    cfg.stage2.lr = keep.lr;
  }
  if (a.steps) cfg.stage2.steps = *a.steps;
  cfg.stage2.validate();
  const auto s1 = stage1::Stage1Model::load(a.stage1);
  const auto corpus = signal::load_corpus(a.corpus);
  const auto data = train_split(corpus, cfg.seed);
  const auto res = stage2::train_stage2(data.feats, s1, cfg.stage2, cfg.seed);
  res.model.save(a.out);
  out << "stage2 tier=" << cfg.stage2.tier << " params=" << res.model.net.param_count()
      << " final_loss=" << res.log.final_loss << (res.log.plateaued ? "" : " (not plateaued)")
      << " -> " << a.out << "\n";
  return kExitOk;
}

int cmd_encode(const Args& a, std::ostream& out) {
  const auto s1 = stage1::Stage1Model::load(a.stage1);
  const auto corpus = signal::load_corpus(a.corpus);
  if (a.clip_index < 0 || static_cast<size_t>(a.clip_index) >= corpus.clips.size()) {
    throw RangeError("clip index " + std::to_string(a.clip_index) + " outside [0, " +
                     std::to_string(corpus.clips.size()) + ")");
  }
  const auto bytes = codec::encode_clip(s1, corpus.clips[static_cast<size_t>(a.clip_index)].wave);
  io::write_file(a.out, bytes);
  const auto u = codec::unpack(bytes);
  out << "clip " << a.clip_index << ": " << u.header.num_tokens << " tokens, "
      << codec::bitrate(u.header) << " bps, " << bytes.size() << " bytes -> " << a.out << "\n";
  return kExitOk;
}

int cmd_decode(const Args& a, std::ostream& out) {
  const auto s1 = stage1::Stage1Model::load(a.stage1);
  const auto v = stage2::VelocityModel::load(a.stage2);
  const auto bytes = io::read_file(a.in);
  const auto rec = codec::decode_clip(s1, v, bytes, a.decode_steps, a.decode_seed);
  std::ostringstream csv;
  for (Eigen::Index b = 0; b < rec.cols(); ++b) csv << (b ? "," : "") << "band_" << b;
  csv << "\n";
  for (Eigen::Index t = 0; t < rec.rows(); ++t) {
    for (Eigen::Index b = 0; b < rec.cols(); ++b) csv << (b ? "," : "") << num(rec(t, b));
    csv << "\n";
  }
  io::write_text(a.features_out, csv.str());
  out << "decoded " << rec.rows() << " frames -> " << a.features_out << "\n";
  return kExitOk;
}

int cmd_eval(const Args& a, std::ostream& out) {
  auto cfg = config_or_default(a.config);
  if (a.seed) cfg.seed = *a.seed;
  const auto s1 = stage1::Stage1Model::load(a.stage1);
  const auto v = stage2::VelocityModel::load(a.stage2);
  const auto corpus = signal::load_corpus(a.corpus);
  const auto ctx = ic1::EvalContext::build(corpus, cfg.seed, cfg.eval.judge);
  const auto m = ic1::evaluate_codec(s1, v, ctx, cfg.eval);
  const std::string name = "K" + std::to_string(s1.cfg.codebook_size) + "_s" +
                           std::to_string(s1.cfg.downsample) + "_" + v.cfg.tier;
  std::ostringstream csv;
  csv << "config,seed,bitrate_bps,lsd,mmd,judge_accuracy,perplexity\n"
      << name << ',' << cfg.seed << ',' << num(m.bitrate_bps) << ',' << num(m.lsd) << ','
      << num(m.mmd) << ',' << num(m.judge_accuracy) << ',' << num(m.perplexity) << "\n";
  io::write_text(a.csv_out, csv.str());
  out << csv.str();
  return kExitOk;
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path q(p);
  return q.is_absolute() || p.empty() ? q : base / q;
}

int cmd_scaling(const Args& a, std::ostream& out) {
  const auto cfg = load_run_config(a.grid);
  const auto base = fs::path(a.grid).parent_path();
  ic1::ScalingGrid grid;
  grid.options = cfg.scaling;
  if (a.jobs) grid.options.jobs = *a.jobs;
  if (a.steps) grid.options.steps = *a.steps;
  if (grid.options.jobs < 1) throw ConfigError("--jobs must be >= 1");
  for (auto& p : grid.options.points) p.stage1 = resolve(base, p.stage1).string();
  grid.split_seed = cfg.seed;
  grid.base = cfg.stage2;
  grid.eval = cfg.eval;
  const std::string corpus_path = a.corpus.empty() ? resolve(base, cfg.scaling.corpus).string()
                                                   : a.corpus;
  if (corpus_path.empty()) throw ConfigError("scaling grid names no corpus");
  if (!fs::exists(corpus_path)) throw ConfigError("corpus not found: " + corpus_path);
  const auto corpus = signal::load_corpus(corpus_path);
  const auto res = ic1::run_scaling_experiment(grid, corpus);
  fs::create_directories(a.out_dir);
  io::write_text(fs::path(a.out_dir) / "records.csv", res.csv);
  io::write_text(fs::path(a.out_dir) / "report.md", res.report);
  out << res.records.size() << " cells -> " << (fs::path(a.out_dir) / "records.csv").string()
      << "\n";
  return kExitOk;
}

int cmd_ic1_fit(const Args& a, std::ostream& out) {
  const auto records = ic1::parse_records_csv(io::read_text(a.records));
  if (records.empty()) throw DataError("records file has no rows");
  out << ic1::eta_table(records);
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"gac: two-stage generative audio codec on synthetic audio"};
  app.footer(default_help());
  app.require_subcommand(1);
  Args a;

  auto* gen = app.add_subcommand("gen-data", "Synthesise a labelled corpus");
  gen->add_option("--config", a.config, "RunConfig JSON (defaults below when omitted)");
  gen->add_option("--corpus-out", a.corpus_out, "Output corpus file")->required();
  gen->add_option("--seed", a.seed, "Override the global seed");
  gen->add_option("--n-clips", a.n_clips, "Override corpus.n_clips");

  auto* t1 = app.add_subcommand("train-stage1", "Train the semantic encoder and codebook");
  t1->add_option("--config", a.config, "RunConfig JSON");
  t1->add_option("--corpus", a.corpus, "Corpus file")->required();
  t1->add_option("--out", a.out, "Output checkpoint")->required();
  t1->add_option("--seed", a.seed, "Override the global seed");
  t1->add_option("--steps", a.steps, "Override stage1.steps");
  t1->add_option("--codebook-size", a.codebook_size, "Override stage1.codebook_size");
  t1->add_option("--downsample", a.downsample, "Override stage1.downsample");

  auto* t2 = app.add_subcommand("train-stage2", "Train the flow decoder on a frozen stage 1");
  t2->add_option("--config", a.config, "RunConfig JSON");
  t2->add_option("--corpus", a.corpus, "Corpus file")->required();
  t2->add_option("--stage1", a.stage1, "Frozen stage-1 checkpoint")->required();
  t2->add_option("--tier", a.tier, "small | medium | large (sets width and depth)")
      ->check(CLI::IsMember({"small", "medium", "large"}));
  t2->add_option("--out", a.out, "Output checkpoint")->required();
  t2->add_option("--seed", a.seed, "Override the global seed");
  t2->add_option("--steps", a.steps, "Override stage2.steps");

  auto* enc = app.add_subcommand("encode", "Encode one corpus clip to a bitstream");
  enc->add_option("--stage1", a.stage1, "Stage-1 checkpoint")->required();
  enc->add_option("--corpus", a.corpus, "Corpus file")->required();
  enc->add_option("--in", a.clip_index, "Clip index")->required();
  enc->add_option("--out", a.out, "Output .gacb file")->required();

  auto* dec = app.add_subcommand("decode", "Decode a bitstream to log band energies");
  dec->add_option("--stage1", a.stage1, "Stage-1 checkpoint")->required();
  dec->add_option("--stage2", a.stage2, "Stage-2 checkpoint")->required();
  dec->add_option("--in", a.in, "Input .gacb file")->required();
  dec->add_option("--steps", a.decode_steps, "Euler steps")->capture_default_str();
  dec->add_option("--seed", a.decode_seed, "Sampling seed")->capture_default_str();
  dec->add_option("--features-out", a.features_out, "Output CSV (frames x bands)")->required();

  auto* ev = app.add_subcommand("eval", "Score a trained codec on the held-out split");
  ev->add_option("--config", a.config, "RunConfig JSON");
  ev->add_option("--corpus", a.corpus, "Corpus file")->required();
  ev->add_option("--stage1", a.stage1, "Stage-1 checkpoint")->required();
  ev->add_option("--stage2", a.stage2, "Stage-2 checkpoint")->required();
  ev->add_option("--csv-out", a.csv_out, "Output metrics CSV")->required();
  ev->add_option("--seed", a.seed, "Override the global seed");

  auto* sc = app.add_subcommand("scaling", "Run the tier x bitrate x seed decoder grid");
  sc->add_option("--grid", a.grid, "RunConfig JSON with a scaling section")->required();
  sc->add_option("--out-dir", a.out_dir, "Directory for records.csv and report.md")->required();
  sc->add_option("--jobs", a.jobs, "Parallel workers (default 1)");
  sc->add_option("--steps", a.steps, "Override scaling.steps");
  sc->add_option("--corpus", a.corpus, "Override scaling.corpus");

  auto* fit = app.add_subcommand("ic1-fit", "Print the capacity table for a records CSV");
  fit->add_option("--records", a.records, "records.csv from `scaling`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(a, out);
    if (*t1) return cmd_train_stage1(a, out);
    if (*t2) return cmd_train_stage2(a, out);
    if (*enc) return cmd_encode(a, out);
    if (*dec) return cmd_decode(a, out);
    if (*ev) return cmd_eval(a, out);
    if (*sc) return cmd_scaling(a, out);
    if (*fit) return cmd_ic1_fit(a, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const DivergenceError& e) {
    err << "training diverged: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitConfig;
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace gac::cli
