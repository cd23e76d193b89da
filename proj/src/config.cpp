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

#include "gac/config.hpp"

#include <filesystem>
#include <set>

#include "gac/error.hpp"
#include "gac/io.hpp"

namespace gac {

namespace {

using gac::from_json_strict;
void from_json_strict(const json& j, evalkit::JudgeConfig& c);

// Pulls known keys out of one JSON object and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j.is_object()) throw ConfigError(where() + "expected a JSON object");
  }

  template <typename T>
  Fields& get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return *this;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where() + "bad value for '" + key + "'");
    }
    return *this;
  }

  template <typename T>
  Fields& nested(const char* key, T& out) {
    seen_.insert(key);
    if (j_.contains(key)) from_json_strict(j_.at(key), out);
    return *this;
  }

  Fields& known(const char* key) {
    seen_.insert(key);
    return *this;
  }

  void done() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(where() + "unknown key '" + k + "'");
    }
  }

 private:
  std::string where() const { return section_.empty() ? "config: " : "config." + section_ + ": "; }

  const json& j_;
  std::string section_;
  std::set<std::string> seen_;
};

struct Stage2Shape {
  int width = 0;
  int depth = 0;
};

void from_json_strict(const json& j, evalkit::JudgeConfig& c) {
  Fields(j, "eval.judge")
      .get("hidden", c.hidden)
      .get("steps", c.steps)
      .get("batch_size", c.batch_size)
      .get("lr", c.lr)
      .done();
}

json to_json(const evalkit::JudgeConfig& c) {
  return {{"hidden", c.hidden}, {"steps", c.steps}, {"batch_size", c.batch_size}, {"lr", c.lr}};
}

void from_json_strict(const json& j, ic1::BitratePoint& p) {
  Fields(j, "scaling.points")
      .get("K", p.codebook_size)
      .get("s", p.downsample)
      .get("stage1", p.stage1)
      .done();
}

}  // namespace

json to_json(const CorpusConfig& c) {
  return {{"n_clips", c.n_clips}, {"stratified", c.stratified}};
}

json to_json(const stage1::Stage1Config& c) {
  return {{"latent_dim", c.latent_dim}, {"codebook_size", c.codebook_size},
          {"downsample", c.downsample}, {"beta", c.beta},
          {"gamma", c.gamma},           {"tau", c.tau},
          {"context", c.context},       {"encoder_hidden", c.encoder_hidden},
          {"head_hidden", c.head_hidden}, {"steps", c.steps},
          {"batch_size", c.batch_size}, {"lr", c.lr},
          {"ema_decay", c.ema_decay}};
}

json to_json(const stage2::Stage2Config& c) {
  return {{"tier", c.tier},         {"hidden_width", c.hidden_width},
          {"depth", c.depth},       {"activation", c.activation},
          {"window", c.window},     {"ode_steps", c.ode_steps},
          {"steps", c.steps},       {"batch_clips", c.batch_clips},
          {"lr", c.lr},             {"lr_schedule", c.lr_schedule}};
}

json to_json(const CodecConfig& c) {
  return {{"ode_steps", c.ode_steps}, {"decode_seed", c.decode_seed}};
}

json to_json(const evalkit::EvalConfig& c) {
  return {{"mmd_max_frames", c.mmd_max_frames},
          {"ode_steps", c.ode_steps},
          {"decode_seed", c.decode_seed},
          {"judge", to_json(c.judge)}};
}

json to_json(const ic1::ScalingOptions& c) {
  json points = json::array();
  for (const auto& p : c.points) {
    points.push_back({{"K", p.codebook_size}, {"s", p.downsample}, {"stage1", p.stage1}});
  }
  return {{"corpus", c.corpus}, {"tiers", c.tiers}, {"points", points},
          {"seeds", c.seeds},   {"steps", c.steps}, {"jobs", c.jobs}};
}

json to_json(const RunConfig& c) {
  return {{"seed", c.seed},
          {"corpus", to_json(c.corpus)},
          {"stage1", to_json(c.stage1)},
          {"stage2", to_json(c.stage2)},
          {"codec", to_json(c.codec)},
          {"eval", to_json(c.eval)},
          {"scaling", to_json(c.scaling)}};
}

void from_json_strict(const json& j, CorpusConfig& c) {
  Fields(j, "corpus").get("n_clips", c.n_clips).get("stratified", c.stratified).done();
  if (c.n_clips < 1) throw ConfigError("config.corpus: n_clips must be >= 1");
}

void from_json_strict(const json& j, stage1::Stage1Config& c) {
  Fields(j, "stage1")
      .get("latent_dim", c.latent_dim)
      .get("codebook_size", c.codebook_size)
      .get("downsample", c.downsample)
      .get("beta", c.beta)
      .get("gamma", c.gamma)
      .get("tau", c.tau)
      .get("context", c.context)
      .get("encoder_hidden", c.encoder_hidden)
      .get("head_hidden", c.head_hidden)
      .get("steps", c.steps)
      .get("batch_size", c.batch_size)
      .get("lr", c.lr)
      .get("ema_decay", c.ema_decay)
      .done();
  c.validate();
}

void from_json_strict(const json& j, stage2::Stage2Config& c) {
  Fields(j, "stage2")
      .get("tier", c.tier)
      .get("hidden_width", c.hidden_width)
      .get("depth", c.depth)
      .get("activation", c.activation)
      .get("window", c.window)
      .get("ode_steps", c.ode_steps)
      .get("steps", c.steps)
      .get("batch_clips", c.batch_clips)
      .get("lr", c.lr)
      .get("lr_schedule", c.lr_schedule)
      .done();
  // A tier fixes width and depth unless they are given explicitly.
  if (j.contains("tier")) {
    Stage2Shape shape;
    try {
      const auto t = stage2::Stage2Config::for_tier(stage2::tier_from_string(c.tier));
      shape = {t.hidden_width, t.depth};
    } catch (const Error& e) {
      throw ConfigError(std::string("config.stage2: ") + e.what());
    }
    if (!j.contains("hidden_width")) c.hidden_width = shape.width;
    if (!j.contains("depth")) c.depth = shape.depth;
  }
  c.validate();
}

void from_json_strict(const json& j, CodecConfig& c) {
  Fields(j, "codec").get("ode_steps", c.ode_steps).get("decode_seed", c.decode_seed).done();
  if (c.ode_steps < 1) throw ConfigError("config.codec: ode_steps must be >= 1");
}

void from_json_strict(const json& j, evalkit::EvalConfig& c) {
  Fields(j, "eval")
      .get("mmd_max_frames", c.mmd_max_frames)
      .get("ode_steps", c.ode_steps)
      .get("decode_seed", c.decode_seed)
      .nested("judge", c.judge)
      .done();
  if (c.ode_steps < 1) throw ConfigError("config.eval: ode_steps must be >= 1");
  if (c.judge.hidden < 1 || c.judge.steps < 0 || c.judge.batch_size < 1 || !(c.judge.lr > 0)) {
    throw ConfigError("config.eval.judge: hidden, batch_size and lr must be positive");
  }
}

void from_json_strict(const json& j, ic1::ScalingOptions& c) {
  Fields f(j, "scaling");
  f.get("corpus", c.corpus).get("tiers", c.tiers).get("seeds", c.seeds).get("steps", c.steps);
  f.get("jobs", c.jobs);
  if (j.contains("points")) {
    const auto& pts = j.at("points");
    if (!pts.is_array()) throw ConfigError("config.scaling: points must be an array");
    c.points.clear();
    for (const auto& p : pts) {
      ic1::BitratePoint bp;
      from_json_strict(p, bp);
      c.points.push_back(bp);
    }
  }
  f.known("points").done();
  for (const auto& t : c.tiers) {
    try {
      stage2::tier_from_string(t);
    } catch (const Error& e) {
      throw ConfigError(std::string("config.scaling: ") + e.what());
    }
  }
  if (c.steps < 1) throw ConfigError("config.scaling: steps must be >= 1");
  if (c.jobs < 1) throw ConfigError("config.scaling: jobs must be >= 1");
}

void from_json_strict(const json& j, RunConfig& c) {
  Fields(j, "")
      .get("seed", c.seed)
      .nested("corpus", c.corpus)
      .nested("stage1", c.stage1)
      .nested("stage2", c.stage2)
      .nested("codec", c.codec)
      .nested("eval", c.eval)
      .nested("scaling", c.scaling)
      .done();
}

RunConfig load_run_config(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path + ": " + e.what());
  } catch (const DataError& e) {
    throw ConfigError(std::string("cannot read config: ") + e.what());
  }
  RunConfig c;
  from_json_strict(j, c);
  return c;
}

}  // namespace gac
