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

// JSON (de)serialisation of every module config, plus the CLI's RunConfig.
// Parsing rejects unknown keys; missing keys keep their defaults.

#include <cstdint>
#include <string>

#include "json.hpp"

#include "gac/evalkit.hpp"
#include "gac/ic1.hpp"
#include "gac/stage1.hpp"
#include "gac/stage2.hpp"

namespace gac {

using json = nlohmann::json;

struct CorpusConfig {
  int n_clips = 2000;
  bool stratified = false;
};

struct CodecConfig {
  int ode_steps = 32;
  uint64_t decode_seed = 7;
};

struct RunConfig {
  uint64_t seed = 1;
  CorpusConfig corpus;
  stage1::Stage1Config stage1;
  stage2::Stage2Config stage2;
  CodecConfig codec;
  evalkit::EvalConfig eval;
  ic1::ScalingOptions scaling;
};

json to_json(const CorpusConfig& c);
json to_json(const stage1::Stage1Config& c);
json to_json(const stage2::Stage2Config& c);
json to_json(const CodecConfig& c);
json to_json(const evalkit::EvalConfig& c);
json to_json(const ic1::ScalingOptions& c);
json to_json(const RunConfig& c);

void from_json_strict(const json& j, CorpusConfig& c);
void from_json_strict(const json& j, stage1::Stage1Config& c);
void from_json_strict(const json& j, stage2::Stage2Config& c);
void from_json_strict(const json& j, CodecConfig& c);
void from_json_strict(const json& j, evalkit::EvalConfig& c);
void from_json_strict(const json& j, ic1::ScalingOptions& c);
void from_json_strict(const json& j, RunConfig& c);

// Reads and validates a RunConfig file; throws ConfigError.
RunConfig load_run_config(const std::string& path);

}  // namespace gac
