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

#include <cstdint>
#include <random>
#include <string_view>

namespace gac {

// Seeded random stream.
//
// Engine: std::mt19937_64 seeded with splitmix64(seed).
// uniform(): top 53 bits of one engine draw scaled by 2^-53, in [0, 1).
// normal(): Box-Muller on two uniforms, the second variate of each pair is
//   cached and returned by the next call.
// split(tag): a child stream whose seed is splitmix64(seed ^ fnv1a64(tag)).
//   Children depend only on (root seed, tag), never on how many values the
//   parent has already produced.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);
  double normal();

  Rng split(std::string_view tag) const;
  Rng split(uint64_t key) const;
  Rng split(uint64_t a, uint64_t b) const { return split(a).split(b); }

 private:
  uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t splitmix64(uint64_t x);
uint64_t fnv1a64(std::string_view s);

}  // namespace gac
