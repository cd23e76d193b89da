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
#include <numbers>

#include "doctest.h"

#include "gac/error.hpp"
#include "gac/signal.hpp"

using namespace gac;
using namespace gac::signal;

namespace {

ClipSpec pure_tone(double amp) {
  ClipSpec s;
  s.family = Family::Tone;
  s.pitch_bucket = 0;
  s.harmonics = 1;
  s.amp = amp;
  s.attack = 0.0;
  s.decay = 0.0;
  return s;
}

}  // namespace

TEST_CASE("pure 110 Hz tone with a flat envelope") {
  const auto w = synth_clip(pure_tone(1.0), 3);
  REQUIRE(w.size() == static_cast<size_t>(kClipSamples));
  double peak = 0;
  for (double x : w) peak = std::max(peak, std::abs(x));
  CHECK(peak == doctest::Approx(1.0).epsilon(1e-12));
  // Matches sin(2 pi 110 n / 8000) up to the peak normalisation.
  double raw_peak = 0;
  for (int n = 0; n < kClipSamples; ++n) {
    raw_peak = std::max(raw_peak, std::abs(std::sin(2 * std::numbers::pi * 110.0 * n / kSampleRate)));
  }
  for (int n = 0; n < kClipSamples; n += 37) {
    CHECK(w[n] == doctest::Approx(std::sin(2 * std::numbers::pi * 110.0 * n / kSampleRate) / raw_peak)
                      .epsilon(1e-9));
  }
}

TEST_CASE("amplitude scales every sample linearly") {
  for (auto fam : {Family::Tone, Family::Chirp, Family::NoiseBurst}) {
    ClipSpec s = pure_tone(1.0);
    s.family = fam;
    s.pitch_bucket = 5;
    s.attack = 0.1;
    s.decay = 0.2;
    s.sweep_rate = fam == Family::Chirp ? 50.0 : 0.0;
    const auto a = synth_clip(s, 11);
    s.amp = 0.5;
    const auto b = synth_clip(s, 11);
    for (size_t i = 0; i < a.size(); ++i) REQUIRE(b[i] == 0.5 * a[i]);
  }
}

TEST_CASE("synthesis is deterministic and seeds matter for noise") {
  ClipSpec s = pure_tone(0.7);
  s.family = Family::NoiseBurst;
  s.pitch_bucket = 4;
  CHECK(synth_clip(s, 5) == synth_clip(s, 5));
  CHECK(synth_clip(s, 5) != synth_clip(s, 6));
}

TEST_CASE("peak never exceeds one") {
  const auto c = make_corpus(200, 9);
  for (const auto& clip : c.clips) {
    double peak = 0;
    for (double x : clip.wave) peak = std::max(peak, std::abs(x));
    REQUIRE(peak <= 1.0);
    REQUIRE(peak > 0.05);
  }
}

TEST_CASE("spec validation") {
  ClipSpec s = pure_tone(1.0);
  s.pitch_bucket = 8;
  CHECK_THROWS_AS(s.validate(), RangeError);
  s = pure_tone(0.05);
  CHECK_THROWS_AS(s.validate(), RangeError);
  s = pure_tone(1.0);
  s.harmonics = 4;
  CHECK_THROWS_AS(s.validate(), RangeError);
  for (int pb = 0; pb < kNumPitchBuckets; ++pb) {
    s = pure_tone(1.0);
    s.pitch_bucket = pb;
    CHECK(s.f0() == doctest::Approx(110.0 * std::pow(2.0, pb / 2.0)));
    CHECK(3 * s.f0() < kSampleRate / 2.0);
  }
}

TEST_CASE("labels are bijective with (family, pitch)") {
  for (int f = 0; f < kNumFamilies; ++f) {
    for (int pb = 0; pb < kNumPitchBuckets; ++pb) {
      ClipSpec s;
      s.family = static_cast<Family>(f);
      s.pitch_bucket = pb;
      const auto l = Label::from_spec(s);
      CHECK(l.class_id == f * 8 + pb);
      CHECK(l.family() == s.family);
      CHECK(l.pitch_bucket() == pb);
    }
  }
}

TEST_CASE("stratified corpus of 24 has one clip per class") {
  const auto c = make_corpus(24, 1, true);
  std::vector<int> seen(kNumClasses, 0);
  for (const auto& clip : c.clips) ++seen[clip.label.class_id];
  for (int n : seen) CHECK(n == 1);
}

TEST_CASE("corpus is deterministic") {
  const auto a = make_corpus(1000, 17);
  const auto b = make_corpus(1000, 17);
  CHECK(serialize_corpus(a) == serialize_corpus(b));
  CHECK(serialize_corpus(a) != serialize_corpus(make_corpus(1000, 18)));
}

TEST_CASE("class histogram of 24000 clips") {
  const auto c = make_corpus(24000, 1);
  std::vector<int> hist(kNumClasses, 0);
  for (const auto& clip : c.clips) ++hist[clip.label.class_id];
  for (int n : hist) {
    CHECK(n >= 800);
    CHECK(n <= 1200);
  }
}

TEST_CASE("silence hits the floor everywhere") {
  const Waveform zero(kClipSamples, 0.0);
  const auto f = extract_features(zero);
  CHECK(f.rows() == 31);
  CHECK(f.cols() == 32);
  CHECK((f.array() == std::log(1e-8)).all());
}

TEST_CASE("110 Hz tone peaks in the band centred nearest 110 Hz") {
  const auto w = synth_clip(pure_tone(1.0), 1);
  const auto f = extract_features(w);
  const auto& bt = band_table(FeatureConfig{});
  int nearest = 0;
  for (int b = 1; b < 32; ++b) {
    if (std::abs(bt.center(b) - 110.0) < std::abs(bt.center(nearest) - 110.0)) nearest = b;
  }
  Eigen::Index arg;
  f.row(15).maxCoeff(&arg);
  CHECK(arg == nearest);
}

TEST_CASE("halving the waveform lowers features by ln 4") {
  const auto c = make_corpus(6, 2);
  const double floor = std::log(1e-8);
  for (const auto& clip : c.clips) {
    auto half = clip.wave;
    for (auto& x : half) x *= 0.5;
    const auto a = extract_features(clip.wave);
    const auto b = extract_features(half);
    for (Eigen::Index i = 0; i < a.size(); ++i) {
      if (b(i) > floor) REQUIRE(a(i) - b(i) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
    }
  }
}

TEST_CASE("louder never lowers a feature") {
  const auto c = make_corpus(6, 3);
  for (const auto& clip : c.clips) {
    auto loud = clip.wave;
    for (auto& x : loud) x *= 1.7;
    const auto a = extract_features(clip.wave);
    const auto b = extract_features(loud);
    CHECK(((b - a).array() >= -1e-12).all());
  }
}

TEST_CASE("features are finite, floored, 31 frames, and repeatable") {
  const auto c = make_corpus(30, 4);
  for (const auto& clip : c.clips) {
    const auto f = extract_features(clip.wave);
    REQUIRE(f.rows() == 31);
    REQUIRE(f.allFinite());
    REQUIRE((f.array() >= std::log(1e-8)).all());
    REQUIRE(f == extract_features(clip.wave));
  }
  CHECK_THROWS_AS(extract_features(Waveform(100, 0.0)), ShapeError);
}

TEST_CASE("band table shape") {
  const auto& bt = band_table(FeatureConfig{});
  CHECK(bt.points.size() == 34);
  CHECK(bt.points.front() == 0.0);
  CHECK(bt.points.back() == doctest::Approx(4000.0));
  CHECK(bt.weights.rows() == 161);
  CHECK(bt.weights.cols() == 32);
  for (size_t i = 1; i < bt.points.size(); ++i) CHECK(bt.points[i] > bt.points[i - 1]);
  // Every band receives energy from at least one bin.
  for (int b = 0; b < 32; ++b) CHECK(bt.weights.col(b).sum() > 0.0);
}

TEST_CASE("corpus file round trip and damage") {
  const auto c = make_corpus(12, 5);
  const auto bytes = serialize_corpus(c);
  const auto back = deserialize_corpus(bytes);
  REQUIRE(back.clips.size() == c.clips.size());
  CHECK(back.seed == c.seed);
  for (size_t i = 0; i < c.clips.size(); ++i) {
    CHECK(back.clips[i].wave == c.clips[i].wave);
    CHECK(back.clips[i].label.class_id == c.clips[i].label.class_id);
    CHECK(back.clips[i].spec.amp == c.clips[i].spec.amp);
    CHECK(back.clips[i].seed == c.clips[i].seed);
  }
  CHECK(serialize_corpus(back) == bytes);
  auto bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_corpus(bad), DataError);
  bad = bytes;
  bad.resize(bytes.size() - 3);
  CHECK_THROWS_AS(deserialize_corpus(bad), DataError);
}

TEST_CASE("pcm16 conversion") {
  CHECK(to_pcm16(1.0) == 32767);
  CHECK(to_pcm16(-1.0) == -32767);
  CHECK(to_pcm16(0.0) == 0);
  CHECK(from_pcm16(32767) == 1.0);
}
