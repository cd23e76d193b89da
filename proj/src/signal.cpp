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

#include "gac/signal.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

#include "gac/error.hpp"
#include "gac/io.hpp"
#include "gac/prng.hpp"

namespace gac::signal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kBandQ = 10.0;
constexpr double kLinearLimitHz = 500.0;

double envelope(int n, int attack_len, int decay_len) {
  double e = 1.0;
  if (attack_len > 0 && n < attack_len) e = std::min(e, static_cast<double>(n) / attack_len);
  if (decay_len > 0 && n >= kClipSamples - decay_len) {
    e = std::min(e, static_cast<double>(kClipSamples - 1 - n) / decay_len);
  }
  return e;
}

// RBJ band-pass biquad, 0 dB peak gain.
Waveform bandpass(const Waveform& x, double fc, double q) {
  const double w0 = kTwoPi * fc / kSampleRate;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;
  const double b0 = alpha / a0;
  const double b2 = -alpha / a0;
  const double a1 = -2.0 * std::cos(w0) / a0;
  const double a2 = (1.0 - alpha) / a0;
  Waveform y(x.size());
  double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
  for (size_t n = 0; n < x.size(); ++n) {
    const double v = b0 * x[n] + b2 * x2 - a1 * y1 - a2 * y2;
    x2 = x1;
    x1 = x[n];
    y2 = y1;
    y1 = v;
    y[n] = v;
  }
  return y;
}

double warp(double f) {
  return f <= kLinearLimitHz ? f : kLinearLimitHz * (1.0 + std::log(f / kLinearLimitHz));
}

double unwarp(double u) {
  return u <= kLinearLimitHz ? u : kLinearLimitHz * std::exp(u / kLinearLimitHz - 1.0);
}

struct FrontEnd {
  BandTable bands;
  Eigen::MatrixXd cos_table;  // frame_len x n_bins, Hann window folded in
  Eigen::MatrixXd sin_table;
};

std::unique_ptr<FrontEnd> build_front_end(const FeatureConfig& cfg) {
  auto fe = std::make_unique<FrontEnd>();
  const int n = cfg.frame_len;
  const int bins = n / 2 + 1;
  const double nyquist = kSampleRate / 2.0;

  auto& bt = fe->bands;
  bt.points.resize(cfg.n_bands + 2);
  const double top = warp(nyquist);
  for (int j = 0; j < cfg.n_bands + 2; ++j) {
    bt.points[j] = unwarp(top * j / (cfg.n_bands + 1));
  }
  bt.points.back() = nyquist;
  bt.weights = Eigen::MatrixXd::Zero(bins, cfg.n_bands);
  for (int k = 0; k < bins; ++k) {
    const double f = static_cast<double>(k) * kSampleRate / n;
    for (int b = 0; b < cfg.n_bands; ++b) {
      const double lo = bt.points[b], mid = bt.points[b + 1], hi = bt.points[b + 2];
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      bt.weights(k, b) = w;
    }
  }

  // Periodic Hann window.
  fe->cos_table.resize(n, bins);
  fe->sin_table.resize(n, bins);
  for (int t = 0; t < n; ++t) {
    const double win = 0.5 - 0.5 * std::cos(kTwoPi * t / n);
    for (int k = 0; k < bins; ++k) {
      const double ph = kTwoPi * static_cast<double>((static_cast<long>(k) * t) % n) / n;
      fe->cos_table(t, k) = win * std::cos(ph);
      fe->sin_table(t, k) = -win * std::sin(ph);
    }
  }
  return fe;
}

const FrontEnd& front_end(const FeatureConfig& cfg) {
  static std::mutex mu;
  static std::map<std::pair<int, int>, std::unique_ptr<FrontEnd>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[{cfg.frame_len, cfg.n_bands}];
  if (!slot) slot = build_front_end(cfg);
  return *slot;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::Tone:
      return "tone";
    case Family::Chirp:
      return "chirp";
    case Family::NoiseBurst:
      return "noise_burst";
  }
  return "unknown";
}

double ClipSpec::f0() const { return 110.0 * std::exp2(pitch_bucket / 2.0); }

void ClipSpec::validate() const {
  if (static_cast<int>(family) < 0 || static_cast<int>(family) >= kNumFamilies) {
    throw RangeError("clip family out of range");
  }
  if (pitch_bucket < 0 || pitch_bucket >= kNumPitchBuckets) {
    throw RangeError("pitch_bucket must lie in [0, 7]");
  }
  if (!(amp >= 0.1 && amp <= 1.0)) throw RangeError("amp must lie in [0.1, 1]");
  if (!(attack >= 0.0 && attack < 1.0) || !(decay >= 0.0 && decay < 1.0) ||
      attack + decay > 1.0) {
    throw RangeError("attack/decay fractions must lie in [0, 1) and sum to at most 1");
  }
  if (harmonics < 1 || harmonics > 3) throw RangeError("harmonics must lie in [1, 3]");
  if (!std::isfinite(sweep_rate)) throw RangeError("sweep_rate must be finite");
}

Label Label::from_spec(const ClipSpec& s) {
  return Label{static_cast<int>(s.family) * kNumPitchBuckets + s.pitch_bucket};
}

Waveform synth_clip(const ClipSpec& spec, uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const double f0 = spec.f0();
  const double fs = kSampleRate;
  Waveform raw(kClipSamples, 0.0);

  switch (spec.family) {
    case Family::Tone: {
      for (int k = 1; k <= spec.harmonics; ++k) {
        // The fundamental starts at phase zero; overtones get seeded phases.
        const double phase = (k == 1) ? 0.0 : kTwoPi * rng.uniform();
        for (int n = 0; n < kClipSamples; ++n) {
          raw[n] += std::sin(kTwoPi * k * f0 * n / fs + phase) / k;
        }
      }
      break;
    }
    case Family::Chirp: {
      for (int n = 0; n < kClipSamples; ++n) {
        const double t = n / fs;
        raw[n] = std::sin(kTwoPi * (f0 * t + 0.5 * spec.sweep_rate * t * t));
      }
      break;
    }
    case Family::NoiseBurst: {
      Waveform noise(kClipSamples);
      for (auto& v : noise) v = rng.normal();
      raw = bandpass(noise, f0, kBandQ);
      break;
    }
  }

  const int attack_len = static_cast<int>(std::lround(spec.attack * kClipSamples));
  const int decay_len = static_cast<int>(std::lround(spec.decay * kClipSamples));
  double peak = 0.0;
  for (int n = 0; n < kClipSamples; ++n) {
    raw[n] *= envelope(n, attack_len, decay_len);
    peak = std::max(peak, std::abs(raw[n]));
  }
  if (peak > 0.0) {
    for (auto& v : raw) v = (v / peak) * spec.amp;
  }
  return raw;
}

Corpus make_corpus(int n_clips, uint64_t seed, bool stratified) {
  if (n_clips < 1) throw ConfigError("make_corpus: n_clips must be >= 1");
  Corpus c;
  c.seed = seed;
  c.clips.resize(n_clips);
  const Rng root(seed);
  for (int i = 0; i < n_clips; ++i) {
    Rng r = root.split(static_cast<uint64_t>(i));
    ClipSpec s;
    int cls;
    if (stratified) {
      cls = i % kNumClasses;
    } else {
      cls = static_cast<int>(r.below(kNumClasses));
    }
    s.family = static_cast<Family>(cls / kNumPitchBuckets);
    s.pitch_bucket = cls % kNumPitchBuckets;
    s.amp = r.uniform(0.1, 1.0);
    s.attack = r.uniform(0.02, 0.2);
    s.decay = r.uniform(0.02, 0.2);
    s.harmonics = s.family == Family::Tone ? 1 + static_cast<int>(r.below(3)) : 1;
    s.sweep_rate = s.family == Family::Chirp ? r.uniform(0.1, 0.4) * s.f0() : 0.0;
    const uint64_t clip_seed = r.next_u64();
    // Held at 16-bit resolution so a saved corpus reloads to the same samples.
    auto wave = synth_clip(s, clip_seed);
    for (auto& x : wave) x = from_pcm16(to_pcm16(x));
    c.clips[i] = Clip{std::move(wave), Label::from_spec(s), s, clip_seed};
  }
  return c;
}

const BandTable& band_table(const FeatureConfig& cfg) { return front_end(cfg).bands; }

FeatureSequence extract_features(std::span<const double> w, const FeatureConfig& cfg) {
  if (static_cast<int>(w.size()) != kClipSamples) {
    throw ShapeError("extract_features: waveform must have " + std::to_string(kClipSamples) +
                     " samples, got " + std::to_string(w.size()));
  }
  if (cfg.frame_len != 2 * cfg.hop) throw ConfigError("frame_len must equal 2 * hop");
  const auto& fe = front_end(cfg);
  const int t_frames = cfg.num_frames();
  Eigen::MatrixXd frames(t_frames, cfg.frame_len);
  for (int t = 0; t < t_frames; ++t) {
    for (int j = 0; j < cfg.frame_len; ++j) frames(t, j) = w[t * cfg.hop + j];
  }
  const Eigen::MatrixXd re = frames * fe.cos_table;
  const Eigen::MatrixXd im = frames * fe.sin_table;
  const Eigen::MatrixXd power = re.array().square() + im.array().square();
  FeatureSequence e = power * fe.bands.weights;
  const double floor_log = std::log(cfg.log_floor);
  return e.unaryExpr([&](double x) { return x > cfg.log_floor ? std::log(x) : floor_log; });
}

int16_t to_pcm16(double s) {
  const double c = std::clamp(s, -1.0, 1.0);
  return static_cast<int16_t>(std::lround(c * 32767.0));
}

double from_pcm16(int16_t v) { return static_cast<double>(v) / 32767.0; }

namespace {
constexpr char kCorpusMagic[4] = {'G', 'A', 'C', 'C'};
constexpr uint8_t kCorpusVersion = 1;
}  // namespace

std::vector<uint8_t> serialize_corpus(const Corpus& c) {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const uint8_t*>(kCorpusMagic), 4});
  w.u8(kCorpusVersion);
  w.u32(static_cast<uint32_t>(c.clips.size()));
  w.u64(c.seed);
  for (const auto& clip : c.clips) {
    w.u8(static_cast<uint8_t>(clip.label.class_id));
    w.u8(static_cast<uint8_t>(clip.spec.family));
    w.u8(static_cast<uint8_t>(clip.spec.pitch_bucket));
    w.u8(static_cast<uint8_t>(clip.spec.harmonics));
    w.f64(clip.spec.amp);
    w.f64(clip.spec.attack);
    w.f64(clip.spec.decay);
    w.f64(clip.spec.sweep_rate);
    w.u64(clip.seed);
    if (static_cast<int>(clip.wave.size()) != kClipSamples) {
      throw ShapeError("serialize_corpus: clip has wrong sample count");
    }
    for (double s : clip.wave) w.i16(to_pcm16(s));
  }
  return w.take();
}

Corpus deserialize_corpus(std::span<const uint8_t> bytes) {
  io::ByteReader r(bytes);
  const auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kCorpusMagic)) {
    throw FormatError("not a corpus file (bad magic)");
  }
  if (r.u8() != kCorpusVersion) throw FormatError("unsupported corpus version");
  Corpus c;
  const uint32_t count = r.u32();
  c.seed = r.u64();
  c.clips.resize(count);
  for (auto& clip : c.clips) {
    const int label = r.u8();
    clip.spec.family = static_cast<Family>(r.u8());
    clip.spec.pitch_bucket = r.u8();
    clip.spec.harmonics = r.u8();
    clip.spec.amp = r.f64();
    clip.spec.attack = r.f64();
    clip.spec.decay = r.f64();
    clip.spec.sweep_rate = r.f64();
    clip.seed = r.u64();
    try {
      clip.spec.validate();
    } catch (const RangeError& e) {
      throw FormatError(std::string("corpus record has invalid spec: ") + e.what());
    }
    clip.label = Label{label};
    if (Label::from_spec(clip.spec).class_id != label) {
      throw FormatError("corpus record label does not match its spec");
    }
    clip.wave.resize(kClipSamples);
    for (auto& s : clip.wave) s = from_pcm16(r.i16());
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after corpus records");
  return c;
}

void save_corpus(const Corpus& c, const std::filesystem::path& path) {
  io::write_file(path, serialize_corpus(c));
}

Corpus load_corpus(const std::filesystem::path& path) {
  return deserialize_corpus(io::read_file(path));
}

}  // namespace gac::signal
