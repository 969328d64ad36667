#pragma once

// Synthetic bed-sensor recordings with per-frame reliability labels and
// per-minute ground-truth rates.
//
// Breathing is a jittered quasi-sinusoid. Movement is modelled by kinds whose
// energy sits well above breathing: speech adds ~5x irregular modulation,
// tremor ~20x oscillation at 4-8 Hz, random movement and coughs ~100x.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bedrr/error.hpp"
#include "bedrr/signal.hpp"

namespace bedrr {

enum class ActionKind { Still, DeepBreath, ShallowFast, Speak, RandomMove, CoughBurst, Tremor };

inline bool is_breathing(ActionKind k) {
  return k == ActionKind::Still || k == ActionKind::DeepBreath || k == ActionKind::ShallowFast;
}

inline const char* to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Still: return "still";
    case ActionKind::DeepBreath: return "deep_breath";
    case ActionKind::ShallowFast: return "shallow_fast";
    case ActionKind::Speak: return "speak";
    case ActionKind::RandomMove: return "random_move";
    case ActionKind::CoughBurst: return "cough_burst";
    case ActionKind::Tremor: return "tremor";
  }
  return "?";
}

inline ActionKind action_kind_from_string(const std::string& s) {
  for (auto k : {ActionKind::Still, ActionKind::DeepBreath, ActionKind::ShallowFast, ActionKind::Speak,
                 ActionKind::RandomMove, ActionKind::CoughBurst, ActionKind::Tremor})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown action kind: " + s);
}

inline constexpr double kDefaultBreathAmplitude = 0.05;
inline constexpr double kMoveGain = 100.0;
inline constexpr double kSpeakGain = 5.0;
inline constexpr double kTremorGain = 20.0;

/// Movement burst inside an action; times relative to the action start.
struct Burst {
  double start_s = 0.0;
  double duration_s = 0.0;
  double gain = kMoveGain;
};

struct Action {
  ActionKind kind = ActionKind::Still;
  double duration_s = 120.0;
  double rr_bpm = 16.0;        // breathing rate, also used under movement kinds
  double amplitude = kDefaultBreathAmplitude;
  double jitter_pct = 5.0;     // per-cycle period jitter, percent
  double shallow_fraction = 0.0;  // share of cycles at reduced depth
  double gain = 0.0;           // movement gain; 0 selects the kind's default
  std::vector<Burst> bursts;   // occasional movements inside breathing actions
};

struct ScenarioScript {
  std::vector<Action> actions;
  std::uint64_t seed = 0;

  void check() const {
    for (const auto& a : actions) {
      if (!(a.duration_s > 0.0)) throw ConfigError("action durations must be positive");
      if (a.rr_bpm < 4.0 || a.rr_bpm > 60.0) throw ConfigError("rr_bpm must lie in [4, 60]");
      if (!(a.amplitude > 0.0)) throw ConfigError("amplitude must be positive");
      if (a.jitter_pct < 0.0 || a.jitter_pct >= 100.0) throw ConfigError("jitter must lie in [0, 100)");
    }
  }
};

struct LabeledWaveform {
  WaveformRecord wave;
  std::vector<int> labels;                  // one per complete frame
  std::vector<std::optional<double>> gth;   // one per minute (trailing partial minute included)
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

// Mean-reverting random walk, smoothed, zero-mean and scaled to `target_rms`.
inline std::vector<double> band_limited_walk(std::size_t n, double target_rms, int fs, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> w(n);
  double x = 0.0;
  const double rho = std::exp(-1.0 / (0.8 * fs));  // ~0.8 s correlation time
  for (auto& v : w) {
    x = rho * x + g(rng);
    v = x;
  }
  // Three-tap smoothing removes sample-to-sample roughness.
  std::vector<double> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = w[k > 0 ? k - 1 : k], b = w[k], c = w[k + 1 < n ? k + 1 : k];
    s[k] = 0.25 * a + 0.5 * b + 0.25 * c;
  }
  const double r = rms(s);
  double mean = 0.0;
  for (double v : s) mean += v;
  mean /= static_cast<double>(std::max<std::size_t>(n, 1));
  for (auto& v : s) v = r > 0.0 ? (v - mean) * target_rms / r : 0.0;
  return s;
}

}  // namespace detail

/// Quasi-sinusoidal breathing: per-cycle periods drawn uniformly within
/// +/- jitter_pct of 60/rr_bpm, additive Gaussian noise at 2% of amplitude.
/// With shallow_fraction > 0 that share of cycles is drawn at 20% depth.
inline std::vector<double> gen_breathing(double rr_bpm, double duration_s, double amplitude, double jitter_pct,
                                         int fs, std::uint64_t seed, double shallow_fraction = 0.0) {
  if (fs <= 0) throw ConfigError("fs must be positive");
  if (rr_bpm < 4.0 || rr_bpm > 60.0) throw ConfigError("rr_bpm must lie in [4, 60]");
  if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jit(-jitter_pct / 100.0, jitter_pct / 100.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.02 * amplitude);

  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  const double base = 60.0 / rr_bpm;
  std::vector<double> out(n);
  double cycle_start = 0.0;
  double period = base * (1.0 + jit(rng));
  double depth = (shallow_fraction > 0.0 && u01(rng) < shallow_fraction) ? 0.2 : 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / fs;
    while (t >= cycle_start + period) {
      cycle_start += period;
      period = base * (1.0 + jit(rng));
      depth = (shallow_fraction > 0.0 && u01(rng) < shallow_fraction) ? 0.2 : 1.0;
    }
    out[k] = depth * amplitude * std::sin(2.0 * std::numbers::pi * (t - cycle_start) / period) + noise(rng);
  }
  return out;
}

struct InjectedSignal {
  std::vector<double> samples;
  std::vector<int> labels;  // one per complete frame
};

/// Replaces each burst region (overlaps merged) with a band-limited random
/// walk whose RMS is gain x the RMS of the input. Frames touching a burst are
/// labelled 0, all others 1.
inline InjectedSignal inject_movement(std::span<const double> samples, std::vector<Burst> bursts, int fs,
                                      std::uint64_t seed, double reference_rms = 0.0) {
  if (fs <= 0) throw ConfigError("fs must be positive");
  const double total_s = static_cast<double>(samples.size()) / fs;
  for (const auto& b : bursts)
    if (b.start_s < 0.0 || b.duration_s <= 0.0 || b.start_s + b.duration_s > total_s + 1e-9)
      throw OutOfRange("burst outside signal bounds");
  std::sort(bursts.begin(), bursts.end(), [](const Burst& a, const Burst& b) { return a.start_s < b.start_s; });
  std::vector<Burst> merged;
  for (const auto& b : bursts) {
    if (!merged.empty() && b.start_s <= merged.back().start_s + merged.back().duration_s) {
      auto& m = merged.back();
      const double end = std::max(m.start_s + m.duration_s, b.start_s + b.duration_s);
      m.duration_s = end - m.start_s;
      m.gain = std::max(m.gain, b.gain);
    } else {
      merged.push_back(b);
    }
  }

  const double ref = reference_rms > 0.0 ? reference_rms : detail::rms(samples);
  InjectedSignal out{std::vector<double>(samples.begin(), samples.end()),
                     std::vector<int>(samples.size() / static_cast<std::size_t>(fs), 1)};
  std::mt19937_64 rng(seed);
  for (const auto& b : merged) {
    const auto first = static_cast<std::size_t>(std::llround(b.start_s * fs));
    const auto last = std::min(samples.size(), static_cast<std::size_t>(std::llround((b.start_s + b.duration_s) * fs)));
    if (last <= first) continue;
    const auto walk = detail::band_limited_walk(last - first, b.gain * ref, fs, rng);
    std::copy(walk.begin(), walk.end(), out.samples.begin() + static_cast<std::ptrdiff_t>(first));
    const std::size_t f0 = first / static_cast<std::size_t>(fs);
    const std::size_t f1 = (last - 1) / static_cast<std::size_t>(fs);
    for (std::size_t f = f0; f <= f1 && f < out.labels.size(); ++f) out.labels[f] = 0;
  }
  return out;
}

namespace detail {

inline double breathing_rms(double amplitude) { return amplitude / std::numbers::sqrt2; }

// Speech: irregular breathing with syllable-like bursts of medium energy.
inline std::vector<double> gen_speak(const Action& a, int fs, std::mt19937_64& rng) {
  const double gain = a.gain > 0.0 ? a.gain : kSpeakGain;
  auto s = gen_breathing(a.rr_bpm, a.duration_s, a.amplitude, 40.0, fs, rng());
  std::uniform_real_distribution<double> on(0.3, 1.5), off(0.2, 1.2), u(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  const double target = gain * breathing_rms(a.amplitude);
  std::size_t k = 0;
  while (k < s.size()) {
    k += static_cast<std::size_t>(std::llround(off(rng) * fs));
    const auto len = static_cast<std::size_t>(std::llround(on(rng) * fs));
    const double f = 1.0 + 2.5 * u(rng);  // modulation frequency, Hz
    const double ph = 2.0 * std::numbers::pi * u(rng);
    for (std::size_t j = 0; j < len && k + j < s.size(); ++j) {
      const double env = std::sin(std::numbers::pi * static_cast<double>(j) / static_cast<double>(len));
      const double t = static_cast<double>(j) / fs;
      s[k + j] += target * std::numbers::sqrt2 * env *
                  (0.7 * std::sin(2.0 * std::numbers::pi * f * t + ph) + 0.3 * g(rng));
    }
    k += len;
  }
  return s;
}

// Coughs: decaying oscillatory impulses of movement-level energy.
inline std::vector<double> gen_cough(const Action& a, int fs, std::mt19937_64& rng) {
  const double gain = a.gain > 0.0 ? a.gain : kMoveGain;
  auto s = gen_breathing(a.rr_bpm, a.duration_s, a.amplitude, 20.0, fs, rng());
  std::uniform_real_distribution<double> gap(0.5, 3.0), u(0.0, 1.0);
  const double peak = gain * breathing_rms(a.amplitude) * 2.0;
  std::size_t k = static_cast<std::size_t>(std::llround(gap(rng) * fs));
  while (k < s.size()) {
    const double sgn = u(rng) < 0.5 ? -1.0 : 1.0;
    const auto len = static_cast<std::size_t>(1.5 * fs);
    for (std::size_t j = 0; j < len && k + j < s.size(); ++j) {
      const double t = static_cast<double>(j) / fs;
      s[k + j] += sgn * peak * std::exp(-3.0 * t) * std::cos(2.0 * std::numbers::pi * 1.3 * t);
    }
    k += len + static_cast<std::size_t>(std::llround(gap(rng) * fs));
  }
  return s;
}

inline std::vector<double> gen_tremor(const Action& a, int fs, std::mt19937_64& rng) {
  const double gain = a.gain > 0.0 ? a.gain : kTremorGain;
  auto s = gen_breathing(a.rr_bpm, a.duration_s, a.amplitude, 5.0, fs, rng());
  std::uniform_real_distribution<double> fr(4.0, 8.0), u(0.0, 1.0);
  const double f = fr(rng);
  const double amp = gain * breathing_rms(a.amplitude) * std::numbers::sqrt2;
  const double ph = 2.0 * std::numbers::pi * u(rng);
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double t = static_cast<double>(k) / fs;
    const double env = 0.75 + 0.25 * std::sin(2.0 * std::numbers::pi * 0.2 * t);
    s[k] += amp * env * std::sin(2.0 * std::numbers::pi * f * t + ph);
  }
  return s;
}

}  // namespace detail

/// Renders a script. Ground truth is recorded for every minute that lies
/// entirely within breathing actions of one scripted rate and has at least
/// half of its frames labelled reliable.
inline LabeledWaveform gen_scenario(const ScenarioScript& script, int fs = kDefaultFs) {
  script.check();
  if (fs <= 0) throw ConfigError("fs must be positive");
  LabeledWaveform out;
  out.wave.fs = fs;
  std::vector<int> sample_ok;         // 1 where the sample is breathing-only
  std::vector<double> sample_rate;    // scripted rate where breathing, else -1

  for (std::size_t ai = 0; ai < script.actions.size(); ++ai) {
    const Action& a = script.actions[ai];
    std::mt19937_64 rng(detail::mix_seed(script.seed, ai));
    std::vector<double> s;
    std::vector<int> ok;
    const auto n = static_cast<std::size_t>(std::llround(a.duration_s * fs));
    switch (a.kind) {
      case ActionKind::Still:
      case ActionKind::DeepBreath:
      case ActionKind::ShallowFast: {
        s = gen_breathing(a.rr_bpm, a.duration_s, a.amplitude, a.jitter_pct, fs, rng(), a.shallow_fraction);
        ok.assign(s.size(), 1);
        if (!a.bursts.empty()) {
          auto inj = inject_movement(s, a.bursts, fs, rng(), detail::breathing_rms(a.amplitude));
          for (std::size_t k = 0; k < s.size(); ++k)
            if (inj.samples[k] != s[k]) ok[k] = 0;
          s = std::move(inj.samples);
        }
        break;
      }
      case ActionKind::Speak:
        s = detail::gen_speak(a, fs, rng);
        ok.assign(s.size(), 0);
        break;
      case ActionKind::RandomMove: {
        const double gain = a.gain > 0.0 ? a.gain : kMoveGain;
        s = detail::band_limited_walk(n, gain * detail::breathing_rms(a.amplitude), fs, rng);
        ok.assign(s.size(), 0);
        break;
      }
      case ActionKind::CoughBurst:
        s = detail::gen_cough(a, fs, rng);
        ok.assign(s.size(), 0);
        break;
      case ActionKind::Tremor:
        s = detail::gen_tremor(a, fs, rng);
        ok.assign(s.size(), 0);
        break;
    }
    s.resize(n, 0.0);
    ok.resize(n, 0);
    out.wave.samples.insert(out.wave.samples.end(), s.begin(), s.end());
    sample_ok.insert(sample_ok.end(), ok.begin(), ok.end());
    sample_rate.insert(sample_rate.end(), n, is_breathing(a.kind) ? a.rr_bpm : -1.0);
  }

  const auto ufs = static_cast<std::size_t>(fs);
  const std::size_t frames = out.wave.samples.size() / ufs;
  out.labels.assign(frames, 1);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t k = f * ufs; k < (f + 1) * ufs; ++k)
      if (!sample_ok[k]) out.labels[f] = 0;

  for (std::size_t start = 0; start < frames; start += 60) {
    const std::size_t count = std::min<std::size_t>(60, frames - start);
    std::optional<double> g;
    if (count == 60) {
      const double rate = sample_rate[start * ufs];
      bool uniform = rate > 0.0;
      for (std::size_t k = start * ufs; uniform && k < (start + count) * ufs; ++k) uniform = sample_rate[k] == rate;
      std::size_t reliable = 0;
      for (std::size_t f = start; f < start + count; ++f) reliable += static_cast<std::size_t>(out.labels[f]);
      if (uniform && reliable * 2 >= count) g = rate;
    }
    out.gth.push_back(g);
  }
  return out;
}

/// Rest script: `minutes` of still breathing at one rate.
inline ScenarioScript rest_script(double minutes, double rr_bpm, std::uint64_t seed = 0) {
  ScenarioScript s;
  s.seed = seed;
  Action a;
  a.kind = ActionKind::Still;
  a.duration_s = minutes * 60.0;
  a.rr_bpm = rr_bpm;
  s.actions.push_back(a);
  return s;
}

namespace detail {

inline Action breathing_action(ActionKind k, double seconds, double rr, double amp = kDefaultBreathAmplitude) {
  Action a;
  a.kind = k;
  a.duration_s = seconds;
  a.rr_bpm = rr;
  a.amplitude = amp;
  if (k == ActionKind::ShallowFast) a.shallow_fraction = 0.3;
  return a;
}

inline Action movement_action(ActionKind k, double seconds, double rr = 16.0, double gain = 0.0) {
  Action a;
  a.kind = k;
  a.duration_s = seconds;
  a.rr_bpm = rr;
  a.gain = gain;
  return a;
}

// Adds 1-3 short movement bursts at random offsets inside a breathing action.
inline void sprinkle_bursts(Action& a, std::mt19937_64& rng, int max_bursts = 2, double max_len = 8.0) {
  std::uniform_int_distribution<int> count(0, max_bursts);
  std::uniform_real_distribution<double> len(2.0, max_len);
  const int nb = count(rng);
  for (int b = 0; b < nb; ++b) {
    const double d = len(rng);
    std::uniform_real_distribution<double> start(0.0, a.duration_s - d);
    a.bursts.push_back({start(rng), d, kMoveGain});
  }
}

}  // namespace detail

/// Two-minute actions in the order of a bedside recording protocol: lying
/// postures, bed-edge positions, movements, coughs, deep breaths, gasps,
/// speech, sitting, rapid shallow breathing, tremor and leg movements.
/// Breathing rates are drawn around a per-recording baseline. With
/// `shuffled` the action order is permuted per seed.
inline ScenarioScript protocol_script(std::uint64_t seed, bool shuffled = false) {
  using detail::breathing_action;
  using detail::movement_action;
  std::mt19937_64 rng(detail::mix_seed(seed, 0xA11CE));
  std::uniform_real_distribution<double> base_d(13.0, 19.0), d(-1.5, 1.5), amp(0.6, 1.4);
  const double base = base_d(rng);
  const double A = kDefaultBreathAmplitude;
  ScenarioScript s;
  s.seed = seed;
  auto still = [&](double amp_scale) {
    Action a = breathing_action(ActionKind::Still, 120.0, base + d(rng), A * amp_scale * amp(rng));
    detail::sprinkle_bursts(a, rng);
    return a;
  };
  s.actions.push_back(still(1.0));                                                   // reclining
  s.actions.push_back(still(0.9));                                                   // prone
  s.actions.push_back(still(0.8));                                                   // left side
  s.actions.push_back(still(0.8));                                                   // right side
  s.actions.push_back(still(0.5));                                                   // near right edge
  s.actions.push_back(still(0.6));                                                   // near left edge
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, base));         // random movement
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, base, 60.0));   // flounce legs
  s.actions.push_back(movement_action(ActionKind::CoughBurst, 120.0, base));         // coughs
  s.actions.push_back(breathing_action(ActionKind::DeepBreath, 120.0, std::uniform_real_distribution<double>(6.0, 10.0)(rng), 2.5 * A));
  s.actions.push_back(movement_action(ActionKind::CoughBurst, 120.0, base, 150.0));  // choke / gasp
  s.actions.push_back(movement_action(ActionKind::Speak, 120.0, base));              // speak
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, base, 80.0));   // sit up
  s.actions.push_back(still(0.4));                                                   // sit on edge
  s.actions.push_back(breathing_action(ActionKind::ShallowFast, 120.0, std::uniform_real_distribution<double>(34.0, 44.0)(rng), 0.7 * A));
  s.actions.push_back(movement_action(ActionKind::Tremor, 120.0, base));             // tremor
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, base, 30.0));   // leg movements
  if (shuffled) std::shuffle(s.actions.begin(), s.actions.end(), rng);
  return s;
}

/// One-hour evaluation session: rest at ~16 bpm with occasional movements for
/// 20 minutes, a movement-rich middle with deep slow breathing at minute 38,
/// and rapid shallow breathing at 41 bpm at minute 53.
inline ScenarioScript session_script(std::uint64_t seed) {
  using detail::breathing_action;
  using detail::movement_action;
  std::mt19937_64 rng(detail::mix_seed(seed, 0x5E55));
  const double A = kDefaultBreathAmplitude;
  ScenarioScript s;
  s.seed = seed;
  // Minutes 0-19: rest.
  for (int k = 0; k < 10; ++k) {
    Action a = breathing_action(ActionKind::Still, 120.0, 16.0, A);
    detail::sprinkle_bursts(a, rng, 2, 6.0);
    s.actions.push_back(a);
  }
  // Minutes 20-37: movement-rich.
  s.actions.push_back(movement_action(ActionKind::Speak, 120.0, 17.0));
  s.actions.push_back(movement_action(ActionKind::RandomMove, 60.0, 17.0));
  {
    Action a = breathing_action(ActionKind::Still, 120.0, 17.0, 0.8 * A);
    a.bursts = {{20.0, 12.0, kMoveGain}, {80.0, 15.0, kMoveGain}};
    s.actions.push_back(a);
  }
  s.actions.push_back(movement_action(ActionKind::Tremor, 60.0, 17.0));
  s.actions.push_back(movement_action(ActionKind::CoughBurst, 120.0, 17.0));
  {
    Action a = breathing_action(ActionKind::Still, 120.0, 15.0, 0.7 * A);
    detail::sprinkle_bursts(a, rng, 3, 10.0);
    s.actions.push_back(a);
  }
  s.actions.push_back(movement_action(ActionKind::Speak, 120.0, 15.0));
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, 15.0, 60.0));
  s.actions.push_back(breathing_action(ActionKind::Still, 120.0, 14.0, 0.6 * A));
  s.actions.push_back(movement_action(ActionKind::RandomMove, 120.0, 14.0, 80.0));
  // Minutes 38-39: deep slow breaths.
  s.actions.push_back(breathing_action(ActionKind::DeepBreath, 120.0, 8.0, 2.5 * A));
  // Minutes 40-52: mixed.
  s.actions.push_back(movement_action(ActionKind::Speak, 120.0, 16.0));
  {
    Action a = breathing_action(ActionKind::Still, 120.0, 16.0, 0.9 * A);
    detail::sprinkle_bursts(a, rng, 2, 8.0);
    s.actions.push_back(a);
  }
  s.actions.push_back(movement_action(ActionKind::CoughBurst, 120.0, 16.0));
  s.actions.push_back(movement_action(ActionKind::Tremor, 120.0, 16.0));
  {
    Action a = breathing_action(ActionKind::Still, 120.0, 18.0, A);
    detail::sprinkle_bursts(a, rng, 2, 8.0);
    s.actions.push_back(a);
  }
  {
    Action a = breathing_action(ActionKind::Still, 120.0, 17.0, 0.8 * A);
    detail::sprinkle_bursts(a, rng, 1, 6.0);
    s.actions.push_back(a);
  }
  s.actions.push_back(movement_action(ActionKind::RandomMove, 60.0, 18.0));
  // Minutes 53-54: rapid shallow breaths.
  s.actions.push_back(breathing_action(ActionKind::ShallowFast, 120.0, 41.0, 0.7 * A));
  // Minutes 55-59: a movement, then rest.
  s.actions.push_back(movement_action(ActionKind::RandomMove, 60.0, 16.0, 50.0));
  for (int k = 0; k < 2; ++k) {
    Action a = breathing_action(ActionKind::Still, 120.0, 16.0, A);
    detail::sprinkle_bursts(a, rng, 1, 6.0);
    s.actions.push_back(a);
  }
  return s;
}

}  // namespace bedrr
