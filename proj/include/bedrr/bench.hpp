#pragma once

// Per-stage cost of processing one minute of waveform: wall time per minute
// plus analytic operation counts.

#include <chrono>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "bedrr/model.hpp"
#include "bedrr/rr.hpp"

namespace bedrr {

struct BenchStage {
  std::string name;
  double seconds = 0.0;  // per one-minute input
  double ops = 0.0;      // multiply-accumulate estimate
  std::size_t repeats = 0;
};

struct BenchReport {
  std::vector<BenchStage> stages;

  const BenchStage* find(const std::string& name) const {
    for (const auto& s : stages)
      if (s.name == name) return &s;
    return nullptr;
  }

  /// RR stages' share of preprocessing + classifier + RR time.
  double rr_share(const std::string& classifier) const {
    const auto *pk = find("peaks"), *ht = find("ht"), *c = find(classifier), *pre = find("preprocess");
    if (!pk || !ht || !c) return std::nan("");
    const double rr = pk->seconds + ht->seconds;
    const double pre_s = (classifier == "rnn" || !pre) ? 0.0 : pre->seconds;
    return rr / (rr + c->seconds + pre_s);
  }
};

namespace detail {

// Average wall time of f() over at least `min_seconds` of repetitions.
template <class F>
BenchStage time_stage(const std::string& name, double ops, double min_seconds, F&& f) {
  using clock = std::chrono::steady_clock;
  volatile double sink = 0.0;
  sink = sink + f();  // warm-up
  std::size_t reps = 0;
  const auto t0 = clock::now();
  double elapsed = 0.0;
  do {
    sink = sink + f();
    ++reps;
    elapsed = std::chrono::duration<double>(clock::now() - t0).count();
  } while (elapsed < min_seconds);
  return {name, elapsed / static_cast<double>(reps), ops, reps};
}

}  // namespace detail

/// Operation-count estimates for one minute (60 classified frames).
inline double ops_features(const PcaModel& p) { return 60.0 * static_cast<double>(p.basis.size()); }

inline double ops_svm(const SvmEnsemble& e) {
  double s = 0.0;
  for (const auto& m : e.members) s += static_cast<double>(m.size() * m.dim());
  return 60.0 * s;
}

inline double ops_mlp(const MlpModel& m) {
  double s = 0.0;
  for (const auto& l : m.layers) s += static_cast<double>(l.W.size());
  return 60.0 * s;
}

inline double ops_rnn(const HybridRnnModel& m) {
  auto lstm = [](const LstmLayer& l) { return static_cast<double>(l.W.size() + l.U.size()); };
  return 60.0 * (lstm(m.fwd1) + lstm(m.fwd2) + static_cast<double>(m.L + 1) * lstm(m.bwd) + static_cast<double>(m.head_w.size()));
}

/// Times each model in `models` (keyed by kind name) on the minute in `w`,
/// which must hold at least 60 + 2L frames so that 60 frames are classified,
/// plus peak counting and HT on the central 60 frames treated as reliable.
inline BenchReport benchmark(const std::map<std::string, const ReliabilityModel*>& models, const WaveformRecord& w,
                             double min_seconds = 0.05) {
  BenchReport rep;
  const auto frames = frame_signal(w);
  int L = kDefaultContext;
  double sigma = kDefaultSigma;
  if (!models.empty()) {
    L = models.begin()->second->L;
    sigma = models.begin()->second->sigma;
  }
  const auto uL = static_cast<std::size_t>(L);
  if (frames.size() < 60 + 2 * uL) throw TooShort("benchmark input needs 60 + 2L frames");
  const auto norm = normalize_frames(std::span<const Frame>(frames).first(60 + 2 * uL), sigma);

  // Preprocessing: normalization, context stacking and projection.
  const ReliabilityModel* feat = nullptr;
  for (const auto& [name, m] : models)
    if (m->pca) feat = m;
  std::vector<Eigen::VectorXd> features;
  if (feat) {
    rep.stages.push_back(detail::time_stage("preprocess", ops_features(*feat->pca), min_seconds, [&] {
      const auto nf = normalize_frames(std::span<const Frame>(frames).first(60 + 2 * uL), sigma);
      double acc = 0.0;
      for (std::size_t n = uL + 1; n <= 60 + uL; ++n) acc += project(*feat->pca, stack_context(nf, n, L).values)(0);
      return acc;
    }));
    for (std::size_t n = uL + 1; n <= 60 + uL; ++n) features.push_back(project(*feat->pca, stack_context(norm, n, L).values));
  }

  for (const auto& [name, m] : models) {
    switch (m->kind) {
      case ModelKind::Svm: {
        const auto& e = std::get<SvmEnsemble>(m->payload);
        rep.stages.push_back(detail::time_stage(name, ops_svm(e), min_seconds, [&] {
          double acc = 0.0;
          for (const auto& x : features) acc += ensemble_score(e, x);
          return acc;
        }));
        break;
      }
      case ModelKind::Mlp: {
        const auto& mm = std::get<MlpModel>(m->payload);
        rep.stages.push_back(detail::time_stage(name, ops_mlp(mm), min_seconds, [&] {
          double acc = 0.0;
          for (const auto& x : features) acc += mlp_forward(mm, x);
          return acc;
        }));
        break;
      }
      case ModelKind::Rnn: {
        const auto& r = std::get<HybridRnnModel>(m->payload);
        rep.stages.push_back(detail::time_stage(name, ops_rnn(r), min_seconds, [&] {
          RnnStreamState st(r);
          double acc = 0.0;
          for (const auto& f : norm)
            if (auto p = st.step(f)) acc += *p;
          return acc;
        }));
        break;
      }
      default: break;
    }
  }

  // RR stages on the central minute, all frames reliable.
  const auto ufs = static_cast<std::size_t>(w.fs);
  ReliableSegment seg;
  seg.t1 = uL * ufs;
  seg.t2 = (60 + uL) * ufs - 1;
  seg.values.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(seg.t1),
                    w.samples.begin() + static_cast<std::ptrdiff_t>(seg.t2 + 1));
  const std::vector<ReliableSegment> segs{seg};
  const double n = static_cast<double>(seg.values.size());
  rep.stages.push_back(detail::time_stage("peaks", n, min_seconds, [&] {
    const std::vector<PeakSet> pk{detect_peaks(segs[0], sample_std(segs[0].values), 0)};
    return static_cast<double>(pk[0].peaks.size());
  }));
  rep.stages.push_back(detail::time_stage("ht", 2.0 * n * std::log2(n) + 10.0 * n, min_seconds, [&] {
    return rr_hilbert(segs, w.fs).rr;
  }));
  return rep;
}

}  // namespace bedrr
