#pragma once

// Respiratory-rate estimation from reliable waveform segments: peak counting
// and least-squares slope fitting of the unwrapped analytic-signal phase.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>
#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "bedrr/error.hpp"

namespace bedrr {

/// Consecutive reliable samples s[t1..t2] (inclusive sample indices).
struct ReliableSegment {
  std::size_t t1 = 0;
  std::size_t t2 = 0;
  std::vector<double> values;

  std::size_t length() const { return values.size(); }
};

/// Peak sample indices of one segment, strictly increasing.
struct PeakSet {
  std::size_t segment = 0;
  std::vector<std::size_t> peaks;
};

struct PhaseTrack {
  std::size_t segment = 0;
  std::vector<double> phase;  // unwrapped, radians
};

struct SlopeFit {
  double b0 = 0.0;                // shared slope, radians per sample
  std::vector<double> intercepts; // one per segment
  double residual_rms = 0.0;
  double rr = 0.0;                // breaths per minute
};

struct RrEstimate {
  std::size_t minute = 0;
  std::optional<double> rr_peaks;
  std::optional<double> rr_ht;
  double reliable_seconds = 0.0;
  std::size_t segments = 0;
};

inline double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

/// Strict local maxima (plateaus collapse to their middle sample) whose
/// signal falls by at least `min_drop` on both sides before rising above the
/// peak again. Indices are absolute sample indices (offset by seg.t1).
inline PeakSet detect_peaks(const ReliableSegment& seg, double min_drop, std::size_t segment_id = 0) {
  PeakSet out{segment_id, {}};
  const auto& v = seg.values;
  const std::size_t n = v.size();
  if (n < 3) return out;
  std::size_t i = 1;
  while (i + 1 < n) {
    if (!(v[i] > v[i - 1])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 >= n || !(v[j + 1] < v[i])) {
      i = j + 1;
      continue;
    }
    const double top = v[i];
    double left_min = top;
    for (std::size_t k = i; k-- > 0;) {
      if (v[k] > top) break;
      left_min = std::min(left_min, v[k]);
    }
    double right_min = top;
    for (std::size_t k = j + 1; k < n; ++k) {
      if (v[k] > top) break;
      right_min = std::min(right_min, v[k]);
    }
    if (top - left_min >= min_drop && top - right_min >= min_drop)
      out.peaks.push_back(seg.t1 + (i + j) / 2);
    i = j + 1;
  }
  return out;
}

/// Peak detection using the segment's own standard deviation as the drop.
inline PeakSet detect_peaks(const ReliableSegment& seg) { return detect_peaks(seg, sample_std(seg.values)); }

/// Breaths per minute from peaks of several segments: counted intervals over
/// the spanned samples, segments with at most one peak contributing their
/// peak count over their full length.
inline double rr_peak_counting(std::span<const ReliableSegment> segments, std::span<const PeakSet> peaks, int fs) {
  if (segments.empty()) throw NoEstimate("no segments");
  if (segments.size() != peaks.size()) throw DimensionError("one peak set per segment required");
  double breaths = 0.0, span = 0.0;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& p = peaks[i].peaks;
    if (p.size() > 1) {
      breaths += static_cast<double>(p.size() - 1);
      span += static_cast<double>(p.back() - p.front());
    } else {
      breaths += static_cast<double>(p.size());
      span += static_cast<double>(segments[i].t2 - segments[i].t1);
    }
  }
  if (span <= 0.0) throw NoEstimate("zero span for peak counting");
  return 60.0 * fs * breaths / span;
}

/// Analytic signal of the mean-subtracted input via one-sided spectrum
/// doubling. The real part reproduces the mean-subtracted input.
inline std::vector<std::complex<double>> analytic_signal(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n == 0) return {};
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= static_cast<double>(n);
  std::vector<double> x(values.begin(), values.end());
  for (double& v : x) v -= mean;

  thread_local Eigen::FFT<double> fft;  // keeps twiddle plans between calls
  std::vector<std::complex<double>> spec;
  fft.fwd(spec, x);  // full (two-sided) spectrum
  for (std::size_t k = 1; k < n; ++k) {
    if (2 * k < n) spec[k] *= 2.0;
    else if (2 * k > n) spec[k] = 0.0;
  }
  std::vector<std::complex<double>> out;
  fft.inv(out, spec);
  return out;
}

namespace detail {

inline std::vector<double> unwrap(const std::vector<double>& wrapped) {
  std::vector<double> out(wrapped.size());
  if (wrapped.empty()) return out;
  constexpr double pi = std::numbers::pi;
  out[0] = wrapped[0];
  for (std::size_t k = 1; k < wrapped.size(); ++k) {
    double d = wrapped[k] - wrapped[k - 1];
    if (d > pi || d < -pi) d -= 2.0 * pi * std::round(d / (2.0 * pi));  // into [-pi, pi]
    out[k] = out[k - 1] + d;
  }
  return out;
}

}  // namespace detail

struct InstantaneousFrequency {
  PhaseTrack track;
  std::vector<double> if_rad_s;
  std::vector<double> rr_inst;  // breaths per minute
};

inline constexpr double kMagnitudeFloor = 1e-9;

namespace detail {

inline PhaseTrack phase_track(std::span<const std::complex<double>> z, std::size_t segment_id) {
  PhaseTrack t;
  t.segment = segment_id;
  std::vector<double> wrapped(z.size());
  double last = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    if (std::norm(z[k]) >= kMagnitudeFloor * kMagnitudeFloor) last = std::arg(z[k]);
    wrapped[k] = last;
  }
  t.phase = unwrap(wrapped);
  return t;
}

}  // namespace detail

/// Unwrapped phase, its gradient (rad/s) and the per-sample rate mapping.
/// Samples with magnitude below 1e-9 keep the previous phase.
inline InstantaneousFrequency unwrap_and_if(std::span<const std::complex<double>> z, int fs,
                                            std::size_t segment_id = 0) {
  InstantaneousFrequency r;
  r.track = detail::phase_track(z, segment_id);
  const auto& a = r.track.phase;
  const std::size_t n = a.size();
  r.if_rad_s.assign(n, 0.0);
  if (n >= 2) {
    r.if_rad_s[0] = (a[1] - a[0]) * fs;
    r.if_rad_s[n - 1] = (a[n - 1] - a[n - 2]) * fs;
    for (std::size_t k = 1; k + 1 < n; ++k) r.if_rad_s[k] = 0.5 * (a[k + 1] - a[k - 1]) * fs;
  }
  r.rr_inst.resize(n);
  for (std::size_t k = 0; k < n; ++k) r.rr_inst[k] = 60.0 * r.if_rad_s[k] / (2.0 * std::numbers::pi);
  return r;
}

/// Design matrix with a shared ramp column (1..len per segment) and one
/// intercept column per segment, plus the stacked phase vector.
inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> slope_design(std::span<const PhaseTrack> tracks) {
  Eigen::Index rows = 0;
  for (const auto& t : tracks) rows += static_cast<Eigen::Index>(t.phase.size());
  const auto I = static_cast<Eigen::Index>(tracks.size());
  Eigen::MatrixXd Phi = Eigen::MatrixXd::Zero(rows, I + 1);
  Eigen::VectorXd eta(rows);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < I; ++i) {
    const auto& ph = tracks[static_cast<std::size_t>(i)].phase;
    for (std::size_t k = 0; k < ph.size(); ++k, ++r) {
      Phi(r, 0) = static_cast<double>(k + 1);
      Phi(r, i + 1) = 1.0;
      eta(r) = ph[k];
    }
  }
  return {Phi, eta};
}

/// Least-squares fit of one slope shared by all segments with a free
/// intercept per segment; RR = 60 fs b0 / (2 pi).
inline SlopeFit rr_slope_fit(std::span<const PhaseTrack> tracks, int fs) {
  std::size_t used = 0;
  for (const auto& t : tracks) used += t.phase.size();
  if (tracks.empty() || used == 0) throw NoEstimate("no phase samples to fit");
  const auto [Phi, eta] = slope_design(tracks);

  Eigen::VectorXd b;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Phi);
  if (qr.rank() == Phi.cols()) {
    b = qr.solve(eta);
  } else {
    b = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(Phi).solve(eta);
  }

  SlopeFit fit;
  fit.b0 = b(0);
  fit.intercepts.assign(b.data() + 1, b.data() + b.size());
  fit.residual_rms = std::sqrt((Phi * b - eta).squaredNorm() / static_cast<double>(eta.size()));
  fit.rr = 60.0 * fs * fit.b0 / (2.0 * std::numbers::pi);
  return fit;
}

/// HT route for a set of raw segments.
inline SlopeFit rr_hilbert(std::span<const ReliableSegment> segments, int fs) {
  std::vector<PhaseTrack> tracks;
  tracks.reserve(segments.size());
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto z = analytic_signal(segments[i].values);
    tracks.push_back(detail::phase_track(z, i));
  }
  return rr_slope_fit(tracks, fs);
}

/// Segment-selection policy for one minute of labels.
struct SegmentPolicy {
  int drop_run_at_most_s = 2;  // runs this short are discarded
  double min_total_s = 9.0;    // total refined length must exceed this ...
  double min_longest_s = 6.0;  // ... or the longest run must exceed this
};

/// Maximal runs of reliable frames as [first, last] 0-based frame offsets.
inline std::vector<std::pair<std::size_t, std::size_t>> reliable_runs(std::span<const int> labels) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  std::size_t k = 0;
  while (k < labels.size()) {
    if (labels[k] != 1) {
      ++k;
      continue;
    }
    std::size_t e = k;
    while (e + 1 < labels.size() && labels[e + 1] == 1) ++e;
    runs.emplace_back(k, e);
    k = e + 1;
  }
  return runs;
}

/// RR for one minute window. `labels` has one entry per frame (normally 60;
/// fewer for a trailing partial minute) and `samples` holds labels.size()*fs
/// raw values. `sample_offset` is the absolute index of samples[0].
inline RrEstimate minute_rr(std::span<const int> labels, std::span<const double> samples, int fs,
                            std::size_t minute = 0, std::size_t sample_offset = 0,
                            const SegmentPolicy& policy = {}) {
  if (fs <= 0) throw ConfigError("fs must be positive");
  const auto ufs = static_cast<std::size_t>(fs);
  if (samples.size() < labels.size() * ufs) throw DimensionError("fewer samples than labelled frames");
  RrEstimate est;
  est.minute = minute;

  std::vector<ReliableSegment> segs;
  std::size_t longest = 0, total = 0;
  for (auto [a, b] : reliable_runs(labels)) {
    const std::size_t len = b - a + 1;
    if (len <= static_cast<std::size_t>(policy.drop_run_at_most_s)) continue;
    ReliableSegment s;
    s.t1 = sample_offset + a * ufs;
    s.t2 = sample_offset + (b + 1) * ufs - 1;
    s.values.assign(samples.begin() + static_cast<std::ptrdiff_t>(a * ufs),
                    samples.begin() + static_cast<std::ptrdiff_t>((b + 1) * ufs));
    segs.push_back(std::move(s));
    longest = std::max(longest, len);
    total += len;
  }
  est.reliable_seconds = static_cast<double>(total);
  est.segments = segs.size();
  if (!(static_cast<double>(total) > policy.min_total_s || static_cast<double>(longest) > policy.min_longest_s))
    return est;

  // Drop threshold: spread of the refined reliable data of this minute.
  std::vector<double> pooled;
  for (const auto& s : segs) pooled.insert(pooled.end(), s.values.begin(), s.values.end());
  const double drop = sample_std(pooled);
  std::vector<PeakSet> peaks;
  for (std::size_t i = 0; i < segs.size(); ++i) peaks.push_back(detect_peaks(segs[i], drop, i));
  try {
    est.rr_peaks = rr_peak_counting(segs, peaks, fs);
  } catch (const NoEstimate&) {
  }
  try {
    const double rr = rr_hilbert(segs, fs).rr;
    if (std::isfinite(rr)) est.rr_ht = rr;
  } catch (const NoEstimate&) {
  }
  return est;
}

/// Aligned, non-overlapping minute windows over a labelled record. A trailing
/// partial minute is processed with the frames it has.
inline std::vector<RrEstimate> estimate_rr(std::span<const int> labels, std::span<const double> samples, int fs,
                                           const SegmentPolicy& policy = {}) {
  const auto ufs = static_cast<std::size_t>(fs);
  const std::size_t frames = std::min(labels.size(), samples.size() / ufs);
  std::vector<RrEstimate> out;
  for (std::size_t start = 0, minute = 0; start < frames; start += 60, ++minute) {
    const std::size_t count = std::min<std::size_t>(60, frames - start);
    out.push_back(minute_rr(labels.subspan(start, count), samples.subspan(start * ufs, count * ufs), fs, minute,
                            start * ufs, policy));
  }
  return out;
}

}  // namespace bedrr
