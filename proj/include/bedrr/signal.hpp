#pragma once

// Framing, sigmoid normalization and context-window stacking of raw
// load-sensor waveforms.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "bedrr/error.hpp"

namespace bedrr {

inline constexpr int kDefaultFs = 10;
inline constexpr double kDefaultSigma = 10.0;
inline constexpr int kDefaultContext = 3;

/// Timestamped raw sensor samples at a fixed rate.
struct WaveformRecord {
  int fs = kDefaultFs;
  std::vector<double> samples;
  double start_time = 0.0;

  std::size_t frame_count() const {
    return fs > 0 ? samples.size() / static_cast<std::size_t>(fs) : 0;
  }
};

/// One second of raw samples. `index` is 1-based.
struct Frame {
  std::size_t index = 0;
  std::vector<double> values;
};

/// A frame after sigmoid normalization; every value lies in (-0.5, 0.5).
struct NormalizedFrame {
  std::size_t index = 0;
  std::vector<double> values;
};

/// 2L+1 normalized frames centred on `center`, frame-major.
struct ContextWindow {
  std::size_t center = 0;
  std::vector<double> values;
};

/// Scaled and shifted logistic: 1/(1+exp(-sigma*x)) - 0.5.
inline double normalize(double sample, double sigma = kDefaultSigma) {
  if (!std::isfinite(sample)) throw InvalidSample("non-finite sample");
  if (!(sigma > 0.0)) throw InvalidSample("sigma must be positive");
  // tanh(a/2)/2 == logistic(a) - 0.5, written in the odd-symmetric form.
  // Saturated values are pulled back inside the open interval.
  static const double kBound = std::nextafter(0.5, 0.0);
  const double r = 0.5 * std::tanh(0.5 * sigma * sample);
  return r > kBound ? kBound : (r < -kBound ? -kBound : r);
}

inline void validate(const WaveformRecord& w) {
  if (w.fs <= 0) throw InvalidSample("fs must be positive");
  for (double v : w.samples)
    if (!std::isfinite(v)) throw InvalidSample("waveform contains non-finite sample");
}

/// Splits a waveform into complete one-second frames; a trailing partial
/// frame is discarded.
inline std::vector<Frame> frame_signal(const WaveformRecord& w) {
  validate(w);
  const auto fs = static_cast<std::size_t>(w.fs);
  if (w.samples.size() < fs)
    throw TooShort("waveform has fewer samples than one frame");
  const std::size_t n = w.samples.size() / fs;
  std::vector<Frame> frames;
  frames.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto first = w.samples.begin() + static_cast<std::ptrdiff_t>(k * fs);
    frames.push_back({k + 1, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(fs))});
  }
  return frames;
}

inline NormalizedFrame normalize_frame(const Frame& f, double sigma = kDefaultSigma) {
  NormalizedFrame out{f.index, {}};
  out.values.reserve(f.values.size());
  for (double v : f.values) out.values.push_back(normalize(v, sigma));
  return out;
}

inline std::vector<NormalizedFrame> normalize_frames(std::span<const Frame> frames,
                                                     double sigma = kDefaultSigma) {
  std::vector<NormalizedFrame> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(normalize_frame(f, sigma));
  return out;
}

/// Concatenates frames n-L..n+L. `frames` is indexed so that frames[k] holds
/// frame k+1; `n` is the 1-based centre. Missing context is an error, never
/// padded.
inline ContextWindow stack_context(std::span<const NormalizedFrame> frames, std::size_t n,
                                   int L) {
  if (L < 0) throw OutOfRange("negative context radius");
  const auto radius = static_cast<std::size_t>(L);
  if (n < 1 + radius || n + radius > frames.size())
    throw OutOfRange("insufficient context around frame " + std::to_string(n));
  ContextWindow win{n, {}};
  const std::size_t width = frames[n - 1].values.size();
  win.values.reserve((2 * radius + 1) * width);
  for (std::size_t k = n - radius; k <= n + radius; ++k) {
    const auto& vals = frames[k - 1].values;
    if (vals.size() != width) throw DimensionError("frames of unequal width");
    win.values.insert(win.values.end(), vals.begin(), vals.end());
  }
  return win;
}

/// True when frame n (1-based) has L frames on both sides among `count`.
inline bool has_full_context(std::size_t n, std::size_t count, int L) {
  const auto r = static_cast<std::size_t>(L);
  return n >= 1 + r && n + r <= count;
}

}  // namespace bedrr
