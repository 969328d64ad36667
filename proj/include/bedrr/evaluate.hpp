#pragma once

// Relative RR error per minute window and per-estimator means.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "bedrr/rr.hpp"

namespace bedrr {

/// |rr - gth| / |gth|.
inline double relative_error(double rr, double gth) { return std::abs(rr - gth) / std::abs(gth); }

struct EvalRow {
  std::size_t window = 0;
  double gth = 0.0;
  std::optional<double> rr_peaks, rr_ht;
  std::optional<double> e_peaks, e_ht;
};

struct EvalReport {
  std::vector<EvalRow> rows;        // windows with ground truth
  double mean_e_peaks = std::nan("");
  double mean_e_ht = std::nan("");
  std::size_t n_peaks = 0;          // windows contributing to mean_e_peaks
  std::size_t n_ht = 0;
  std::size_t without_estimate = 0; // ground-truth windows with neither estimate
  std::size_t skipped_zero_gth = 0;
  std::vector<std::string> warnings;
};

/// Matches estimates to ground truth by window id (= minute). Means cover the
/// windows that have both an estimate and ground truth.
inline EvalReport evaluate(const std::vector<RrEstimate>& estimates, const std::vector<std::optional<double>>& gth) {
  EvalReport r;
  double sp = 0.0, sh = 0.0;
  for (const auto& e : estimates) {
    if (e.minute >= gth.size() || !gth[e.minute]) continue;
    const double g = *gth[e.minute];
    if (g == 0.0) {
      ++r.skipped_zero_gth;
      r.warnings.push_back("window " + std::to_string(e.minute) + " has zero ground truth; skipped");
      continue;
    }
    EvalRow row;
    row.window = e.minute;
    row.gth = g;
    row.rr_peaks = e.rr_peaks;
    row.rr_ht = e.rr_ht;
    if (e.rr_peaks) {
      row.e_peaks = relative_error(*e.rr_peaks, g);
      sp += *row.e_peaks;
      ++r.n_peaks;
    }
    if (e.rr_ht) {
      row.e_ht = relative_error(*e.rr_ht, g);
      sh += *row.e_ht;
      ++r.n_ht;
    }
    if (!e.rr_peaks && !e.rr_ht) ++r.without_estimate;
    r.rows.push_back(row);
  }
  if (r.n_peaks) r.mean_e_peaks = sp / static_cast<double>(r.n_peaks);
  if (r.n_ht) r.mean_e_ht = sh / static_cast<double>(r.n_ht);
  return r;
}

}  // namespace bedrr
