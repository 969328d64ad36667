#pragma once

// PCA projection of context windows.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "bedrr/error.hpp"
#include "bedrr/signal.hpp"

namespace bedrr {

struct PcaModel {
  Eigen::VectorXd mean;         // D
  Eigen::MatrixXd basis;        // Q x D, orthonormal rows
  Eigen::VectorXd eigenvalues;  // Q, descending
  double variance_fraction = 0.95;
  double total_variance = 0.0;  // sum of all covariance eigenvalues

  Eigen::Index input_dim() const { return mean.size(); }
  Eigen::Index output_dim() const { return basis.rows(); }

  double retained_fraction() const {
    return total_variance > 0.0 ? eigenvalues.sum() / total_variance : 1.0;
  }
};

/// Compressed context window, length == model Q.
struct FeatureVector {
  std::size_t center = 0;
  Eigen::VectorXd values;
};

namespace detail {

inline Eigen::MatrixXd stack_rows(std::span<const ContextWindow> windows) {
  const auto d = static_cast<Eigen::Index>(windows.front().values.size());
  Eigen::MatrixXd X(static_cast<Eigen::Index>(windows.size()), d);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (static_cast<Eigen::Index>(windows[i].values.size()) != d)
      throw DimensionError("context windows of unequal dimension");
    X.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(windows[i].values.data(), d);
  }
  return X;
}

}  // namespace detail

/// Fits PCA on the rows of `X` (N x D). Q is the smallest count whose
/// eigenvalues reach `variance_fraction` of the total, unless `q_override`
/// is positive, in which case exactly that many components are kept
/// (capped at D).
inline PcaModel fit_pca(const Eigen::MatrixXd& X, double variance_fraction = 0.95,
                        Eigen::Index q_override = 0) {
  if (X.rows() < 2) throw InsufficientData("PCA needs at least two samples");
  if (!(variance_fraction > 0.0 && variance_fraction <= 1.0))
    throw ConfigError("variance fraction must lie in (0, 1]");
  const Eigen::Index d = X.cols();

  PcaModel m;
  m.variance_fraction = variance_fraction;
  m.mean = X.colwise().mean().transpose();
  const Eigen::MatrixXd centered = X.rowwise() - m.mean.transpose();
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(X.rows() - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("covariance eigen-decomposition failed");

  // Eigen returns ascending order.
  Eigen::VectorXd evals = es.eigenvalues().reverse().cwiseMax(0.0);
  Eigen::MatrixXd evecs = es.eigenvectors().rowwise().reverse();

  const double largest = evals.size() > 0 ? evals(0) : 0.0;
  Eigen::Index rank = 0;
  while (rank < d && evals(rank) >= 1e-12 * largest && evals(rank) > 0.0) ++rank;
  m.total_variance = evals.head(rank).sum();

  Eigen::Index q = 0;
  if (q_override > 0) {
    q = std::min(q_override, d);
  } else {
    const double target = variance_fraction * m.total_variance;
    double acc = 0.0;
    while (q < rank) {
      acc += evals(q);
      ++q;
      if (acc >= target * (1.0 - 1e-14)) break;
    }
    q = std::max<Eigen::Index>(q, 1);
  }

  m.eigenvalues = evals.head(q);
  m.basis.resize(q, d);
  for (Eigen::Index k = 0; k < q; ++k) {
    Eigen::VectorXd v = evecs.col(k);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    m.basis.row(k) = v.transpose();
  }
  return m;
}

inline PcaModel fit_pca(std::span<const ContextWindow> windows, double variance_fraction = 0.95,
                        Eigen::Index q_override = 0) {
  if (windows.size() < 2) throw InsufficientData("PCA needs at least two windows");
  return fit_pca(detail::stack_rows(windows), variance_fraction, q_override);
}

inline Eigen::VectorXd project(const PcaModel& m, std::span<const double> window) {
  if (static_cast<Eigen::Index>(window.size()) != m.input_dim())
    throw DimensionError("window dimension does not match PCA model");
  const Eigen::Map<const Eigen::VectorXd> z(window.data(), m.input_dim());
  return m.basis * (z - m.mean);
}

inline FeatureVector project(const PcaModel& m, const ContextWindow& w) {
  return {w.center, project(m, std::span<const double>(w.values))};
}

/// basis^T x + mean.
inline Eigen::VectorXd reconstruct(const PcaModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.output_dim()) throw DimensionError("feature dimension does not match PCA model");
  return m.basis.transpose() * x + m.mean;
}

}  // namespace bedrr
