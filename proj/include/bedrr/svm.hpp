#pragma once

// C-support-vector classification with an RBF kernel, trained by SMO, and
// K-fold bagged ensembles whose members' scores are summed.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <list>
#include <numeric>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "bedrr/error.hpp"

namespace bedrr {

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  if (a.size() != b.size()) throw DimensionError("rbf_kernel: dimension mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d2 += t * t;
  }
  return std::exp(-gamma * d2);
}

inline double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double gamma) {
  return rbf_kernel(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                    std::span<const double>(b.data(), static_cast<std::size_t>(b.size())), gamma);
}

struct SvmModel {
  Eigen::MatrixXd support_vectors;  // M x Q
  Eigen::VectorXd alphas_signed;    // alpha_m * y_m
  double bias = 0.0;
  double gamma = 0.4;
  double C = 2.0;
  // Training diagnostics, not serialized.
  std::size_t iterations = 0;
  bool converged = true;

  Eigen::Index dim() const { return support_vectors.cols(); }
  Eigen::Index size() const { return support_vectors.rows(); }
};

struct SmoOptions {
  double C = 2.0;
  double gamma = 0.4;
  double tol = 1e-3;
  std::size_t max_iter = 100000;
  // Above this many samples the Gram matrix is replaced by an LRU row cache.
  std::size_t full_gram_limit = 4096;
  std::size_t cache_rows = 512;
};

/// Decision value: sum_m alphas_signed[m] K(sv_m, x) + bias.
inline double decision(const SvmModel& m, const Eigen::Ref<const Eigen::VectorXd>& x) {
  if (x.size() != m.dim()) throw DimensionError("svm decision: dimension mismatch");
  const Eigen::VectorXd d2 = (m.support_vectors.rowwise() - x.transpose()).rowwise().squaredNorm();
  return m.alphas_signed.dot((-m.gamma * d2).array().exp().matrix()) + m.bias;
}

/// sign() with sign(0) == +1 (reliable).
inline int sign_label(double score) { return score >= 0.0 ? 1 : -1; }

namespace detail {

// Kernel rows on demand: a precomputed Gram matrix for small problems, an
// LRU cache of rows otherwise.
class KernelRows {
 public:
  KernelRows(const Eigen::MatrixXd& X, double gamma, std::size_t full_limit, std::size_t cache_rows)
      : X_(X), gamma_(gamma), sq_(X.rowwise().squaredNorm()), capacity_(std::max<std::size_t>(cache_rows, 2)) {
    const auto n = static_cast<std::size_t>(X.rows());
    if (n <= full_limit) {
      full_ = true;
      gram_ = X * X.transpose();
      const Eigen::Index m = X.rows();
      for (Eigen::Index c = 0; c < m; ++c)
        for (Eigen::Index r = 0; r < m; ++r)
          gram_(r, c) = r == c ? 1.0 : std::exp(-gamma * (sq_(r) + sq_(c) - 2.0 * gram_(r, c)));
    }
  }

  const double* row(Eigen::Index i) {
    if (full_) return gram_.data() + i * gram_.rows();  // symmetric: column i == row i
    auto it = index_.find(i);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return it->second->second.data();
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    Eigen::VectorXd r = X_ * X_.row(i).transpose();
    for (Eigen::Index j = 0; j < r.size(); ++j)
      r(j) = j == i ? 1.0 : std::exp(-gamma_ * (sq_(i) + sq_(j) - 2.0 * r(j)));
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second.data();
  }

  bool full() const { return full_; }

 private:
  const Eigen::MatrixXd& X_;
  double gamma_;
  Eigen::VectorXd sq_;
  bool full_ = false;
  Eigen::MatrixXd gram_;
  std::size_t capacity_;
  std::list<std::pair<Eigen::Index, Eigen::VectorXd>> lru_;
  std::unordered_map<Eigen::Index, std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator> index_;
};

}  // namespace detail

/// Solution of the c-SVC dual together with the trained model. Exposed so
/// tests can inspect the full dual variable vector.
struct SmoResult {
  SvmModel model;
  Eigen::VectorXd alpha;  // length N, in [0, C]
  double objective = 0.0; // dual objective sum(alpha) - 0.5 alpha^T Q alpha
};

/// Two-variable SMO with maximal-violating-pair working-set selection.
inline SmoResult solve_csvc(const Eigen::MatrixXd& X, std::span<const int> y, const SmoOptions& opt) {
  const Eigen::Index n = X.rows();
  if (static_cast<Eigen::Index>(y.size()) != n) throw DimensionError("labels and samples differ in count");
  if (n < 2) throw InsufficientData("c-SVC needs at least two samples");
  bool pos = false, neg = false;
  for (int v : y) {
    if (v == 1) pos = true;
    else if (v == -1) neg = true;
    else throw ConfigError("svm labels must be -1 or +1");
  }
  if (!pos || !neg) throw DegenerateLabels("c-SVC needs both classes");
  if (!(opt.C > 0.0) || !(opt.gamma > 0.0)) throw ConfigError("C and gamma must be positive");

  const double C = opt.C;
  constexpr double kTau = 1e-12;
  detail::KernelRows K(X, opt.gamma, opt.full_gram_limit, opt.cache_rows);

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = Eigen::VectorXd::Constant(n, -1.0);  // Q alpha - e
  auto yi = [&](Eigen::Index i) { return static_cast<double>(y[static_cast<std::size_t>(i)]); };
  auto in_up = [&](Eigen::Index t) { return (yi(t) > 0 && alpha(t) < C) || (yi(t) < 0 && alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (yi(t) > 0 && alpha(t) > 0) || (yi(t) < 0 && alpha(t) < C); };

  std::size_t iter = 0;
  bool converged = false;
  while (iter < opt.max_iter) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1, j = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -yi(t) * G(t);
      if (in_up(t) && v > gmax) { gmax = v; i = t; }
      if (in_low(t) && v < gmin) { gmin = v; j = t; }
    }
    if (i < 0 || j < 0 || gmax - gmin < opt.tol) {
      converged = true;
      break;
    }
    ++iter;

    const double* Ki = K.row(i);
    const double* Kj = K.row(j);
    const double old_ai = alpha(i), old_aj = alpha(j);
    if (yi(i) != yi(j)) {
      double quad = Ki[i] + Kj[j] - 2.0 * Ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = alpha(i) - alpha(j);
      alpha(i) += delta;
      alpha(j) += delta;
      if (diff > 0) {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = diff; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = -diff; }
      }
      if (diff > 0) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = C - diff; }
      } else {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = C + diff; }
      }
    } else {
      double quad = Ki[i] + Kj[j] - 2.0 * Ki[j];
      if (quad <= 0) quad = kTau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = alpha(i) + alpha(j);
      alpha(i) -= delta;
      alpha(j) += delta;
      if (sum > C) {
        if (alpha(i) > C) { alpha(i) = C; alpha(j) = sum - C; }
      } else {
        if (alpha(j) < 0) { alpha(j) = 0; alpha(i) = sum; }
      }
      if (sum > C) {
        if (alpha(j) > C) { alpha(j) = C; alpha(i) = sum - C; }
      } else {
        if (alpha(i) < 0) { alpha(i) = 0; alpha(j) = sum; }
      }
    }
    const double dai = alpha(i) - old_ai, daj = alpha(j) - old_aj;
    // Q_ti = y_t y_i K_ti
    const double ci = yi(i) * dai, cj = yi(j) * daj;
    for (Eigen::Index t = 0; t < n; ++t) G(t) += yi(t) * (ci * Ki[t] + cj * Kj[t]);
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0.0;
  std::size_t nr_free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yG = yi(t) * G(t);
    if (alpha(t) >= C) {
      if (yi(t) < 0) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else if (alpha(t) <= 0) {
      if (yi(t) > 0) ub = std::min(ub, yG);
      else lb = std::max(lb, yG);
    } else {
      ++nr_free;
      sum_free += yG;
    }
  }
  const double rho = nr_free > 0 ? sum_free / static_cast<double>(nr_free) : 0.5 * (ub + lb);

  SmoResult res;
  res.alpha = alpha;
  // Q alpha == G + e
  res.objective = alpha.sum() - 0.5 * alpha.dot(G + Eigen::VectorXd::Ones(n));

  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha(t) > 0) sv.push_back(t);
  SvmModel& m = res.model;
  m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
  m.alphas_signed.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    m.support_vectors.row(static_cast<Eigen::Index>(k)) = X.row(sv[k]);
    m.alphas_signed(static_cast<Eigen::Index>(k)) = alpha(sv[k]) * yi(sv[k]);
  }
  m.bias = -rho;
  m.gamma = opt.gamma;
  m.C = C;
  m.iterations = iter;
  m.converged = converged;
  return res;
}

inline SvmModel train_csvc(const Eigen::MatrixXd& X, std::span<const int> y, double C = 2.0,
                           double gamma = 0.4, double tol = 1e-3) {
  SmoOptions opt;
  opt.C = C;
  opt.gamma = gamma;
  opt.tol = tol;
  return solve_csvc(X, y, opt).model;
}

struct SvmEnsemble {
  std::vector<SvmModel> members;

  Eigen::Index dim() const { return members.empty() ? 0 : members.front().dim(); }
};

/// Sum of member decision values.
inline double ensemble_score(const SvmEnsemble& e, const Eigen::Ref<const Eigen::VectorXd>& x) {
  double s = 0.0;
  for (const auto& m : e.members) s += decision(m, x);
  return s;
}

/// Label in {0,1}: sign of the summed scores, sign(0) -> 1.
inline int predict_ensemble(const SvmEnsemble& e, const Eigen::Ref<const Eigen::VectorXd>& x) {
  return ensemble_score(e, x) >= 0.0 ? 1 : 0;
}

/// Deterministic fold id for every sample: a seeded shuffle dealt round-robin.
inline std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t p = 0; p < n; ++p) fold[order[p]] = p % k;
  return fold;
}

namespace detail {

inline void gather(const Eigen::MatrixXd& X, std::span<const int> y, const std::vector<std::size_t>& idx,
                   Eigen::MatrixXd& Xo, std::vector<int>& yo) {
  Xo.resize(static_cast<Eigen::Index>(idx.size()), X.cols());
  yo.resize(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    Xo.row(static_cast<Eigen::Index>(r)) = X.row(static_cast<Eigen::Index>(idx[r]));
    yo[r] = y[idx[r]];
  }
}

}  // namespace detail

/// K members, member k trained on every fold except fold k. K == 1 trains a
/// single model on all data.
inline SvmEnsemble train_ensemble(const Eigen::MatrixXd& X, std::span<const int> y, std::size_t K = 10,
                                  double C = 2.0, double gamma = 0.4, std::uint64_t seed = 0,
                                  double tol = 1e-3) {
  const auto n = static_cast<std::size_t>(X.rows());
  if (K == 0) throw ConfigError("ensemble size must be positive");
  if (n < K) throw InsufficientData("fewer samples than folds");
  SvmEnsemble e;
  if (K == 1) {
    e.members.push_back(train_csvc(X, y, C, gamma, tol));
    return e;
  }
  const auto fold = fold_assignment(n, K, seed);
  for (std::size_t k = 0; k < K; ++k) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (fold[i] != k) idx.push_back(i);
    Eigen::MatrixXd Xk;
    std::vector<int> yk;
    detail::gather(X, y, idx, Xk, yk);
    e.members.push_back(train_csvc(Xk, yk, C, gamma, tol));
  }
  return e;
}

struct GridResult {
  double C = 0.0;
  double gamma = 0.0;
  double cv_error = 1.0;
};

/// K-fold cross-validated grid search. Ties go to the smaller C, then the
/// smaller gamma.
inline GridResult grid_search(const Eigen::MatrixXd& X, std::span<const int> y, std::vector<double> C_grid,
                              std::vector<double> gamma_grid, std::size_t K = 5, std::uint64_t seed = 0) {
  if (C_grid.empty() || gamma_grid.empty()) throw ConfigError("empty search grid");
  const auto n = static_cast<std::size_t>(X.rows());
  if (K < 2 || n < K) throw InsufficientData("grid search needs at least K >= 2 samples");
  std::sort(C_grid.begin(), C_grid.end());
  std::sort(gamma_grid.begin(), gamma_grid.end());
  const auto fold = fold_assignment(n, K, seed);

  GridResult best;
  best.cv_error = std::numeric_limits<double>::infinity();
  for (double C : C_grid) {
    for (double gamma : gamma_grid) {
      std::size_t wrong = 0;
      for (std::size_t k = 0; k < K; ++k) {
        std::vector<std::size_t> tr, te;
        for (std::size_t i = 0; i < n; ++i) (fold[i] == k ? te : tr).push_back(i);
        Eigen::MatrixXd Xk;
        std::vector<int> yk;
        detail::gather(X, y, tr, Xk, yk);
        const bool both = std::find(yk.begin(), yk.end(), 1) != yk.end() &&
                          std::find(yk.begin(), yk.end(), -1) != yk.end();
        if (!both) {
          // Constant predictor on a single-class fold.
          for (std::size_t i : te) wrong += (y[i] != yk.front()) ? 1 : 0;
          continue;
        }
        const SvmModel m = train_csvc(Xk, yk, C, gamma);
        for (std::size_t i : te)
          wrong += sign_label(decision(m, X.row(static_cast<Eigen::Index>(i)).transpose())) != y[i] ? 1 : 0;
      }
      const double err = static_cast<double>(wrong) / static_cast<double>(n);
      if (err < best.cv_error) best = {C, gamma, err};
    }
  }
  return best;
}

}  // namespace bedrr
