#pragma once

// Training configuration, parameter views and the Adam optimizer shared by
// the neural classifiers.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bedrr/error.hpp"

namespace bedrr {

struct TrainConfig {
  double lr0 = 0.001;
  double lr_decay = 0.99;  // multiplicative, applied once per epoch
  std::size_t batch = 64;
  std::size_t epochs = 1000;
  double l2 = 1e-6;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;
  double dropout = 0.2;     // MLP only
  double clip_norm = 0.0;   // global gradient norm clip, 0 disables
  bool keep_best = true;    // return the weights with the lowest validation loss

  void check() const {
    if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
    if (batch == 0) throw ConfigError("batch size must be positive");
    if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
      throw ConfigError("validation fraction must lie in [0, 1)");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
    if (l2 < 0.0) throw ConfigError("l2 must be non-negative");
  }
};

struct TrainHistory {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> val_error;
  std::size_t best_epoch = 0;
};

/// Mutable view of one contiguous block of parameters.
struct ParamBlock {
  double* data;
  Eigen::Index size;
};

inline double global_norm(const std::vector<ParamBlock>& g) {
  double s = 0.0;
  for (const auto& b : g) s += Eigen::Map<Eigen::VectorXd>(b.data, b.size).squaredNorm();
  return std::sqrt(s);
}

inline void scale_blocks(const std::vector<ParamBlock>& g, double factor) {
  for (const auto& b : g) Eigen::Map<Eigen::VectorXd>(b.data, b.size) *= factor;
}

/// Adam with bias correction.
class Adam {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(const std::vector<ParamBlock>& params, const std::vector<ParamBlock>& grads, double lr) {
    if (m_.empty()) {
      for (const auto& p : params) {
        m_.push_back(Eigen::VectorXd::Zero(p.size));
        v_.push_back(Eigen::VectorXd::Zero(p.size));
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Eigen::Map<Eigen::ArrayXd> p(params[k].data, params[k].size);
      Eigen::Map<const Eigen::ArrayXd> g(grads[k].data, grads[k].size);
      auto m = m_[k].array();
      auto v = v_[k].array();
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.square();
      p -= lr * (m / c1) / ((v / c2).sqrt() + eps_);
    }
  }

 private:
  double beta1_, beta2_, eps_;
  std::size_t t_ = 0;
  std::vector<Eigen::VectorXd> m_, v_;
};

inline constexpr double kProbEps = 1e-12;

inline double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

/// Binary cross-entropy with p clamped to [eps, 1 - eps].
inline double bce_loss(double p, int y) {
  const double q = std::clamp(p, kProbEps, 1.0 - kProbEps);
  return y == 1 ? -std::log(q) : -std::log(1.0 - q);
}

/// Label rule shared by all neural outputs: 1 iff p >= 0.5.
inline int prob_label(double p) { return p >= 0.5 ? 1 : 0; }

inline void fill_uniform(Eigen::MatrixXd& m, double limit, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-limit, limit);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = u(rng);
}

}  // namespace bedrr
