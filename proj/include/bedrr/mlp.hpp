#pragma once

// Feed-forward reliability classifier: dense ReLU hidden layers with
// inverted dropout and a single logistic output unit.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bedrr/error.hpp"
#include "bedrr/optim.hpp"

namespace bedrr {

struct DenseLayer {
  Eigen::MatrixXd W;  // out x in
  Eigen::VectorXd b;  // out
};

struct MlpModel {
  // Hidden layers followed by the output layer (width 1).
  std::vector<DenseLayer> layers;
  double dropout_rate = 0.2;
  double l2 = 1e-6;

  Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().W.cols(); }

  std::vector<ParamBlock> blocks() {
    std::vector<ParamBlock> out;
    for (auto& l : layers) {
      out.push_back({l.W.data(), l.W.size()});
      out.push_back({l.b.data(), l.b.size()});
    }
    return out;
  }

  /// Same-shape model with every parameter zero; used as a gradient holder.
  MlpModel zeros_like() const {
    MlpModel z = *this;
    for (auto& l : z.layers) {
      l.W.setZero();
      l.b.setZero();
    }
    return z;
  }
};

enum class Mode { Train, Infer };

inline MlpModel make_mlp(Eigen::Index input_dim, std::vector<Eigen::Index> hidden = {100, 100, 100},
                         std::uint64_t seed = 0, double dropout = 0.2, double l2 = 1e-6) {
  if (input_dim <= 0) throw ConfigError("MLP input dimension must be positive");
  std::mt19937_64 rng(seed);
  MlpModel m;
  m.dropout_rate = dropout;
  m.l2 = l2;
  Eigen::Index in = input_dim;
  hidden.push_back(1);
  for (std::size_t k = 0; k < hidden.size(); ++k) {
    DenseLayer l;
    l.W.resize(hidden[k], in);
    const bool output = k + 1 == hidden.size();
    fill_uniform(l.W, output ? std::sqrt(1.0 / static_cast<double>(in)) : std::sqrt(6.0 / static_cast<double>(in)), rng);
    l.b = Eigen::VectorXd::Zero(hidden[k]);
    m.layers.push_back(std::move(l));
    in = hidden[k];
  }
  return m;
}

namespace detail {

struct MlpTrace {
  std::vector<Eigen::MatrixXd> act;   // act[0] = input, act[k+1] = output of layer k (after dropout)
  std::vector<Eigen::MatrixXd> mask;  // dropout masks (already scaled), empty in inference
  std::vector<Eigen::MatrixXd> active;  // 1 where the ReLU pre-activation is positive
};

// Forward pass on column-stacked inputs. Returns logits (1 x B).
inline Eigen::RowVectorXd mlp_logits(const MlpModel& m, const Eigen::MatrixXd& X, Mode mode,
                                     std::mt19937_64* rng, MlpTrace* trace) {
  if (X.rows() != m.input_dim()) throw DimensionError("MLP input dimension mismatch");
  const bool drop = mode == Mode::Train && m.dropout_rate > 0.0;
  if (drop && rng == nullptr) throw ConfigError("training-mode forward pass needs an RNG");
  Eigen::MatrixXd a = X;
  if (trace) {
    trace->act.clear();
    trace->mask.clear();
    trace->active.clear();
    trace->act.push_back(a);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep = 1.0 - m.dropout_rate;
  for (std::size_t k = 0; k + 1 < m.layers.size(); ++k) {
    const auto& l = m.layers[k];
    Eigen::MatrixXd pre = (l.W * a).colwise() + l.b;
    if (trace) trace->active.push_back((pre.array() > 0.0).cast<double>().matrix());
    a = pre.cwiseMax(0.0);
    if (drop) {
      Eigen::MatrixXd mask(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < mask.cols(); ++c)
        for (Eigen::Index r = 0; r < mask.rows(); ++r) mask(r, c) = u(*rng) < keep ? 1.0 / keep : 0.0;
      a = a.cwiseProduct(mask);
      if (trace) trace->mask.push_back(std::move(mask));
    }
    if (trace) trace->act.push_back(a);
  }
  const auto& out = m.layers.back();
  return (out.W * a).array() + out.b(0);
}

}  // namespace detail

/// Probability that the feature vector is reliable. Inference mode is
/// deterministic; training mode draws dropout masks from `rng`.
inline double mlp_forward(const MlpModel& m, const Eigen::Ref<const Eigen::VectorXd>& x,
                          Mode mode = Mode::Infer, std::mt19937_64* rng = nullptr) {
  const Eigen::MatrixXd X = x;
  return logistic(detail::mlp_logits(m, X, mode, rng, nullptr)(0));
}

inline Eigen::VectorXd mlp_forward_batch(const MlpModel& m, const Eigen::MatrixXd& X_rows) {
  const Eigen::MatrixXd X = X_rows.transpose();
  const Eigen::RowVectorXd z = detail::mlp_logits(m, X, Mode::Infer, nullptr, nullptr);
  Eigen::VectorXd p(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) p(i) = logistic(z(i));
  return p;
}

/// Mean BCE over the batch plus l2 * sum of squared weights (biases are not
/// penalized). Accumulates d(loss)/d(params) into `grad` (same shape as m,
/// overwritten). `X` holds samples as columns.
inline double mlp_loss_and_grad(const MlpModel& m, const Eigen::MatrixXd& X, std::span<const int> y,
                                MlpModel& grad, Mode mode = Mode::Infer, std::mt19937_64* rng = nullptr) {
  const Eigen::Index B = X.cols();
  if (static_cast<Eigen::Index>(y.size()) != B) throw DimensionError("label count mismatch");
  detail::MlpTrace tr;
  const Eigen::RowVectorXd z = detail::mlp_logits(m, X, mode, rng, &tr);

  double loss = 0.0;
  Eigen::MatrixXd delta(1, B);
  for (Eigen::Index i = 0; i < B; ++i) {
    const double p = logistic(z(i));
    loss += bce_loss(p, y[static_cast<std::size_t>(i)]);
    delta(0, i) = (p - static_cast<double>(y[static_cast<std::size_t>(i)])) / static_cast<double>(B);
  }
  loss /= static_cast<double>(B);

  grad = m.zeros_like();
  const std::size_t nl = m.layers.size();
  for (std::size_t k = nl; k-- > 0;) {
    const Eigen::MatrixXd& a_in = tr.act[k];
    grad.layers[k].W = delta * a_in.transpose() + 2.0 * m.l2 * m.layers[k].W;
    grad.layers[k].b = delta.rowwise().sum();
    loss += m.l2 * m.layers[k].W.squaredNorm();
    if (k == 0) break;
    Eigen::MatrixXd da = m.layers[k].W.transpose() * delta;
    if (!tr.mask.empty()) da = da.cwiseProduct(tr.mask[k - 1]);
    delta = da.cwiseProduct(tr.active[k - 1]);
  }
  return loss;
}

struct MlpTrainResult {
  MlpModel model;
  TrainHistory history;
};

/// Fraction of samples whose label rule disagrees with y.
inline double mlp_error(const MlpModel& m, const Eigen::MatrixXd& X_rows, std::span<const int> y) {
  if (X_rows.rows() == 0) return 0.0;
  const Eigen::VectorXd p = mlp_forward_batch(m, X_rows);
  std::size_t wrong = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) wrong += prob_label(p(i)) != y[static_cast<std::size_t>(i)] ? 1 : 0;
  return static_cast<double>(wrong) / static_cast<double>(p.size());
}

/// Adam training with per-epoch learning-rate decay. A seeded fraction of
/// the data is held out for validation. Rows of X are samples; y in {0,1}.
inline MlpTrainResult train_mlp(const Eigen::MatrixXd& X, std::span<const int> y, const TrainConfig& cfg,
                                std::vector<Eigen::Index> hidden = {100, 100, 100}) {
  cfg.check();
  const auto n = static_cast<std::size_t>(X.rows());
  if (y.size() != n) throw DimensionError("label count mismatch");
  std::mt19937_64 rng(cfg.seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(n)));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> tr(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  if (tr.empty()) throw InsufficientData("no training samples after validation split");

  Eigen::MatrixXd Xv(static_cast<Eigen::Index>(val.size()), X.cols());
  std::vector<int> yv(val.size());
  for (std::size_t i = 0; i < val.size(); ++i) {
    Xv.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(val[i]));
    yv[i] = y[val[i]];
  }

  MlpTrainResult res;
  res.model = make_mlp(X.cols(), hidden, rng(), cfg.dropout, cfg.l2);
  MlpModel best = res.model;
  double best_val = std::numeric_limits<double>::infinity();
  Adam adam;
  MlpModel grad;
  double lr = cfg.lr0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < tr.size(); s += cfg.batch) {
      const std::size_t e = std::min(tr.size(), s + cfg.batch);
      Eigen::MatrixXd Xb(X.cols(), static_cast<Eigen::Index>(e - s));
      std::vector<int> yb(e - s);
      for (std::size_t i = s; i < e; ++i) {
        Xb.col(static_cast<Eigen::Index>(i - s)) = X.row(static_cast<Eigen::Index>(tr[i])).transpose();
        yb[i - s] = y[tr[i]];
      }
      const double loss = mlp_loss_and_grad(res.model, Xb, yb, grad, Mode::Train, &rng);
      if (!std::isfinite(loss)) throw DivergenceError("MLP training loss is not finite", res.history.train_loss);
      epoch_loss += loss * static_cast<double>(e - s);
      seen += e - s;
      auto gb = grad.blocks();
      if (cfg.clip_norm > 0.0) {
        const double norm = global_norm(gb);
        if (norm > cfg.clip_norm) scale_blocks(gb, cfg.clip_norm / norm);
      }
      adam.step(res.model.blocks(), gb, lr);
    }
    res.history.train_loss.push_back(epoch_loss / static_cast<double>(seen));

    if (!val.empty()) {
      Eigen::MatrixXd XvT = Xv.transpose();
      MlpModel scratch;
      const double vl = mlp_loss_and_grad(res.model, XvT, yv, scratch);
      res.history.val_loss.push_back(vl);
      res.history.val_error.push_back(mlp_error(res.model, Xv, yv));
      if (vl < best_val) {
        best_val = vl;
        best = res.model;
        res.history.best_epoch = epoch;
      }
    }
    lr *= cfg.lr_decay;
  }
  if (cfg.keep_best && !val.empty()) res.model = best;
  return res;
}

}  // namespace bedrr
