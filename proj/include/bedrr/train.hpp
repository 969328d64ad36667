#pragma once

// Training entry point for every reliability model kind from labelled
// recordings, with a seeded 80/20 train/test split and held-out metrics.

#include <Eigen/Dense>
#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "bedrr/error.hpp"
#include "bedrr/features.hpp"
#include "bedrr/model.hpp"
#include "bedrr/signal.hpp"

namespace bedrr {

struct LabeledRecording {
  WaveformRecord wave;
  std::vector<int> labels;  // one per complete frame
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  void add(int truth, int pred) {
    if (pred == 1) (truth == 1 ? tp : fp)++;
    else (truth == 1 ? fn : tn)++;
  }
  std::size_t total() const { return tp + fp + tn + fn; }
  double error() const { return total() ? static_cast<double>(fp + fn) / static_cast<double>(total()) : 0.0; }
  // Positive class is "reliable".
  double precision() const { return tp + fp ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0; }
};

struct TrainOptions {
  ModelKind kind = ModelKind::Svm;
  double sigma = kDefaultSigma;
  int L = kDefaultContext;
  int fs = kDefaultFs;
  std::uint64_t seed = 0;
  double test_fraction = 0.2;
  // Features.
  double pca_fraction = 0.95;
  Eigen::Index pca_components = 0;  // 0 keeps pca_fraction of the variance
  // SVM.
  std::size_t svm_members = 10;
  double svm_C = 2.0;
  double svm_gamma = 0.4;
  double svm_tol = 1e-3;
  // Neural networks.
  TrainConfig mlp{};
  TrainConfig rnn{0.001, 0.99, 32, 1000, 1e-6, 0, 0.2, 0.0, 5.0, true};
  std::vector<Eigen::Index> mlp_hidden{100, 100, 100};
  Eigen::Index rnn_width = 50;
  std::size_t rnn_min_len = 20;
  std::size_t rnn_max_len = 30;
  // Lane length for state-carrying training; 0 trains on independent chunks.
  std::size_t rnn_lane_frames = 360;

  void check() const {
    if (!(sigma > 0.0) || L < 0 || fs <= 0) throw ConfigError("invalid preprocessing parameters");
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test fraction must lie in [0, 1)");
    if (!(pca_fraction > 0.0 && pca_fraction <= 1.0)) throw ConfigError("PCA fraction must lie in (0, 1]");
    if (svm_members == 0 || !(svm_C > 0.0) || !(svm_gamma > 0.0)) throw ConfigError("invalid SVM parameters");
    if (rnn_min_len < static_cast<std::size_t>(2 * L + 1) || rnn_max_len < rnn_min_len)
      throw ConfigError("RNN sequence lengths must satisfy 2L+1 <= min <= max");
  }
};

struct TrainReport {
  Confusion test;  // held-out split
  std::size_t n_train = 0;
  TrainHistory history;
};

struct TrainOutcome {
  ReliabilityModel model;
  TrainReport report;
};

namespace detail {

inline void check_recording(const LabeledRecording& r, int fs) {
  if (r.wave.fs != fs) throw ConfigError("recording fs differs from the training fs");
  if (r.labels.size() != r.wave.frame_count()) throw DimensionError("label count differs from frame count");
  for (int y : r.labels)
    if (y != 0 && y != 1) throw ParseError("labels must be 0 or 1");
}

// Context windows of every frame with full context, as rows, with labels.
inline void window_dataset(std::span<const LabeledRecording> recs, const TrainOptions& o, Eigen::MatrixXd& X,
                           std::vector<int>& y) {
  std::vector<std::vector<double>> rows;
  y.clear();
  for (const auto& r : recs) {
    const auto norm = normalize_frames(frame_signal(r.wave), o.sigma);
    for (std::size_t n = 1; n <= norm.size(); ++n) {
      if (!has_full_context(n, norm.size(), o.L)) continue;
      rows.push_back(stack_context(norm, n, o.L).values);
      y.push_back(r.labels[n - 1]);
    }
  }
  if (rows.empty()) throw InsufficientData("no frame has full context");
  X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    X.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(rows[i].data(), static_cast<Eigen::Index>(rows[i].size()));
}

inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double test_fraction,
                                                                                  std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {train, test};
}

// Threshold on window energy minimizing training error (label 1 at or below).
inline double fit_energy_threshold(std::span<const double> energy, std::span<const int> y) {
  std::vector<std::size_t> idx(energy.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return energy[a] < energy[b]; });
  // Threshold below everything: all predicted 0, errors = number of positives.
  std::size_t errors = 0;
  for (int v : y) errors += v == 1 ? 1 : 0;
  std::size_t best = errors;
  double threshold = energy.empty() ? 0.0 : energy[idx.front()] - 1.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    errors = y[idx[k]] == 1 ? errors - 1 : errors + 1;
    if (k + 1 < idx.size() && energy[idx[k + 1]] == energy[idx[k]]) continue;
    if (errors < best) {
      best = errors;
      threshold = k + 1 < idx.size() ? 0.5 * (energy[idx[k]] + energy[idx[k + 1]]) : energy[idx[k]];
    }
  }
  return threshold;
}

inline LabeledSequence to_sequence(const LabeledRecording& r, const TrainOptions& o, std::size_t first,
                                   std::size_t count, const std::vector<NormalizedFrame>& norm) {
  LabeledSequence q;
  q.frames.resize(o.fs, static_cast<Eigen::Index>(count));
  for (std::size_t t = 0; t < count; ++t)
    for (int k = 0; k < o.fs; ++k)
      q.frames(k, static_cast<Eigen::Index>(t)) = norm[first + t].values[static_cast<std::size_t>(k)];
  q.labels.assign(r.labels.begin() + static_cast<std::ptrdiff_t>(first),
                  r.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return q;
}

// Consecutive non-overlapping lanes of rnn_lane_frames; the remainder is dropped.
inline std::vector<LabeledSequence> lane_sequences(std::span<const LabeledRecording> recs, const TrainOptions& o) {
  std::vector<LabeledSequence> out;
  for (const auto& r : recs) {
    const auto norm = normalize_frames(frame_signal(r.wave), o.sigma);
    for (std::size_t s = 0; s + o.rnn_lane_frames <= norm.size(); s += o.rnn_lane_frames)
      out.push_back(to_sequence(r, o, s, o.rnn_lane_frames, norm));
  }
  return out;
}

inline std::vector<NormalizedFrame> frames_of(const LabeledSequence& q) {
  std::vector<NormalizedFrame> frames(static_cast<std::size_t>(q.frames.cols()));
  for (Eigen::Index t = 0; t < q.frames.cols(); ++t) {
    frames[static_cast<std::size_t>(t)].index = static_cast<std::size_t>(t + 1);
    frames[static_cast<std::size_t>(t)].values.assign(q.frames.col(t).data(), q.frames.col(t).data() + q.frames.rows());
  }
  return frames;
}

// Consecutive chunks with lengths drawn uniformly in [min_len, max_len]; a
// short tail is merged into the previous chunk when that stays within max_len
// and dropped otherwise.
inline std::vector<LabeledSequence> chunk_sequences(std::span<const LabeledRecording> recs, const TrainOptions& o,
                                                    std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> len(o.rnn_min_len, o.rnn_max_len);
  std::vector<LabeledSequence> out;
  for (const auto& r : recs) {
    const auto norm = normalize_frames(frame_signal(r.wave), o.sigma);
    const std::size_t T = norm.size();
    std::size_t s = 0;
    while (s < T) {
      std::size_t n = std::min(len(rng), T - s);
      if (T - s - n < o.rnn_min_len && T - s <= o.rnn_max_len) n = T - s;
      if (n < o.rnn_min_len) break;
      out.push_back(to_sequence(r, o, s, n, norm));
      s += n;
    }
  }
  return out;
}

}  // namespace detail

/// Trains one reliability model. Held-out metrics cover the test split: for
/// window kinds a random 20% of windows, for the RNN a random 20% of chunks.
inline TrainOutcome train_model(std::span<const LabeledRecording> recs, const TrainOptions& o) {
  o.check();
  if (recs.empty()) throw InsufficientData("no training recordings");
  for (const auto& r : recs) detail::check_recording(r, o.fs);
  std::mt19937_64 rng(o.seed);

  TrainOutcome res;
  ReliabilityModel& m = res.model;
  m.kind = o.kind;
  m.sigma = o.sigma;
  m.L = o.L;
  m.fs = o.fs;
  if (o.kind == ModelKind::Direct) return res;

  if (o.kind == ModelKind::Rnn && o.rnn_lane_frames > 0) {
    if (o.rnn_lane_frames < o.rnn_max_len) throw ConfigError("RNN lanes must be at least rnn_max_len frames");
    auto lanes = detail::lane_sequences(recs, o);
    if (lanes.size() < 2) throw InsufficientData("too few RNN training lanes");
    auto [tr_idx, te_idx] = detail::split_indices(lanes.size(), o.test_fraction, rng);
    std::vector<LabeledSequence> train;
    for (auto i : tr_idx) train.push_back(lanes[i]);
    TrainConfig cfg = o.rnn;
    cfg.seed = rng();
    auto fit = train_rnn_streams(train, cfg, o.rnn_width, o.L, o.rnn_min_len, o.rnn_max_len, o.rnn_lane_frames);
    m.payload = std::move(fit.model);
    res.report.history = std::move(fit.history);
    res.report.n_train = train.size();
    const auto& r = std::get<HybridRnnModel>(m.payload);
    for (auto i : te_idx) {
      const auto& q = lanes[i];
      const auto p = rnn_forward_batch(r, detail::frames_of(q));
      for (std::size_t k = 0; k < p.size(); ++k) res.report.test.add(q.labels[static_cast<std::size_t>(o.L) + k], prob_label(p[k]));
    }
    m.check();
    return res;
  }

  if (o.kind == ModelKind::Rnn) {
    auto seqs = detail::chunk_sequences(recs, o, rng);
    if (seqs.size() < 2) throw InsufficientData("too few RNN training sequences");
    auto [tr_idx, te_idx] = detail::split_indices(seqs.size(), o.test_fraction, rng);
    std::vector<LabeledSequence> train;
    for (auto i : tr_idx) train.push_back(seqs[i]);
    TrainConfig cfg = o.rnn;
    cfg.seed = rng();
    auto fit = train_rnn(train, cfg, o.rnn_width, o.L);
    m.payload = std::move(fit.model);
    res.report.history = std::move(fit.history);
    res.report.n_train = train.size();
    const auto& r = std::get<HybridRnnModel>(m.payload);
    for (auto i : te_idx) {
      const auto& q = seqs[i];
      const auto p = rnn_forward_batch(r, detail::frames_of(q));
      for (std::size_t k = 0; k < p.size(); ++k) res.report.test.add(q.labels[static_cast<std::size_t>(o.L) + k], prob_label(p[k]));
    }
    m.check();
    return res;
  }

  Eigen::MatrixXd X;
  std::vector<int> y;
  detail::window_dataset(recs, o, X, y);
  auto [tr_idx, te_idx] = detail::split_indices(static_cast<std::size_t>(X.rows()), o.test_fraction, rng);
  Eigen::MatrixXd Xtr, Xte;
  std::vector<int> ytr, yte;
  detail::gather(X, y, tr_idx, Xtr, ytr);
  detail::gather(X, y, te_idx, Xte, yte);
  res.report.n_train = tr_idx.size();

  if (o.kind == ModelKind::Energy) {
    std::vector<double> e(static_cast<std::size_t>(Xtr.rows()));
    for (Eigen::Index i = 0; i < Xtr.rows(); ++i)
      e[static_cast<std::size_t>(i)] = Xtr.row(i).squaredNorm() / static_cast<double>(Xtr.cols());
    m.payload = EnergyThreshold{detail::fit_energy_threshold(e, ytr)};
  } else {
    m.pca = fit_pca(Xtr, o.pca_fraction, o.pca_components);
    Eigen::MatrixXd F = (Xtr.rowwise() - m.pca->mean.transpose()) * m.pca->basis.transpose();
    if (o.kind == ModelKind::Svm) {
      std::vector<int> ypm(ytr.size());
      for (std::size_t i = 0; i < ytr.size(); ++i) ypm[i] = ytr[i] == 1 ? 1 : -1;
      m.payload = train_ensemble(F, ypm, o.svm_members, o.svm_C, o.svm_gamma, rng(), o.svm_tol);
    } else {
      TrainConfig cfg = o.mlp;
      cfg.seed = rng();
      auto fit = train_mlp(F, ytr, cfg, o.mlp_hidden);
      m.payload = std::move(fit.model);
      res.report.history = std::move(fit.history);
    }
  }
  m.check();
  for (Eigen::Index i = 0; i < Xte.rows(); ++i) {
    const Eigen::VectorXd row = Xte.row(i).transpose();
    res.report.test.add(yte[static_cast<std::size_t>(i)], score_window(m, std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))).second);
  }
  return res;
}

}  // namespace bedrr
