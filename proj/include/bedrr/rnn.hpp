#pragma once

// Hybrid recurrent reliability classifier.
//
// Two stacked forward LSTM layers run over the whole history. For every
// predicted frame n a shared backward LSTM runs over frames n+L, ..., n
// (reversed) and its last output is added to the forward output at n. A
// logistic unit on the fused vector gives the reliability probability, so a
// frame is labelled once L future frames are available.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bedrr/error.hpp"
#include "bedrr/optim.hpp"
#include "bedrr/signal.hpp"

namespace bedrr {

/// Gate rows are stacked input, forget, cell, output.
struct LstmLayer {
  Eigen::MatrixXd W;  // 4D x in
  Eigen::MatrixXd U;  // 4D x D
  Eigen::VectorXd b;  // 4D

  Eigen::Index width() const { return U.cols(); }
  Eigen::Index input_dim() const { return W.cols(); }
};

inline LstmLayer make_lstm(Eigen::Index in, Eigen::Index width, std::mt19937_64& rng) {
  LstmLayer l;
  l.W.resize(4 * width, in);
  l.U.resize(4 * width, width);
  fill_uniform(l.W, 1.0 / std::sqrt(static_cast<double>(in)), rng);
  fill_uniform(l.U, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  l.b = Eigen::VectorXd::Zero(4 * width);
  l.b.segment(width, width).setOnes();
  return l;
}

struct LstmStepCache {
  Eigen::MatrixXd x, h_prev, c_prev, i, f, g, o, tc;
};

namespace detail {

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& z) {
  return z.unaryExpr([](double v) { return logistic(v); });
}

}  // namespace detail

/// One recurrence step on column-stacked inputs; h and c are updated in place.
inline void lstm_step(const LstmLayer& l, const Eigen::MatrixXd& x, Eigen::MatrixXd& h, Eigen::MatrixXd& c,
                      LstmStepCache* cache = nullptr) {
  const Eigen::Index D = l.width();
  Eigen::MatrixXd z = l.W * x + l.U * h;
  z.colwise() += l.b;
  Eigen::MatrixXd i = detail::sigmoid(z.topRows(D));
  Eigen::MatrixXd f = detail::sigmoid(z.middleRows(D, D));
  Eigen::MatrixXd g = z.middleRows(2 * D, D).array().tanh().matrix();
  Eigen::MatrixXd o = detail::sigmoid(z.bottomRows(D));
  Eigen::MatrixXd c_new = f.cwiseProduct(c) + i.cwiseProduct(g);
  Eigen::MatrixXd tc = c_new.array().tanh().matrix();
  Eigen::MatrixXd h_new = o.cwiseProduct(tc);
  if (cache) {
    cache->x = x;
    cache->h_prev = h;
    cache->c_prev = c;
    cache->i = std::move(i);
    cache->f = std::move(f);
    cache->g = std::move(g);
    cache->o = std::move(o);
    cache->tc = tc;
  }
  h = std::move(h_new);
  c = std::move(c_new);
}

/// Backward through one step. `dh` is the gradient w.r.t. this step's h,
/// `dc` the gradient arriving at this step's c (replaced by the gradient
/// w.r.t. c_prev). Returns dL/dx; dL/dh_prev is written to `dh_prev`.
inline Eigen::MatrixXd lstm_step_backward(const LstmLayer& l, const LstmStepCache& k, const Eigen::MatrixXd& dh,
                                          Eigen::MatrixXd& dc, Eigen::MatrixXd& dh_prev, LstmLayer& grad) {
  const Eigen::Index D = l.width();
  const Eigen::MatrixXd d_o = dh.cwiseProduct(k.tc);
  const Eigen::MatrixXd dct =
      dc + dh.cwiseProduct(k.o).cwiseProduct((1.0 - k.tc.array().square()).matrix());
  Eigen::MatrixXd dz(4 * D, dh.cols());
  dz.topRows(D) = dct.cwiseProduct(k.g).cwiseProduct(k.i.cwiseProduct((1.0 - k.i.array()).matrix()));
  dz.middleRows(D, D) = dct.cwiseProduct(k.c_prev).cwiseProduct(k.f.cwiseProduct((1.0 - k.f.array()).matrix()));
  dz.middleRows(2 * D, D) = dct.cwiseProduct(k.i).cwiseProduct((1.0 - k.g.array().square()).matrix());
  dz.bottomRows(D) = d_o.cwiseProduct(k.o.cwiseProduct((1.0 - k.o.array()).matrix()));
  dc = dct.cwiseProduct(k.f);
  grad.W.noalias() += dz * k.x.transpose();
  grad.U.noalias() += dz * k.h_prev.transpose();
  grad.b += dz.rowwise().sum();
  dh_prev = l.U.transpose() * dz;
  return l.W.transpose() * dz;
}

struct HybridRnnModel {
  LstmLayer fwd1, fwd2, bwd;
  Eigen::VectorXd head_w;  // D
  double head_b = 0.0;
  int L = kDefaultContext;

  Eigen::Index width() const { return fwd1.width(); }
  Eigen::Index frame_dim() const { return fwd1.input_dim(); }

  std::vector<ParamBlock> blocks() {
    std::vector<ParamBlock> out;
    for (LstmLayer* l : {&fwd1, &fwd2, &bwd}) {
      out.push_back({l->W.data(), l->W.size()});
      out.push_back({l->U.data(), l->U.size()});
      out.push_back({l->b.data(), l->b.size()});
    }
    out.push_back({head_w.data(), head_w.size()});
    out.push_back({&head_b, 1});
    return out;
  }

  HybridRnnModel zeros_like() const {
    HybridRnnModel z = *this;
    for (LstmLayer* l : {&z.fwd1, &z.fwd2, &z.bwd}) {
      l->W.setZero();
      l->U.setZero();
      l->b.setZero();
    }
    z.head_w.setZero();
    z.head_b = 0.0;
    return z;
  }

  /// Sum of squared kernel weights (biases excluded).
  double weight_norm2() const {
    double s = head_w.squaredNorm();
    for (const LstmLayer* l : {&fwd1, &fwd2, &bwd}) s += l->W.squaredNorm() + l->U.squaredNorm();
    return s;
  }

  void check() const {
    if (fwd1.width() != fwd2.width() || fwd1.width() != bwd.width() || head_w.size() != fwd1.width())
      throw ConfigError("hybrid RNN layer widths must agree");
    if (fwd2.input_dim() != fwd1.width() || bwd.input_dim() != fwd1.input_dim())
      throw ConfigError("hybrid RNN input dimensions are inconsistent");
    if (L < 0) throw ConfigError("negative latency");
  }
};

inline HybridRnnModel make_rnn(Eigen::Index frame_dim, Eigen::Index width = 50, int L = kDefaultContext,
                               std::uint64_t seed = 0) {
  if (frame_dim <= 0 || width <= 0) throw ConfigError("RNN dimensions must be positive");
  std::mt19937_64 rng(seed);
  HybridRnnModel m;
  m.fwd1 = make_lstm(frame_dim, width, rng);
  m.fwd2 = make_lstm(width, width, rng);
  m.bwd = make_lstm(frame_dim, width, rng);
  Eigen::MatrixXd hw(width, 1);
  fill_uniform(hw, 1.0 / std::sqrt(static_cast<double>(width)), rng);
  m.head_w = hw.col(0);
  m.L = L;
  return m;
}

namespace detail {

inline Eigen::MatrixXd column(std::span<const double> v) {
  return Eigen::Map<const Eigen::MatrixXd>(v.data(), static_cast<Eigen::Index>(v.size()), 1);
}

// Backward LSTM over frames given newest-first; returns the final output.
inline Eigen::MatrixXd backward_summary(const HybridRnnModel& m, const std::vector<const Eigen::MatrixXd*>& newest_first) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m.width(), 1);
  Eigen::MatrixXd c = h;
  for (const Eigen::MatrixXd* x : newest_first) lstm_step(m.bwd, *x, h, c);
  return h;
}

inline double head(const HybridRnnModel& m, const Eigen::MatrixXd& fused) {
  return logistic(m.head_w.dot(fused.col(0)) + m.head_b);
}

}  // namespace detail

/// Probabilities for frames L+1 .. T-L of a T-frame sequence (T - 2L values).
inline std::vector<double> rnn_forward_batch(const HybridRnnModel& m, std::span<const NormalizedFrame> frames) {
  m.check();
  const auto T = frames.size();
  const auto L = static_cast<std::size_t>(m.L);
  if (T < 2 * L + 1) throw TooShort("sequence shorter than 2L+1 frames");
  std::vector<Eigen::MatrixXd> x;
  x.reserve(T);
  for (const auto& f : frames) {
    if (static_cast<Eigen::Index>(f.values.size()) != m.frame_dim()) throw DimensionError("frame width mismatch");
    x.push_back(detail::column(f.values));
  }

  // Forward tensor over frames 1 .. T-L.
  const Eigen::Index D = m.width();
  std::vector<Eigen::MatrixXd> fwd;
  fwd.reserve(T - L);
  Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(D, 1), c1 = h1, h2 = h1, c2 = h1;
  for (std::size_t t = 0; t + L < T; ++t) {
    lstm_step(m.fwd1, x[t], h1, c1);
    lstm_step(m.fwd2, h1, h2, c2);
    fwd.push_back(h2);
  }

  // One backward segment per predicted frame, fused with the last T-2L forward outputs.
  std::vector<double> out;
  out.reserve(T - 2 * L);
  std::vector<const Eigen::MatrixXd*> seg(L + 1);
  for (std::size_t n = L; n + L < T; ++n) {
    for (std::size_t s = 0; s <= L; ++s) seg[s] = &x[n + L - s];
    out.push_back(detail::head(m, fwd[n] + detail::backward_summary(m, seg)));
  }
  return out;
}

/// Per-stream inference state. Holds the stacked forward layers' state at
/// the last consumed frame and up to L+1 pending frames.
class RnnStreamState {
 public:
  explicit RnnStreamState(const HybridRnnModel& m) : m_(&m) {
    m.check();
    reset();
  }

  void reset() {
    const Eigen::Index D = m_->width();
    h1_ = Eigen::MatrixXd::Zero(D, 1);
    c1_ = h1_;
    h2_ = h1_;
    c2_ = h1_;
    pending_.clear();
    last_index_ = 0;
  }

  /// Index of the last frame accepted.
  std::size_t last_index() const { return last_index_; }
  std::size_t pending() const { return pending_.size(); }
  const HybridRnnModel& model() const { return *m_; }

  /// Feeds frame n+L; returns the probability for frame n once L future
  /// frames are buffered. Frames must arrive with consecutive indices
  /// starting at 1.
  std::optional<double> step(const NormalizedFrame& f) {
    const HybridRnnModel& m = *m_;
    if (f.index != last_index_ + 1)
      throw OrderingError("frame " + std::to_string(f.index) + " arrived out of order");
    if (static_cast<Eigen::Index>(f.values.size()) != m.frame_dim()) throw DimensionError("frame width mismatch");
    last_index_ = f.index;
    pending_.push_back(detail::column(f.values));
    const auto L = static_cast<std::size_t>(m.L);
    if (pending_.size() < L + 1) return std::nullopt;

    lstm_step(m.fwd1, pending_.front(), h1_, c1_);
    lstm_step(m.fwd2, h1_, h2_, c2_);
    std::vector<const Eigen::MatrixXd*> seg(L + 1);
    for (std::size_t k = 0; k <= L; ++k) seg[k] = &pending_[L - k];
    const double p = detail::head(m, h2_ + detail::backward_summary(m, seg));
    pending_.pop_front();
    return p;
  }

 private:
  const HybridRnnModel* m_;
  Eigen::MatrixXd h1_, c1_, h2_, c2_;
  std::deque<Eigen::MatrixXd> pending_;
  std::size_t last_index_ = 0;
};

inline std::optional<double> rnn_stream_step(RnnStreamState& s, const NormalizedFrame& f) { return s.step(f); }

/// A training sequence: frames as columns (frame_dim x T) and per-frame
/// labels in {0,1}. Only frames L+1 .. T-L contribute to the loss.
struct LabeledSequence {
  Eigen::MatrixXd frames;
  std::vector<int> labels;
};

/// Forward-layer state for B parallel sequences (each D x B).
struct RnnCarry {
  Eigen::MatrixXd h1, c1, h2, c2;
};

/// Mean BCE over the T-2L scored positions of every sequence in the batch,
/// plus l2 * squared kernel weights. All sequences must share one length.
/// `grad` is overwritten with d(loss)/d(params).
///
/// `init` optionally supplies the forward state before the first frame
/// (treated as a constant). When `carry_out` is set it receives the forward
/// state after 0-based step `carry_step`.
inline double rnn_loss_and_grad(const HybridRnnModel& m, std::span<const LabeledSequence* const> batch,
                                double l2, HybridRnnModel* grad, const RnnCarry* init = nullptr,
                                RnnCarry* carry_out = nullptr, Eigen::Index carry_step = -1) {
  m.check();
  if (batch.empty()) throw InsufficientData("empty batch");
  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index T = batch.front()->frames.cols();
  const Eigen::Index L = m.L;
  const Eigen::Index D = m.width();
  const Eigen::Index F = m.frame_dim();
  if (T < 2 * L + 1) throw TooShort("sequence shorter than 2L+1 frames");
  const Eigen::Index P = T - 2 * L;
  const Eigen::Index Tf = T - L;

  std::vector<Eigen::MatrixXd> x(static_cast<std::size_t>(T), Eigen::MatrixXd(F, B));
  Eigen::MatrixXd Y(P, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& s = *batch[static_cast<std::size_t>(b)];
    if (s.frames.cols() != T || s.frames.rows() != F) throw DimensionError("batch sequences differ in shape");
    if (static_cast<Eigen::Index>(s.labels.size()) != T) throw DimensionError("label count mismatch");
    for (Eigen::Index t = 0; t < T; ++t) x[static_cast<std::size_t>(t)].col(b) = s.frames.col(t);
    for (Eigen::Index p = 0; p < P; ++p) Y(p, b) = s.labels[static_cast<std::size_t>(L + p)];
  }

  // Stacked forward layers.
  std::vector<LstmStepCache> k1(static_cast<std::size_t>(Tf)), k2(static_cast<std::size_t>(Tf));
  std::vector<Eigen::MatrixXd> H2(static_cast<std::size_t>(Tf));
  Eigen::MatrixXd h1 = Eigen::MatrixXd::Zero(D, B), c1 = h1, h2 = h1, c2 = h1;
  if (init) {
    if (init->h1.rows() != D || init->h1.cols() != B) throw DimensionError("carried state shape mismatch");
    h1 = init->h1;
    c1 = init->c1;
    h2 = init->h2;
    c2 = init->c2;
  }
  if (carry_out && (carry_step < 0 || carry_step >= Tf)) throw OutOfRange("carry step outside the forward range");
  for (Eigen::Index t = 0; t < Tf; ++t) {
    const auto ut = static_cast<std::size_t>(t);
    lstm_step(m.fwd1, x[ut], h1, c1, grad ? &k1[ut] : nullptr);
    lstm_step(m.fwd2, h1, h2, c2, grad ? &k2[ut] : nullptr);
    H2[ut] = h2;
    if (carry_out && t == carry_step) *carry_out = {h1, c1, h2, c2};
  }

  // All backward segments at once: column block p holds segment for frame L+p.
  std::vector<LstmStepCache> kb(static_cast<std::size_t>(L + 1));
  Eigen::MatrixXd hb = Eigen::MatrixXd::Zero(D, P * B), cb = hb;
  for (Eigen::Index s = 0; s <= L; ++s) {
    Eigen::MatrixXd xs(F, P * B);
    for (Eigen::Index p = 0; p < P; ++p) xs.middleCols(p * B, B) = x[static_cast<std::size_t>(2 * L + p - s)];
    lstm_step(m.bwd, xs, hb, cb, grad ? &kb[static_cast<std::size_t>(s)] : nullptr);
  }

  const double count = static_cast<double>(P * B);
  double loss = 0.0;
  std::vector<Eigen::MatrixXd> fused(static_cast<std::size_t>(P));
  Eigen::MatrixXd dz(P, B);
  for (Eigen::Index p = 0; p < P; ++p) {
    auto& fp = fused[static_cast<std::size_t>(p)];
    fp = H2[static_cast<std::size_t>(L + p)] + hb.middleCols(p * B, B);
    const Eigen::RowVectorXd z = (m.head_w.transpose() * fp).array() + m.head_b;
    for (Eigen::Index b = 0; b < B; ++b) {
      const double prob = logistic(z(b));
      const int yb = static_cast<int>(Y(p, b));
      loss += bce_loss(prob, yb);
      dz(p, b) = (prob - Y(p, b)) / count;
    }
  }
  loss = loss / count + l2 * m.weight_norm2();
  if (!grad) return loss;

  HybridRnnModel& g = *grad;
  g = m.zeros_like();
  g.head_w = 2.0 * l2 * m.head_w;
  for (auto [gl, ml] : {std::pair{&g.fwd1, &m.fwd1}, std::pair{&g.fwd2, &m.fwd2}, std::pair{&g.bwd, &m.bwd}}) {
    gl->W = 2.0 * l2 * ml->W;
    gl->U = 2.0 * l2 * ml->U;
  }

  std::vector<Eigen::MatrixXd> dH2(static_cast<std::size_t>(Tf), Eigen::MatrixXd::Zero(D, B));
  Eigen::MatrixXd dhb(D, P * B);
  for (Eigen::Index p = 0; p < P; ++p) {
    const Eigen::RowVectorXd dzp = dz.row(p);
    g.head_w += fused[static_cast<std::size_t>(p)] * dzp.transpose();
    g.head_b += dzp.sum();
    const Eigen::MatrixXd dfp = m.head_w * dzp;
    dH2[static_cast<std::size_t>(L + p)] += dfp;
    dhb.middleCols(p * B, B) = dfp;
  }

  // Backward-direction layer: gradient enters only at its last step.
  {
    Eigen::MatrixXd dc = Eigen::MatrixXd::Zero(D, P * B), dh_prev;
    Eigen::MatrixXd dh = dhb;
    for (Eigen::Index s = L; s >= 0; --s) {
      lstm_step_backward(m.bwd, kb[static_cast<std::size_t>(s)], dh, dc, dh_prev, g.bwd);
      dh = dh_prev;
    }
  }

  // Stacked forward layers, through time.
  Eigen::MatrixXd dh2n = Eigen::MatrixXd::Zero(D, B), dc2 = dh2n, dh1n = dh2n, dc1 = dh2n, dprev;
  for (Eigen::Index t = Tf - 1; t >= 0; --t) {
    const auto ut = static_cast<std::size_t>(t);
    const Eigen::MatrixXd dh2 = dH2[ut] + dh2n;
    const Eigen::MatrixXd dx2 = lstm_step_backward(m.fwd2, k2[ut], dh2, dc2, dprev, g.fwd2);
    dh2n = dprev;
    const Eigen::MatrixXd dh1 = dx2 + dh1n;
    lstm_step_backward(m.fwd1, k1[ut], dh1, dc1, dprev, g.fwd1);
    dh1n = dprev;
  }
  return loss;
}

struct RnnTrainResult {
  HybridRnnModel model;
  TrainHistory history;
};

namespace detail {

// Groups sequence indices by length, chunks each group into batches and
// shuffles the batch order.
inline std::vector<std::vector<const LabeledSequence*>> make_batches(const std::vector<const LabeledSequence*>& seqs,
                                                                     std::size_t batch, std::mt19937_64* rng) {
  std::map<Eigen::Index, std::vector<const LabeledSequence*>> by_len;
  for (const auto* s : seqs) by_len[s->frames.cols()].push_back(s);
  std::vector<std::vector<const LabeledSequence*>> out;
  for (auto& [len, group] : by_len) {
    if (rng) std::shuffle(group.begin(), group.end(), *rng);
    for (std::size_t i = 0; i < group.size(); i += batch)
      out.emplace_back(group.begin() + static_cast<std::ptrdiff_t>(i),
                       group.begin() + static_cast<std::ptrdiff_t>(std::min(group.size(), i + batch)));
  }
  if (rng) std::shuffle(out.begin(), out.end(), *rng);
  return out;
}

}  // namespace detail

/// Mean loss and frame error of `m` over `seqs` (scored positions only).
inline std::pair<double, double> rnn_evaluate(const HybridRnnModel& m, const std::vector<const LabeledSequence*>& seqs,
                                              double l2) {
  double loss = 0.0, wrong = 0.0, count = 0.0;
  for (const auto* s : seqs) {
    std::vector<NormalizedFrame> frames(static_cast<std::size_t>(s->frames.cols()));
    for (Eigen::Index t = 0; t < s->frames.cols(); ++t) {
      frames[static_cast<std::size_t>(t)].index = static_cast<std::size_t>(t + 1);
      frames[static_cast<std::size_t>(t)].values.assign(s->frames.col(t).data(), s->frames.col(t).data() + s->frames.rows());
    }
    const auto p = rnn_forward_batch(m, frames);
    for (std::size_t k = 0; k < p.size(); ++k) {
      const int y = s->labels[static_cast<std::size_t>(m.L) + k];
      loss += bce_loss(p[k], y);
      wrong += prob_label(p[k]) != y ? 1.0 : 0.0;
      count += 1.0;
    }
  }
  if (count == 0.0) return {0.0, 0.0};
  return {loss / count + l2 * m.weight_norm2(), wrong / count};
}

/// BPTT + Adam. A seeded fraction of sequences is held out for validation.
inline RnnTrainResult train_rnn(const std::vector<LabeledSequence>& data, const TrainConfig& cfg, Eigen::Index width = 50,
                                int L = kDefaultContext) {
  cfg.check();
  if (data.empty()) throw InsufficientData("no training sequences");
  const Eigen::Index F = data.front().frames.rows();
  for (const auto& s : data) {
    if (s.frames.cols() < 2 * L + 1) throw TooShort("training sequence shorter than 2L+1 frames");
    if (s.frames.rows() != F) throw DimensionError("training sequences differ in frame width");
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<const LabeledSequence*> all;
  for (const auto& s : data) all.push_back(&s);
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(all.size())));
  std::vector<const LabeledSequence*> val(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<const LabeledSequence*> tr(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  if (tr.empty()) throw InsufficientData("no training sequences after validation split");

  RnnTrainResult res;
  res.model = make_rnn(F, width, L, rng());
  HybridRnnModel best = res.model;
  double best_val = std::numeric_limits<double>::infinity();
  Adam adam;
  HybridRnnModel grad;
  double lr = cfg.lr0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (const auto& b : detail::make_batches(tr, cfg.batch, &rng)) {
      const double loss = rnn_loss_and_grad(res.model, b, cfg.l2, &grad);
      if (!std::isfinite(loss)) throw DivergenceError("RNN training loss is not finite", res.history.train_loss);
      epoch_loss += loss * static_cast<double>(b.size());
      seen += b.size();
      auto gb = grad.blocks();
      if (cfg.clip_norm > 0.0) {
        const double norm = global_norm(gb);
        if (norm > cfg.clip_norm) scale_blocks(gb, cfg.clip_norm / norm);
      }
      adam.step(res.model.blocks(), gb, lr);
    }
    res.history.train_loss.push_back(epoch_loss / static_cast<double>(seen));
    if (!val.empty()) {
      const auto [vl, ve] = rnn_evaluate(res.model, val, cfg.l2);
      res.history.val_loss.push_back(vl);
      res.history.val_error.push_back(ve);
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

namespace detail {

inline LabeledSequence slice(const LabeledSequence& s, std::size_t first, std::size_t count) {
  LabeledSequence out;
  out.frames = s.frames.middleCols(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count));
  out.labels.assign(s.labels.begin() + static_cast<std::ptrdiff_t>(first),
                    s.labels.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

}  // namespace detail

/// Truncated BPTT over long recordings, matching streaming inference. Each
/// recording is cut into lanes of `lane_frames`; up to cfg.batch lanes
/// advance in lockstep through chunks whose length is drawn in
/// [min_len, max_len] at every step. Consecutive chunks of a lane overlap by
/// 2L frames so every frame is scored once, and the forward state is carried
/// from chunk to chunk as a constant. Validation runs held-out lanes end to
/// end.
inline RnnTrainResult train_rnn_streams(const std::vector<LabeledSequence>& recordings, const TrainConfig& cfg,
                                        Eigen::Index width = 50, int L = kDefaultContext, std::size_t min_len = 20,
                                        std::size_t max_len = 30, std::size_t lane_frames = 360) {
  cfg.check();
  const auto uL = static_cast<std::size_t>(L);
  if (min_len < 2 * uL + 1 || max_len < min_len || lane_frames < max_len)
    throw ConfigError("need 2L+1 <= min_len <= max_len <= lane_frames");
  if (recordings.empty()) throw InsufficientData("no training recordings");
  const Eigen::Index F = recordings.front().frames.rows();
  std::vector<LabeledSequence> lanes;
  for (const auto& r : recordings) {
    if (r.frames.rows() != F) throw DimensionError("training recordings differ in frame width");
    if (static_cast<Eigen::Index>(r.labels.size()) != r.frames.cols()) throw DimensionError("label count mismatch");
    for (std::size_t s = 0; s + lane_frames <= static_cast<std::size_t>(r.frames.cols()); s += lane_frames)
      lanes.push_back(detail::slice(r, s, lane_frames));
  }
  std::mt19937_64 rng(cfg.seed);
  std::vector<const LabeledSequence*> all;
  for (const auto& s : lanes) all.push_back(&s);
  std::shuffle(all.begin(), all.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * static_cast<double>(all.size())));
  std::vector<const LabeledSequence*> val(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<const LabeledSequence*> tr(all.begin() + static_cast<std::ptrdiff_t>(n_val), all.end());
  if (tr.empty()) throw InsufficientData("no training lanes after validation split");

  RnnTrainResult res;
  res.model = make_rnn(F, width, L, rng());
  HybridRnnModel best = res.model;
  double best_val = std::numeric_limits<double>::infinity();
  Adam adam;
  HybridRnnModel grad;
  double lr = cfg.lr0;
  std::uniform_int_distribution<std::size_t> len(min_len, max_len);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(tr.begin(), tr.end(), rng);
    double epoch_loss = 0.0;
    std::size_t steps = 0;
    for (std::size_t g0 = 0; g0 < tr.size(); g0 += cfg.batch) {
      const std::vector<const LabeledSequence*> group(tr.begin() + static_cast<std::ptrdiff_t>(g0),
                                                      tr.begin() + static_cast<std::ptrdiff_t>(std::min(tr.size(), g0 + cfg.batch)));
      RnnCarry carry;
      bool have_carry = false;
      for (std::size_t pos = 0; pos + min_len <= lane_frames;) {
        const std::size_t T = std::min(len(rng), lane_frames - pos);
        std::vector<LabeledSequence> chunk;
        chunk.reserve(group.size());
        for (const auto* lane : group) chunk.push_back(detail::slice(*lane, pos, T));
        std::vector<const LabeledSequence*> ptrs;
        for (const auto& c : chunk) ptrs.push_back(&c);
        RnnCarry next;
        const auto step = static_cast<Eigen::Index>(T - 2 * uL) - 1;
        const double loss = rnn_loss_and_grad(res.model, ptrs, cfg.l2, &grad, have_carry ? &carry : nullptr, &next, step);
        if (!std::isfinite(loss)) throw DivergenceError("RNN training loss is not finite", res.history.train_loss);
        epoch_loss += loss;
        ++steps;
        auto gb = grad.blocks();
        if (cfg.clip_norm > 0.0) {
          const double norm = global_norm(gb);
          if (norm > cfg.clip_norm) scale_blocks(gb, cfg.clip_norm / norm);
        }
        adam.step(res.model.blocks(), gb, lr);
        carry = std::move(next);
        have_carry = true;
        pos += T - 2 * uL;
      }
    }
    res.history.train_loss.push_back(steps ? epoch_loss / static_cast<double>(steps) : 0.0);
    if (!val.empty()) {
      const auto [vl, ve] = rnn_evaluate(res.model, val, cfg.l2);
      res.history.val_loss.push_back(vl);
      res.history.val_error.push_back(ve);
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
