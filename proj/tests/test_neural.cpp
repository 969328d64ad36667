#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bedrr/mlp.hpp"
#include "bedrr/rnn.hpp"
#include "bedrr/synth.hpp"
#include "bedrr/train.hpp"
#include "oracles.hpp"

using namespace bedrr;

namespace {

double sig(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

std::vector<NormalizedFrame> random_frames(std::size_t T, std::size_t dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<NormalizedFrame> out(T);
  for (std::size_t t = 0; t < T; ++t) {
    out[t].index = t + 1;
    for (std::size_t k = 0; k < dim; ++k) out[t].values.push_back(u(rng));
  }
  return out;
}

LabeledSequence random_sequence(Eigen::Index T, Eigen::Index dim, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  LabeledSequence s;
  s.frames.resize(dim, T);
  for (Eigen::Index t = 0; t < T; ++t)
    for (Eigen::Index k = 0; k < dim; ++k) s.frames(k, t) = u(rng);
  for (Eigen::Index t = 0; t < T; ++t) s.labels.push_back(static_cast<int>(rng() & 1));
  return s;
}

// Scalar LSTM cell with gate order input, forget, cell, output.
struct ScalarCell {
  double wi, wf, wg, wo, ui, uf, ug, uo, bi, bf, bg, bo;
  void step(double x, double& h, double& c) const {
    const double i = sig(wi * x + ui * h + bi), f = sig(wf * x + uf * h + bf);
    const double g = std::tanh(wg * x + ug * h + bg), o = sig(wo * x + uo * h + bo);
    c = f * c + i * g;
    h = o * std::tanh(c);
  }
  LstmLayer layer() const {
    LstmLayer l;
    l.W.resize(4, 1);
    l.U.resize(4, 1);
    l.b.resize(4);
    l.W << wi, wf, wg, wo;
    l.U << ui, uf, ug, uo;
    l.b << bi, bf, bg, bo;
    return l;
  }
};

}  // namespace

TEST(Bce, Values) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-12);
  EXPECT_NEAR(bce_loss(1.0 - kProbEps, 1), 0.0, 1e-11);
  EXPECT_NEAR(bce_loss(kProbEps, 1), -std::log(kProbEps), 1e-9);
  EXPECT_NEAR(bce_loss(0.0, 1), 27.631021, 1e-5);
  EXPECT_TRUE(std::isfinite(bce_loss(1.0, 0)));
}

TEST(LabelRule, Threshold) {
  EXPECT_EQ(prob_label(0.7), 1);
  EXPECT_EQ(prob_label(0.3), 0);
  EXPECT_EQ(prob_label(0.5), 1);
}

TEST(Mlp, ZeroWeightsGiveHalf) {
  auto m = make_mlp(5, {4, 3});
  for (auto& l : m.layers) {
    l.W.setZero();
    l.b.setZero();
  }
  EXPECT_DOUBLE_EQ(mlp_forward(m, Eigen::VectorXd::Random(5)), 0.5);
}

TEST(Mlp, HandComputedTwoTwoOne) {
  MlpModel m;
  m.layers.resize(2);
  m.layers[0].W.resize(2, 2);
  m.layers[0].W << 0.5, -1.0, 2.0, 0.25;
  m.layers[0].b = Eigen::Vector2d(0.1, -0.3);
  m.layers[1].W.resize(1, 2);
  m.layers[1].W << 1.5, -0.75;
  m.layers[1].b = Eigen::VectorXd::Constant(1, 0.2);
  const double x0 = 0.4, x1 = -0.6;
  const double h0 = std::max(0.0, 0.5 * x0 - 1.0 * x1 + 0.1);
  const double h1 = std::max(0.0, 2.0 * x0 + 0.25 * x1 - 0.3);
  const double expect = sig(1.5 * h0 - 0.75 * h1 + 0.2);
  EXPECT_NEAR(mlp_forward(m, Eigen::Vector2d(x0, x1)), expect, 1e-12);
}

TEST(Mlp, DropoutOnlyInTraining) {
  const auto m = make_mlp(6, {20, 20}, 3, 0.5);
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  EXPECT_EQ(mlp_forward(m, x), mlp_forward(m, x));
  std::mt19937_64 rng(1);
  bool differs = false;
  for (int k = 0; k < 10; ++k) differs |= mlp_forward(m, x, Mode::Train, &rng) != mlp_forward(m, x);
  EXPECT_TRUE(differs);
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  int draws = 0;
  for (int model = 0; model < 4; ++model) {
    auto m = make_mlp(5, {6, 6, 6}, rng(), 0.0, 1e-3);
    for (auto& l : m.layers) l.b.setRandom();  // keep ReLUs away from zero bias ties
    Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 7);
    std::vector<int> y;
    for (int i = 0; i < 7; ++i) y.push_back(static_cast<int>(rng() & 1));
    MlpModel g;
    mlp_loss_and_grad(m, X, y, g);
    auto params = m.blocks();
    auto grads = g.blocks();
    for (int d = 0; d < 30; ++d) {
      const std::size_t b = rng() % params.size();
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(params[b].size));
      MlpModel dummy;
      const double numeric = oracle::central_difference([&] { return mlp_loss_and_grad(m, X, y, dummy); },
                                                        params[b].data + k, 1e-6);
      EXPECT_LT(rel_err(grads[b].data[k], numeric), 1e-4) << "block " << b << " index " << k;
      ++draws;
    }
  }
  EXPECT_GE(draws, 100);
}

TEST(Mlp, LearnsSeparableBlobs) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 0.5);
  Eigen::MatrixXd X(200, 2);
  std::vector<int> y(200);
  for (int i = 0; i < 200; ++i) {
    const int c = i % 2;
    X(i, 0) = (c ? 1.5 : -1.5) + g(rng);
    X(i, 1) = (c ? 1.0 : -1.0) + g(rng);
    y[static_cast<std::size_t>(i)] = c;
  }
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.seed = 2;
  const auto r = train_mlp(X, y, cfg);
  EXPECT_LT(mlp_error(r.model, X, y), 0.05);
  EXPECT_EQ(r.history.train_loss.size(), 200u);
  // Same data, config and seed give identical weights.
  cfg.epochs = 5;
  const auto a = train_mlp(X, y, cfg), b = train_mlp(X, y, cfg);
  EXPECT_EQ(a.model.layers[0].W, b.model.layers[0].W);
}

TEST(Lstm, SingleCellMatchesScalarRecurrence) {
  const ScalarCell cell{0.3, -0.2, 0.8, 0.5, 0.1, 0.4, -0.6, 0.2, 0.05, 1.0, -0.1, 0.3};
  const LstmLayer l = cell.layer();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(1, 1), c = h;
  double hs = 0.0, cs = 0.0;
  for (double x : {0.2, -0.4, 0.9, 0.0, -1.3}) {
    lstm_step(l, Eigen::MatrixXd::Constant(1, 1, x), h, c);
    cell.step(x, hs, cs);
    EXPECT_NEAR(h(0, 0), hs, 1e-12);
    EXPECT_NEAR(c(0, 0), cs, 1e-12);
  }
}

TEST(HybridRnn, WidthOneMatchesManualComputation) {
  const ScalarCell f1{0.3, -0.2, 0.8, 0.5, 0.1, 0.4, -0.6, 0.2, 0.05, 1.0, -0.1, 0.3};
  const ScalarCell f2{-0.5, 0.6, 0.2, -0.1, 0.3, -0.2, 0.7, 0.4, 0.0, 1.0, 0.2, -0.3};
  const ScalarCell bw{0.9, 0.1, -0.4, 0.6, -0.3, 0.2, 0.5, -0.7, 0.1, 1.0, 0.0, 0.2};
  HybridRnnModel m;
  m.fwd1 = f1.layer();
  m.fwd2 = f2.layer();
  m.bwd = bw.layer();
  m.head_w = Eigen::VectorXd::Constant(1, 1.7);
  m.head_b = -0.2;
  m.L = 2;
  const std::vector<double> xs{0.2, -0.4, 0.9, 0.0, -1.3, 0.6, 0.1};
  std::vector<NormalizedFrame> frames;
  for (std::size_t t = 0; t < xs.size(); ++t) frames.push_back({t + 1, {xs[t]}});
  const auto p = rnn_forward_batch(m, frames);
  ASSERT_EQ(p.size(), xs.size() - 4);

  std::vector<double> fwd;
  double h1 = 0, c1 = 0, h2 = 0, c2 = 0;
  for (std::size_t t = 0; t + 2 < xs.size(); ++t) {
    f1.step(xs[t], h1, c1);
    f2.step(h1, h2, c2);
    fwd.push_back(h2);
  }
  for (std::size_t n = 2; n + 2 < xs.size(); ++n) {
    double hb = 0, cb = 0;
    for (std::size_t s = 0; s <= 2; ++s) bw.step(xs[n + 2 - s], hb, cb);
    EXPECT_NEAR(p[n - 2], sig(1.7 * (fwd[n] + hb) - 0.2), 1e-12);
  }
}

TEST(HybridRnn, OutputCountsAndZeroModel) {
  std::mt19937_64 rng(1);
  auto m = make_rnn(10, 5, 3, 1);
  EXPECT_EQ(rnn_forward_batch(m, random_frames(7, 10, rng)).size(), 1u);
  EXPECT_THROW(rnn_forward_batch(m, random_frames(6, 10, rng)), TooShort);
  const auto z = m.zeros_like();
  for (double p : rnn_forward_batch(z, random_frames(12, 10, rng))) EXPECT_DOUBLE_EQ(p, 0.5);
}

TEST(HybridRnn, StreamMatchesBatch) {
  std::mt19937_64 rng(2);
  for (int L : {0, 1, 3}) {
    const auto m = make_rnn(10, 8, L, static_cast<std::uint64_t>(L) + 5);
    const auto frames = random_frames(40, 10, rng);
    const auto batch = rnn_forward_batch(m, frames);
    RnnStreamState st(m);
    std::vector<double> streamed;
    for (std::size_t t = 0; t < frames.size(); ++t) {
      const auto p = rnn_stream_step(st, frames[t]);
      EXPECT_EQ(p.has_value(), t >= static_cast<std::size_t>(L));
      if (p) streamed.push_back(*p);
    }
    // The stream also scores the first L frames, which the batch call skips.
    ASSERT_GE(streamed.size(), batch.size());
    for (std::size_t k = 0; k < batch.size(); ++k) EXPECT_NEAR(streamed[k + static_cast<std::size_t>(L)], batch[k], 1e-9);
  }
}

TEST(HybridRnn, StreamRejectsOutOfOrderFrames) {
  std::mt19937_64 rng(3);
  const auto m = make_rnn(10, 4, 3, 0);
  auto frames = random_frames(3, 10, rng);
  RnnStreamState st(m);
  st.step(frames[0]);
  EXPECT_THROW(st.step(frames[2]), OrderingError);
}

TEST(HybridRnn, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(29);
  int draws = 0;
  for (int model = 0; model < 4; ++model) {
    auto m = make_rnn(3, 2, 3, rng());
    m.head_b = 0.1;
    for (LstmLayer* l : {&m.fwd1, &m.fwd2, &m.bwd}) l->b.setRandom();
    const auto s1 = random_sequence(9, 3, rng), s2 = random_sequence(9, 3, rng);
    const std::vector<const LabeledSequence*> batch{&s1, &s2};
    RnnCarry init{Eigen::MatrixXd::Random(2, 2), Eigen::MatrixXd::Random(2, 2), Eigen::MatrixXd::Random(2, 2),
                  Eigen::MatrixXd::Random(2, 2)};
    const RnnCarry* ip = model % 2 ? &init : nullptr;
    HybridRnnModel g;
    rnn_loss_and_grad(m, batch, 1e-3, &g, ip);
    auto params = m.blocks();
    auto grads = g.blocks();
    for (int d = 0; d < 30; ++d) {
      const std::size_t b = rng() % params.size();
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(params[b].size));
      const double numeric = oracle::central_difference([&] { return rnn_loss_and_grad(m, batch, 1e-3, nullptr, ip); },
                                                        params[b].data + k, 1e-6);
      EXPECT_LT(rel_err(grads[b].data[k], numeric), 1e-4) << "block " << b << " index " << k;
      ++draws;
    }
  }
  EXPECT_GE(draws, 100);
}

TEST(HybridRnn, LossMatchesForwardPass) {
  std::mt19937_64 rng(31);
  const auto m = make_rnn(4, 3, 2, 9);
  const auto s = random_sequence(12, 4, rng);
  const std::vector<const LabeledSequence*> batch{&s};
  const auto p = rnn_forward_batch(m, detail::frames_of(s));
  double loss = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) loss += bce_loss(p[k], s.labels[k + 2]);
  loss /= static_cast<double>(p.size());
  EXPECT_NEAR(rnn_loss_and_grad(m, batch, 0.0, nullptr), loss, 1e-12);
}

TEST(HybridRnn, LearnsSyntheticReliability) {
  std::vector<LabeledRecording> recs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    const auto lw = gen_scenario(protocol_script(50 + s, s > 0));
    recs.push_back({lw.wave, lw.labels});
  }
  TrainOptions o;
  o.kind = ModelKind::Rnn;
  o.seed = 3;
  o.rnn.batch = 8;
  o.rnn.lr0 = 0.01;
  o.rnn.epochs = 30;
  const auto out = train_model(recs, o);
  EXPECT_LT(out.report.test.error(), 0.10);
}
