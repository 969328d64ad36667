#pragma once

// Models with random weights at realistic sizes, for tests that exercise
// plumbing (serialization, streaming, timing) rather than accuracy.

#include <random>

#include "bedrr.hpp"

namespace fixture {

inline Eigen::MatrixXd gaussian_rows(Eigen::Index n, Eigen::Index d, std::mt19937_64& rng, double sd = 0.2) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) X(i, j) = g(rng);
  return X;
}

inline bedrr::ReliabilityModel random_model(bedrr::ModelKind kind, std::uint64_t seed, Eigen::Index q = 46,
                                            Eigen::Index svs = 300) {
  using namespace bedrr;
  std::mt19937_64 rng(seed);
  ReliabilityModel m;
  m.kind = kind;
  const Eigen::Index window = (2 * m.L + 1) * m.fs;
  switch (kind) {
    case ModelKind::Direct: break;
    case ModelKind::Energy: m.payload = EnergyThreshold{0.02}; break;
    case ModelKind::Svm: {
      m.pca = fit_pca(gaussian_rows(200, window, rng), 0.95, q);
      SvmEnsemble e;
      std::normal_distribution<double> g(0.0, 0.3);
      for (int k = 0; k < 10; ++k) {
        SvmModel s;
        s.support_vectors = gaussian_rows(svs, q, rng, 0.1);
        s.alphas_signed.resize(svs);
        for (auto& a : s.alphas_signed) a = g(rng);
        s.bias = g(rng);
        e.members.push_back(std::move(s));
      }
      m.payload = std::move(e);
      break;
    }
    case ModelKind::Mlp:
      m.pca = fit_pca(gaussian_rows(200, window, rng), 0.95, q);
      m.payload = make_mlp(q, {100, 100, 100}, rng());
      break;
    case ModelKind::Rnn: m.payload = make_rnn(m.fs, 50, m.L, rng()); break;
  }
  m.check();
  return m;
}

}  // namespace fixture
