// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "bedrr.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace bedrr;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<double> tone(double f, std::size_t n, double phase = 0.0, double amp = 1.0) {
  std::vector<double> v(n);
  for (std::size_t k = 0; k < n; ++k) v[k] = amp * std::sin(2.0 * kPi * f * static_cast<double>(k) / 10.0 + phase);
  return v;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// ---- 1 ----
Outcome tone_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  const std::vector<int> labels(60, 1);
  double worst_ht = 0.0, worst_pk = 0.0;
  for (double f : {0.1, 0.2, 0.25, 0.3, 0.5, 0.683}) {
    const auto e = minute_rr(labels, tone(f, 600, 0.3), 10);
    if (!e.rr_ht || !e.rr_peaks) {
      o.pass = false;
      continue;
    }
    worst_ht = std::max(worst_ht, std::abs(*e.rr_ht - 60.0 * f));
    worst_pk = std::max(worst_pk, std::abs(*e.rr_peaks - 60.0 * f));
  }
  const double secs = seconds_since(t0);
  o.pass = o.pass && worst_ht <= 0.3 && worst_pk <= 1.0 && secs < 5.0;
  o.detail = fmt("worst |HT-60f| %.4f bpm (tol 0.3), worst |peaks-60f| %.4f bpm (tol 1), %.3f s", worst_ht, worst_pk, secs);
  return o;
}

// ---- 2 ----
Outcome peak_counting_oracle() {
  std::mt19937_64 rng(2);
  int mismatches = 0, trials = 0;
  for (; trials < 100; ++trials) {
    const std::size_t I = 2 + rng() % 4;
    std::vector<ReliableSegment> segs;
    std::vector<PeakSet> peaks;
    long num = 0, den = 0;
    std::size_t start = rng() % 50;
    for (std::size_t i = 0; i < I; ++i) {
      const std::size_t len = 31 + rng() % 400;
      ReliableSegment s{start, start + len - 1, std::vector<double>(len, 0.0)};
      PeakSet p{i, {}};
      for (std::size_t j = rng() % 8; j > 0; --j) p.peaks.push_back(start + rng() % len);
      std::sort(p.peaks.begin(), p.peaks.end());
      p.peaks.erase(std::unique(p.peaks.begin(), p.peaks.end()), p.peaks.end());
      const long J = static_cast<long>(p.peaks.size());
      num += J > 1 ? J - 1 : J;
      den += J > 1 ? static_cast<long>(p.peaks.back() - p.peaks.front()) : static_cast<long>(len - 1);
      segs.push_back(std::move(s));
      peaks.push_back(std::move(p));
      start += len + rng() % 100;
    }
    if (den == 0) continue;
    const double want = 600.0 * static_cast<double>(num) / static_cast<double>(den);
    if (rr_peak_counting(segs, peaks, 10) != want) ++mismatches;
  }
  return {mismatches == 0, fmt("%d random multi-segment peak sets, %d inexact", trials, mismatches)};
}

// ---- 3 ----
Outcome slope_fit() {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 0.1);
  double worst_resid = 0.0, worst_phase = 0.0, worst_amp = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const double f = 0.1 + 0.5 * static_cast<double>(rng() % 1000) / 1000.0;
    const std::size_t I = 1 + rng() % 3;
    std::vector<ReliableSegment> segs, scaled;
    std::size_t start = 0;
    for (std::size_t i = 0; i < I; ++i) {
      const std::size_t len = 80 + rng() % 300;
      auto v = tone(f, len);
      for (double& x : v) x += g(rng);
      segs.push_back({start, start + len - 1, v});
      auto c = v;
      for (double& x : c) x *= 0.001 + 100.0 * static_cast<double>(i);
      scaled.push_back({start, start + len - 1, c});
      start += len + 50;
    }
    std::vector<PhaseTrack> tracks;
    for (std::size_t i = 0; i < I; ++i) tracks.push_back(detail::phase_track(analytic_signal(segs[i].values), i));
    const auto fit = rr_slope_fit(tracks, 10);
    const auto [Phi, eta] = slope_design(tracks);
    Eigen::VectorXd b(static_cast<Eigen::Index>(I + 1));
    b(0) = fit.b0;
    for (std::size_t i = 0; i < I; ++i) b(static_cast<Eigen::Index>(i + 1)) = fit.intercepts[i];
    const Eigen::VectorXd rhs = Phi.transpose() * eta;
    worst_resid = std::max(worst_resid, (Phi.transpose() * Phi * b - rhs).norm() / rhs.norm());
    worst_amp = std::max(worst_amp, std::abs(rr_hilbert(scaled, 10).rr - fit.rr));
    // A constant added to one segment's phase only moves its intercept.
    auto moved = tracks;
    for (std::size_t i = 0; i < I; ++i)
      for (double& ph : moved[i].phase) ph += 7.0 * static_cast<double>(i) - 2.5;
    worst_phase = std::max(worst_phase, std::abs(rr_slope_fit(moved, 10).rr - fit.rr));
  }
  const bool pass = worst_resid <= 1e-8 && worst_phase <= 1e-6 && worst_amp <= 1e-6;
  return {pass, fmt("normal-equation residual %.2e (tol 1e-8), phase-offset shift %.2e bpm, amplitude shift %.2e bpm (tol 1e-6)",
                    worst_resid, worst_phase, worst_amp)};
}

// ---- 4 ----
Outcome gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(4);
  int draws = 0;
  double worst = 0.0;
  for (int model = 0; model < 5; ++model) {
    auto m = make_mlp(6, {8, 8, 8}, rng(), 0.0, 1e-3);
    for (auto& l : m.layers) l.b.setRandom();
    const Eigen::MatrixXd X = fixture::gaussian_rows(6, 9, rng, 1.0);
    std::vector<int> y;
    for (int i = 0; i < 9; ++i) y.push_back(static_cast<int>(rng() & 1));
    MlpModel g, scratch;
    mlp_loss_and_grad(m, X, y, g);
    auto p = m.blocks();
    auto q = g.blocks();
    for (int d = 0; d < 20; ++d, ++draws) {
      const std::size_t b = rng() % p.size();
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p[b].size));
      const double num = oracle::central_difference([&] { return mlp_loss_and_grad(m, X, y, scratch); }, p[b].data + k, 1e-6);
      worst = std::max(worst, rel_err(q[b].data[k], num));
    }
  }
  for (int model = 0; model < 5; ++model) {
    auto m = make_rnn(3, 2, 3, rng());
    for (LstmLayer* l : {&m.fwd1, &m.fwd2, &m.bwd}) l->b.setRandom();
    std::vector<LabeledSequence> seqs(2);
    for (auto& s : seqs) {
      s.frames = fixture::gaussian_rows(3, 9, rng, 0.5);
      for (int t = 0; t < 9; ++t) s.labels.push_back(static_cast<int>(rng() & 1));
    }
    const std::vector<const LabeledSequence*> batch{&seqs[0], &seqs[1]};
    HybridRnnModel g;
    rnn_loss_and_grad(m, batch, 1e-3, &g);
    auto p = m.blocks();
    auto q = g.blocks();
    for (int d = 0; d < 20; ++d, ++draws) {
      const std::size_t b = rng() % p.size();
      const auto k = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p[b].size));
      const double num = oracle::central_difference([&] { return rnn_loss_and_grad(m, batch, 1e-3, nullptr); }, p[b].data + k, 1e-6);
      worst = std::max(worst, rel_err(q[b].data[k], num));
    }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-4 && draws >= 100 && secs < 60.0,
          fmt("%d draws (MLP and width-2 T=9 L=3 RNN), worst rel-err %.2e (tol 1e-4), %.2f s", draws, worst, secs)};
}

// ---- 5 ----
Outcome streaming() {
  std::mt19937_64 rng(5);
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const int L = static_cast<int>(rng() % 4);
    const auto m = make_rnn(10, 2 + static_cast<Eigen::Index>(rng() % 12), L, rng());
    const std::size_t T = static_cast<std::size_t>(2 * L + 1) + rng() % 60;
    std::vector<NormalizedFrame> frames(T);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    for (std::size_t t = 0; t < T; ++t) {
      frames[t].index = t + 1;
      for (int k = 0; k < 10; ++k) frames[t].values.push_back(u(rng));
    }
    const auto batch = rnn_forward_batch(m, frames);
    RnnStreamState st(m);
    std::vector<double> s;
    for (const auto& f : frames)
      if (auto p = st.step(f)) s.push_back(*p);
    for (std::size_t k = 0; k < batch.size(); ++k) worst = std::max(worst, std::abs(s[k + static_cast<std::size_t>(L)] - batch[k]));
  }
  const auto rec = gen_scenario(protocol_script(55, true));
  int mismatched = 0;
  for (auto kind : {ModelKind::Direct, ModelKind::Energy, ModelKind::Svm, ModelKind::Mlp, ModelKind::Rnn}) {
    const auto m = fixture::random_model(kind, 9, 30, 100);
    const auto batch = labels_of(classify_batch(m, rec.wave));
    StreamClassifier clf(m);
    std::vector<int> streamed;
    for (const auto& f : frame_signal(rec.wave))
      for (const auto& l : clf.push(f)) streamed.push_back(l.label);
    for (const auto& l : clf.finish()) streamed.push_back(l.label);
    if (streamed != batch) ++mismatched;
  }
  return {worst <= 1e-9 && mismatched == 0,
          fmt("50 model/sequence pairs, max |stream-batch| %.2e (tol 1e-9); %d of 5 model kinds differ between stream and batch labels",
              worst, mismatched)};
}

// ---- 6 ----
Outcome smo() {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g;
  int instances = 0, pred_mismatch = 0;
  double worst_obj = 0.0, worst_kkt = 0.0;
  auto kkt = [](const SmoResult& r, const Eigen::MatrixXd& X, const std::vector<int>& y) {
    double w = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double yf = y[static_cast<std::size_t>(i)] * decision(r.model, X.row(i).transpose());
      const double a = r.alpha(i);
      w = std::max(w, a <= 0.0 ? 1.0 - yf : a >= r.model.C ? yf - 1.0 : std::abs(yf - 1.0));
    }
    return w;
  };
  double tol = SmoOptions{}.tol;
  for (; instances < 80; ++instances) {
    const Eigen::Index n = 2 + static_cast<Eigen::Index>(rng() % 7);
    Eigen::MatrixXd X(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) X.row(i) << g(rng), g(rng);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = (rng() & 1) ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const auto r = solve_csvc(X, y, {});
    const auto bf = oracle::brute_force_dual(X, y, 2.0, 0.4);
    worst_obj = std::max(worst_obj, std::abs(r.objective - bf.objective));
    worst_kkt = std::max(worst_kkt, kkt(r, X, y));
    const Eigen::MatrixXd K = oracle::rbf_gram(X, 0.4);
    for (Eigen::Index i = 0; i < n; ++i) {
      double f = bf.bias;
      for (Eigen::Index j = 0; j < n; ++j) f += bf.alpha(j) * y[static_cast<std::size_t>(j)] * K(i, j);
      if (sign_label(f) != sign_label(decision(r.model, X.row(i).transpose()))) ++pred_mismatch;
    }
  }
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd X = fixture::gaussian_rows(400, 5, rng, 1.0);
    std::vector<int> y(400);
    for (Eigen::Index i = 0; i < 400; ++i) y[static_cast<std::size_t>(i)] = X(i, 0) * X(i, 1) + 0.3 * X(i, 2) > 0 ? 1 : -1;
    worst_kkt = std::max(worst_kkt, kkt(solve_csvc(X, y, {}), X, y));
  }
  return {worst_obj <= 1e-4 && pred_mismatch == 0 && worst_kkt <= tol,
          fmt("%d instances N<=8: max objective gap %.2e (tol 1e-4), %d prediction mismatches; max KKT violation %.2e (tol %.0e)",
              instances, worst_obj, pred_mismatch, worst_kkt, tol)};
}

// ---- 7 ----
Outcome pca() {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  double worst_val = 0.0, worst_angle = 0.0, min_retained = 1.0;
  int checked = 0;
  for (; checked < 40; ++checked) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng() % 19);
    const Eigen::Index n = 50 + 6 * d;
    Eigen::MatrixXd R(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
      for (Eigen::Index j = 0; j < d; ++j) R(i, j) = g(rng);
    const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(R).householderQ();
    Eigen::MatrixXd X(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < d; ++j) X(i, j) = std::pow(0.7, static_cast<double>(j)) * g(rng);
    X = X * Q.transpose();
    const auto m = fit_pca(X, 0.95);
    const auto [vals, vecs] = oracle::jacobi_eigen(oracle::covariance(X));
    const Eigen::Index q = m.output_dim();
    for (Eigen::Index k = 0; k < q; ++k) worst_val = std::max(worst_val, std::abs(m.eigenvalues(k) - vals(k)) / std::max(1.0, vals(0)));
    Eigen::Index qs = q;
    if (q < d && std::abs(vals(q - 1) - vals(q)) < 1e-6 * vals(0)) --qs;
    if (qs > 0)
      worst_angle = std::max(worst_angle, oracle::max_principal_angle(m.basis.topRows(qs), vecs.leftCols(qs).transpose()));
    min_retained = std::min(min_retained, m.retained_fraction());
  }
  return {worst_val <= 1e-8 && worst_angle <= 1e-6 && min_retained >= 0.95,
          fmt("%d instances D<=20: eigenvalue error %.2e (tol 1e-8), principal angle %.2e rad (tol 1e-6), min retained %.4f",
              checked, worst_val, worst_angle, min_retained)};
}

// ---- 9 ----
Outcome rapid_breathing(const LabeledWaveform& session) {
  const std::size_t minute = 53;
  const std::span<const int> labels(session.labels.data() + minute * 60, 60);
  const std::span<const double> samples(session.wave.samples.data() + minute * 600, 600);
  const auto e = minute_rr(labels, samples, 10, minute, minute * 600);
  const double gth = session.gth[minute].value_or(0.0);
  if (!e.rr_peaks || !e.rr_ht || gth == 0.0) return {false, "no estimate for the 41 bpm minute"};
  const double under = (gth - *e.rr_peaks) / gth;
  const double ht = std::abs(*e.rr_ht - gth) / gth;
  return {under >= 0.10 && ht <= 0.05,
          fmt("gth %.0f bpm: peaks %.2f (undercount %.1f%%, need >= 10%%), HT %.2f (error %.1f%%, need <= 5%%)", gth,
              *e.rr_peaks, 100.0 * under, *e.rr_ht, 100.0 * ht)};
}

struct Trained {
  std::map<std::string, ReliabilityModel> models;
  double seconds = 0.0;
};

Trained train_all() {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<LabeledRecording> recs;
  for (std::uint64_t s = 0; s < 12; ++s) {
    const auto lw = gen_scenario(protocol_script(100 + s, s > 0));
    recs.push_back({lw.wave, lw.labels});
  }
  Trained t;
  t.models["direct"] = ReliabilityModel{};
  for (auto kind : {ModelKind::Svm, ModelKind::Mlp, ModelKind::Rnn}) {
    TrainOptions o;
    o.kind = kind;
    o.seed = 1;
    o.mlp.epochs = 100;
    o.rnn.epochs = 60;
    o.rnn.batch = 8;
    o.rnn.lr0 = 0.01;
    const auto k0 = std::chrono::steady_clock::now();
    auto out = train_model(recs, o);
    std::fprintf(stderr, "trained %s in %.1f s, held-out frame error %.4f\n", to_string(kind), seconds_since(k0),
                 out.report.test.error());
    t.models[to_string(kind)] = std::move(out.model);
  }
  t.seconds = seconds_since(t0);
  return t;
}

// ---- 8 ----
Outcome table_three(const Trained& t, const LabeledWaveform& session) {
  const auto t0 = std::chrono::steady_clock::now();
  std::map<std::string, EvalReport> rep;
  std::string detail;
  for (const auto& [name, m] : t.models) {
    rep[name] = evaluate(run_offline(m, session.wave), session.gth);
    detail += fmt("%s peaks %.4f HT %.4f; ", name.c_str(), rep[name].mean_e_peaks, rep[name].mean_e_ht);
  }
  const auto ht = [&](const char* k) { return rep[k].mean_e_ht; };
  bool pass = true;
  std::string why;
  auto need = [&](bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      why += " failed: " + what + ";";
    }
  };
  need(ht("direct") > ht("svm") && ht("direct") > ht("mlp"), "direct > {svm, mlp} (HT)");
  need(ht("svm") > ht("rnn"), "svm > rnn (HT)");
  need(ht("mlp") > ht("rnn"), "mlp > rnn (HT)");
  for (const auto& [name, r] : rep) need(r.mean_e_ht < r.mean_e_peaks, "HT < peaks for " + name);
  need(ht("rnn") < 0.08, "rnn HT < 8%");
  const double total = t.seconds + seconds_since(t0);
  need(total < 600.0, "runtime < 10 min");
  return {pass, detail + fmt("training+evaluation %.0f s.", total) + why};
}

// ---- 10 ----
Outcome benchmark_ordering(const Trained& t, const LabeledWaveform& session) {
  WaveformRecord minute;
  minute.fs = 10;
  minute.samples.assign(session.wave.samples.begin(), session.wave.samples.begin() + (60 + 2 * 3) * 10);
  std::map<std::string, const ReliabilityModel*> ptrs;
  for (const char* k : {"svm", "mlp", "rnn"}) ptrs[k] = &t.models.at(k);
  const auto rep = benchmark(ptrs, minute, 0.3);
  const double svm = rep.find("svm")->seconds, rnn = rep.find("rnn")->seconds, mlp = rep.find("mlp")->seconds;
  const double share = rep.rr_share("rnn");
  return {svm > rnn && rnn > mlp && share < 0.05,
          fmt("per minute: svm %.2e s > rnn %.2e s > mlp %.2e s; peaks %.2e s, HT %.2e s; RR share of the rnn+RR pipeline %.2f%% "
              "(need < 5%%); with mlp %.2f%%, with svm %.3f%%",
              svm, rnn, mlp, rep.find("peaks")->seconds, rep.find("ht")->seconds, 100.0 * share,
              100.0 * rep.rr_share("mlp"), 100.0 * rep.rr_share("svm"))};
}

// ---- 11 ----
Outcome transport(const Trained& t, const LabeledWaveform& session) {
  WaveformRecord w = session.wave;
  w.samples.resize(10 * 60 * 10 + 123);
  std::ostringstream jsonl;
  write_waveform_jsonl(jsonl, w, 64);
  const auto& rnn = t.models.at("rnn");
  std::istringstream file_in(jsonl.str());
  std::ostringstream file_out;
  run_stream(rnn, istream_lines(file_in), file_out);
  TcpLineServer server(0);
  std::thread client([&] { tcp_send("127.0.0.1", server.port(), jsonl.str()); });
  std::ostringstream tcp_out;
  run_stream(rnn, server.accept_lines(), tcp_out);
  client.join();
  const bool same = !file_out.str().empty() && file_out.str() == tcp_out.str();

  int changed = 0;
  const auto path = std::filesystem::temp_directory_path() / "bedrr_acceptance_model.json";
  for (const auto& [name, m] : t.models) {
    save_model(path.string(), m);
    const auto r = load_model(path.string());
    const auto a = classify_batch(m, w), b = classify_batch(r, w);
    for (std::size_t k = 0; k < a.size(); ++k)
      if (a[k].label != b[k].label || (!std::isnan(a[k].score) && a[k].score != b[k].score)) {
        ++changed;
        break;
      }
  }
  std::filesystem::remove(path);
  return {same && changed == 0, fmt("TCP and file outputs %s (%zu bytes); %d of %zu models change predictions after save/load",
                                    same ? "byte-identical" : "DIFFER", file_out.str().size(), changed, t.models.size())};
}

}  // namespace

int main() {
  std::map<int, std::pair<std::string, Outcome>> results;
  auto run = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
    std::fprintf(stderr, "running %d %s\n", id, name.c_str());
    try {
      results[id] = {name, f()};
    } catch (const std::exception& e) {
      results[id] = {name, {false, std::string("threw: ") + e.what()}};
    }
  };
  run(1, "tone recovery", tone_recovery);
  run(2, "peak counting oracle", peak_counting_oracle);
  run(3, "slope fit", slope_fit);
  run(4, "gradient checks", gradients);
  run(5, "streaming equivalence", streaming);
  run(6, "SMO vs brute-force dual", smo);
  run(7, "PCA oracle", pca);
  const auto session = gen_scenario(session_script(7));
  run(9, "rapid breathing", [&] { return rapid_breathing(session); });
  Trained trained;
  try {
    trained = train_all();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "training failed: %s\n", e.what());
  }
  run(8, "end-to-end classifier comparison", [&] { return table_three(trained, session); });
  run(10, "benchmark ordering", [&] { return benchmark_ordering(trained, session); });
  run(11, "transport and serialization", [&] { return transport(trained, session); });

  int failed = 0;
  for (const auto& [id, r] : results) {
    std::printf("%s %2d %s: %s\n", r.second.pass ? "PASS" : "FAIL", id, r.first.c_str(), r.second.detail.c_str());
    failed += r.second.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(results.size()) - failed, results.size());
  return failed ? 1 : 0;
}
