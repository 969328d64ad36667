#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>
#include <thread>
#include <unistd.h>

#include "bedrr.hpp"
#include "fixtures.hpp"

using namespace bedrr;

namespace {

std::string stream_text(const ReliabilityModel& m, const std::string& jsonl, StreamStats* stats = nullptr) {
  std::istringstream in(jsonl);
  std::ostringstream out;
  const auto s = run_stream(m, istream_lines(in), out);
  if (stats) *stats = s;
  return out.str();
}

std::string jsonl_of(const WaveformRecord& w, std::size_t chunk) {
  std::ostringstream ss;
  write_waveform_jsonl(ss, w, chunk);
  return ss.str();
}

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() / ("bedrr_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

int run_cli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string cmd = std::string(BEDRR_CLI_PATH) + " " + args + " >" + log + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Confusion, PrecisionRecallDefinitions) {
  Confusion c;
  c.tp = 8;
  c.fp = 2;
  c.fn = 2;
  c.tn = 88;
  EXPECT_DOUBLE_EQ(c.precision(), 0.8);
  EXPECT_DOUBLE_EQ(c.recall(), 0.8);
  EXPECT_DOUBLE_EQ(c.error(), 0.04);
  Confusion d;
  d.add(1, 1);
  d.add(0, 1);
  d.add(1, 0);
  d.add(0, 0);
  EXPECT_EQ(d.tp + d.fp + d.fn + d.tn, 4u);
  EXPECT_EQ(d.tp, 1u);
}

TEST(Classify, StreamEqualsBatchForEveryKind) {
  auto rec = gen_scenario(protocol_script(21, true));
  rec.wave.samples.resize(1800 + 7);  // partial trailing frame is ignored
  for (auto kind : {ModelKind::Direct, ModelKind::Energy, ModelKind::Svm, ModelKind::Mlp, ModelKind::Rnn}) {
    const auto m = fixture::random_model(kind, 3, 20, 50);
    const auto batch = classify_batch(m, rec.wave);
    StreamClassifier clf(m);
    std::vector<FrameLabel> streamed;
    for (const auto& f : frame_signal(rec.wave)) {
      const auto out = clf.push(f);
      EXPECT_LE(f.index - (out.empty() ? f.index : out.back().frame), static_cast<std::size_t>(m.latency()));
      streamed.insert(streamed.end(), out.begin(), out.end());
    }
    const auto tail = clf.finish();
    streamed.insert(streamed.end(), tail.begin(), tail.end());
    ASSERT_EQ(streamed.size(), batch.size()) << to_string(kind);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      EXPECT_EQ(streamed[k].frame, k + 1);
      EXPECT_EQ(streamed[k].label, batch[k].label) << to_string(kind) << " frame " << k + 1;
      if (!std::isnan(batch[k].score)) {
        EXPECT_NEAR(streamed[k].score, batch[k].score, 1e-9);
      }
    }
  }
}

TEST(Classify, OutOfOrderAndWrongRate) {
  const auto m = fixture::random_model(ModelKind::Mlp, 4, 10, 10);
  StreamClassifier clf(m);
  Frame f{2, std::vector<double>(10, 0.0)};
  EXPECT_THROW(clf.push(f), OrderingError);
  WaveformRecord w;
  w.fs = 20;
  w.samples.assign(400, 0.0);
  EXPECT_THROW(classify_batch(m, w), ConfigError);
}

TEST(Classify, EnergyBaselineMatchesSynthLabels) {
  ScenarioScript s;
  s.seed = 2;
  s.actions = {detail::breathing_action(ActionKind::Still, 90.0, 15.0),
               detail::movement_action(ActionKind::RandomMove, 30.0),
               detail::breathing_action(ActionKind::Still, 60.0, 15.0)};
  const auto lw = gen_scenario(s);
  ReliabilityModel m;
  m.kind = ModelKind::Energy;
  m.payload = EnergyThreshold{0.05};
  const auto y = labels_of(classify_batch(m, lw.wave));
  const std::size_t L = 3, T = y.size();
  for (std::size_t k = L; k + L < T; ++k) {
    const bool near_edge = (k + L >= 90 && k < 90 + L) || (k + L >= 120 && k < 120 + L);
    if (!near_edge) {
      EXPECT_EQ(y[k], lw.labels[k]) << "frame " << k + 1;
    }
  }
}

TEST(Stream, MatchesOfflineAndIsChunkIndependent) {
  const auto rec = gen_scenario(rest_script(3.5, 15.0, 8));
  const auto m = fixture::random_model(ModelKind::Energy, 0);
  std::ostringstream offline;
  for (const auto& e : run_offline(m, rec.wave)) offline << estimate_line(e) << '\n';
  for (std::size_t chunk : {1u, 7u, 50u, 600u, 0u}) {
    StreamStats st;
    EXPECT_EQ(stream_text(m, jsonl_of(rec.wave, chunk), &st), offline.str()) << "chunk " << chunk;
    EXPECT_EQ(st.frames, 210u);
    EXPECT_EQ(st.minutes, 4u);
  }
}

TEST(Stream, RnnStreamMatchesOffline) {
  const auto rec = gen_scenario(protocol_script(5));
  WaveformRecord w = rec.wave;
  w.samples.resize(6000);
  const auto m = fixture::random_model(ModelKind::Rnn, 5);
  std::ostringstream offline;
  for (const auto& e : run_offline(m, w)) offline << estimate_line(e) << '\n';
  EXPECT_EQ(stream_text(m, jsonl_of(w, 50)), offline.str());
}

TEST(Stream, MalformedLinesAreCountedAndSkipped) {
  const auto rec = gen_scenario(rest_script(2.0, 15.0, 1));
  const auto m = fixture::random_model(ModelKind::Direct, 0);
  const auto clean = jsonl_of(rec.wave, 100);
  std::string dirty;
  std::istringstream in(clean);
  std::string line;
  int k = 0;
  while (std::getline(in, line)) {
    dirty += line + "\n";
    if (++k == 3) dirty += "{\"fs\":10,\"samples\":[oops]}\n\n{\"fs\":20,\"samples\":[1,2]}\n";
  }
  StreamStats st;
  EXPECT_EQ(stream_text(m, dirty, &st), stream_text(m, clean));
  EXPECT_EQ(st.malformed, 2u);
  EXPECT_EQ(st.records, 12u);
}

TEST(Stream, TcpMatchesFileIngestion) {
  const auto rec = gen_scenario(rest_script(2.5, 17.0, 4));
  const auto m = fixture::random_model(ModelKind::Mlp, 6, 20, 10);
  const auto payload = jsonl_of(rec.wave, 37);
  TcpLineServer server(0);
  std::thread client([&] { tcp_send("127.0.0.1", server.port(), payload); });
  std::ostringstream out;
  const auto st = run_stream(m, server.accept_lines(), out);
  client.join();
  EXPECT_EQ(out.str(), stream_text(m, payload));
  EXPECT_EQ(st.frames, 150u);
}

TEST(Stream, DisconnectMidMinuteFlushesPartialMinute) {
  const auto rec = gen_scenario(rest_script(1.0, 15.0, 4));
  WaveformRecord w = rec.wave;
  w.samples.resize(600 + 50);  // 5 s of the second minute
  const auto m = fixture::random_model(ModelKind::Direct, 0);
  TcpLineServer server(0);
  std::thread client([&] { tcp_send("127.0.0.1", server.port(), jsonl_of(w, 100)); });
  std::ostringstream out;
  run_stream(m, server.accept_lines(), out);
  client.join();
  std::istringstream back(out.str());
  const auto est = read_estimates(back);
  ASSERT_EQ(est.size(), 2u);
  EXPECT_TRUE(est[0].rr_ht);
  EXPECT_FALSE(est[1].rr_ht);  // 5 s fails the policy
  EXPECT_EQ(est[1].reliable_seconds, 5.0);
}

TEST(Stream, BindFailureIsIoError) {
  TcpLineServer first(0);
  EXPECT_THROW(TcpLineServer second(first.port()), IoError);
}

TEST(Evaluate, MatchesArithmeticOnEveryWindow) {
  const auto rec = gen_scenario(session_script(3));
  const auto m = fixture::random_model(ModelKind::Direct, 0);
  const auto est = run_offline(m, rec.wave);
  const auto rep = evaluate(est, rec.gth);
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : est) {
    if (!rec.gth[e.minute] || !e.rr_ht) continue;
    sum += std::abs(*e.rr_ht - *rec.gth[e.minute]) / *rec.gth[e.minute];
    ++n;
  }
  EXPECT_EQ(rep.n_ht, n);
  EXPECT_NEAR(rep.mean_e_ht, sum / static_cast<double>(n), 1e-15);
}

TEST(Train, DeterministicGivenSeed) {
  std::vector<LabeledRecording> recs;
  const auto lw = gen_scenario(protocol_script(2));
  recs.push_back({lw.wave, lw.labels});
  TrainOptions o;
  o.kind = ModelKind::Mlp;
  o.mlp.epochs = 2;
  o.mlp_hidden = {16, 16};
  o.seed = 5;
  const auto a = train_model(recs, o), b = train_model(recs, o);
  EXPECT_EQ(to_json(a.model).dump(), to_json(b.model).dump());
  EXPECT_GT(a.report.test.total(), 0u);
  o.kind = ModelKind::Energy;
  const auto e = train_model(recs, o);
  EXPECT_LT(e.report.test.error(), 0.2);
}

TEST(Bench, ClassifierOrderingAndRrCost) {
  const auto rec = gen_scenario(rest_script(2.0, 15.0, 2));
  const auto svm = fixture::random_model(ModelKind::Svm, 1);
  const auto mlp = fixture::random_model(ModelKind::Mlp, 2);
  const auto rnn = fixture::random_model(ModelKind::Rnn, 3);
  const auto rep = benchmark({{"svm", &svm}, {"mlp", &mlp}, {"rnn", &rnn}}, rec.wave, 0.1);
  for (const char* s : {"preprocess", "svm", "mlp", "rnn", "peaks", "ht"}) {
    ASSERT_NE(rep.find(s), nullptr) << s;
    EXPECT_GT(rep.find(s)->seconds, 0.0);
    EXPECT_GT(rep.find(s)->ops, 0.0);
  }
  EXPECT_GT(rep.find("svm")->seconds, rep.find("rnn")->seconds);
  EXPECT_GT(rep.find("rnn")->seconds, rep.find("mlp")->seconds);
  EXPECT_LT(rep.find("peaks")->seconds + rep.find("ht")->seconds, rep.find("mlp")->seconds);
  EXPECT_DOUBLE_EQ(rep.find("mlp")->ops, 60.0 * (46.0 * 100 + 2 * 100.0 * 100 + 100));
}

TEST(Cli, ExitCodesAndOutputs) {
  TempDir dir;
  const auto wave = dir / "rest.jsonl", labels = dir / "rest.labels.jsonl", gth = dir / "rest.gth.jsonl";
  ASSERT_EQ(run_cli("synth --scenario rest --minutes 2 --rr 15 --seed 3 --out " + wave + " --labels " + labels +
                    " --gth " + gth),
            0);
  ASSERT_EQ(run_cli("rr --input " + wave + " --labels " + labels + " --out " + (dir / "est.jsonl")), 0);
  ASSERT_EQ(run_cli("eval --estimates direct=" + (dir / "est.jsonl") + " --gth " + gth + " --out " + (dir / "rep.json")), 0);
  EXPECT_NE(slurp(dir / "rep.json").find("mean_e_ht"), std::string::npos);

  ASSERT_EQ(run_cli("train --kind energy --synthetic 1 --seed 1 --out " + (dir / "energy.json"), dir / "train.log"), 0);
  const auto log = slurp(dir / "train.log");
  for (const char* word : {"error", "precision", "recall"}) EXPECT_NE(log.find(word), std::string::npos) << log;
  EXPECT_EQ(run_cli("classify --model " + (dir / "energy.json") + " --input " + wave + " --out " + (dir / "y.jsonl")), 0);
  EXPECT_EQ(run_cli("stream --model " + (dir / "energy.json") + " --input " + wave + " --out " + (dir / "s.jsonl")), 0);
  EXPECT_EQ(run_cli("bench --model " + (dir / "energy.json") + " --input " + wave + " --min-seconds 0.01"), 0);

  // Configuration errors.
  EXPECT_EQ(run_cli("train --kind forest --synthetic 1"), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("synth --scenario rest --rr 99 --out " + (dir / "x.jsonl")), 1);
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << "{ not json";
  }
  EXPECT_EQ(run_cli("--config " + (dir / "bad.json") + " synth --out " + (dir / "y.jsonl")), 1);

  // Data errors.
  {
    std::ofstream bad(dir / "bad.jsonl");
    bad << "{\"fs\":10,\"samples\":[1,2,\n";
  }
  EXPECT_EQ(run_cli("rr --input " + (dir / "bad.jsonl")), 2);
  EXPECT_EQ(run_cli("rr --input " + (dir / "missing.jsonl")), 2);
}
