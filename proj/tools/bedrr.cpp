// bedrr command-line tool.
//
// Exit codes: 0 success, 1 configuration error, 2 data error.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "bedrr.hpp"

namespace {

using bedrr::json;

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;

// Turns the keys of a JSON config file into `--key value` arguments for
// every option not already given on the command line. Arrays repeat the flag.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    else if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw bedrr::ConfigError("cannot open config file: " + path);
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::exception& e) {
    throw bedrr::ConfigError("config file is not valid JSON: " + std::string(e.what()));
  }
  if (!cfg.is_object()) throw bedrr::ConfigError("config file must hold a JSON object");
  std::set<std::string> given;
  for (const auto& a : args)
    if (a.rfind("--", 0) == 0) given.insert(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2));
  auto scalar = [](const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return std::string(v.get<bool>() ? "true" : "false");
    return v.dump();
  };
  for (const auto& [key, value] : cfg.items()) {
    if (given.count(key)) continue;
    if (value.is_array()) {
      for (const auto& v : value) {
        args.push_back("--" + key);
        args.push_back(scalar(v));
      }
    } else if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else {
      args.push_back("--" + key);
      args.push_back(scalar(value));
    }
  }
  return args;
}

std::ofstream open_or_throw(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw bedrr::IoError("cannot open for writing: " + path);
  return out;
}

std::ifstream read_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw bedrr::IoError("cannot open: " + path);
  return in;
}

// Writes to `path`, or stdout for "-" / empty.
template <class F>
void with_output(const std::string& path, F&& f) {
  if (path.empty() || path == "-") {
    f(std::cout);
    std::cout.flush();
  } else {
    auto out = open_or_throw(path);
    f(out);
  }
}

bedrr::ScenarioScript make_script(const std::string& scenario, std::uint64_t seed, double minutes, double rr,
                                  bool shuffled) {
  if (scenario == "rest") return bedrr::rest_script(minutes, rr, seed);
  if (scenario == "protocol") return bedrr::protocol_script(seed, shuffled);
  if (scenario == "session") return bedrr::session_script(seed);
  throw bedrr::ConfigError("unknown scenario: " + scenario);
}

std::vector<int> load_labels(const std::string& path) {
  auto in = read_or_throw(path);
  return bedrr::read_labels(in);
}

struct Options {
  // shared
  std::uint64_t seed = 0;
  std::string config;
  // synth
  std::string scenario = "session";
  double minutes = 5.0;
  double rr = 16.0;
  bool shuffled = false;
  std::string wave_out, labels_out, gth_out;
  std::size_t chunk = 0;
  // train
  std::string kind = "svm";
  std::vector<std::string> data, labels;
  std::size_t synthetic = 0;
  std::string model_out;
  bedrr::TrainOptions train;
  std::size_t epochs = 0;
  double lr = 0.0;
  std::size_t batch = 0;
  // classify / rr / stream / bench
  std::string model;
  std::vector<std::string> models;
  std::string input;
  std::string labels_in;
  std::string out;
  int port = -1;
  bool any_address = false;
  double min_seconds = 0.2;
  // eval
  std::vector<std::string> estimates;
  std::string gth_in;
};

int run(int argc, char** argv) {
  Options o;
  CLI::App app{"Respiratory rate from bed load-sensor waveforms with data-reliability classification"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", o.config, "JSON file whose keys supply defaults for long options");
  app.add_option("--seed", o.seed, "Seed for every random draw");

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic recording");
  synth->add_option("--scenario", o.scenario, "rest | protocol | session")->check(CLI::IsMember({"rest", "protocol", "session"}));
  synth->add_option("--minutes", o.minutes, "Length of the rest scenario");
  synth->add_option("--rr", o.rr, "Breathing rate of the rest scenario (bpm)");
  synth->add_flag("--shuffled", o.shuffled, "Permute the protocol action order");
  synth->add_option("--out", o.wave_out, "Waveform file (.jsonl or .csv)")->required();
  synth->add_option("--labels", o.labels_out, "Per-frame label file");
  synth->add_option("--gth", o.gth_out, "Per-minute ground-truth file");
  synth->add_option("--chunk", o.chunk, "Samples per JSONL record (0 writes one record)");

  auto* train = app.add_subcommand("train", "Train a reliability model");
  train->add_option("--kind", o.kind, "direct | energy | svm | mlp | rnn")
      ->check(CLI::IsMember({"direct", "energy", "svm", "mlp", "rnn"}));
  train->add_option("--data", o.data, "Waveform file; repeat together with --labels");
  train->add_option("--labels", o.labels, "Label file matching each --data");
  train->add_option("--synthetic", o.synthetic, "Train on this many generated protocol recordings instead");
  train->add_option("--out", o.model_out, "Model file")->required();
  train->add_option("--L", o.train.L, "Context radius in frames");
  train->add_option("--sigma", o.train.sigma, "Normalization steepness");
  train->add_option("--fs", o.train.fs, "Sampling rate (Hz)");
  train->add_option("--test-fraction", o.train.test_fraction);
  train->add_option("--pca-fraction", o.train.pca_fraction);
  train->add_option("--pca-components", o.train.pca_components);
  train->add_option("--members", o.train.svm_members, "SVM ensemble size");
  train->add_option("--C", o.train.svm_C);
  train->add_option("--gamma", o.train.svm_gamma);
  train->add_option("--epochs", o.epochs, "Epochs for mlp/rnn");
  train->add_option("--lr", o.lr, "Initial learning rate for mlp/rnn");
  train->add_option("--batch", o.batch, "Mini-batch size for mlp/rnn");
  train->add_option("--rnn-width", o.train.rnn_width);
  train->add_option("--rnn-lane", o.train.rnn_lane_frames, "Lane length for state-carrying RNN training (0: independent chunks)");

  auto* classify = app.add_subcommand("classify", "Label every frame of a waveform");
  classify->add_option("--model", o.model)->required();
  classify->add_option("--input", o.input)->required();
  classify->add_option("--out", o.out, "Label file (stdout by default)");

  auto* rr = app.add_subcommand("rr", "Per-minute RR from a waveform and its labels");
  rr->add_option("--input", o.input)->required();
  rr->add_option("--labels", o.labels_in, "Label file; omitted means every frame is reliable");
  rr->add_option("--model", o.model, "Classify with this model instead of reading labels");
  rr->add_option("--out", o.out, "Estimate file (stdout by default)");

  auto* eval = app.add_subcommand("eval", "Relative RR error against ground truth");
  eval->add_option("--estimates", o.estimates, "Estimate file, optionally name=path; repeatable")->required();
  eval->add_option("--gth", o.gth_in)->required();
  eval->add_option("--out", o.out, "JSON report (stdout table by default)");

  auto* stream = app.add_subcommand("stream", "Streaming classification and RR from a file or TCP");
  stream->add_option("--model", o.model)->required();
  auto* in_opt = stream->add_option("--input", o.input, "JSONL waveform file, - for stdin");
  auto* port_opt = stream->add_option("--port", o.port, "Listen for one TCP client on this port (0 = ephemeral)");
  in_opt->excludes(port_opt);
  stream->add_flag("--any-address", o.any_address, "Bind to all interfaces instead of loopback");
  stream->add_option("--out", o.out, "Estimate file (stdout by default)");
  stream->add_option("--labels-out", o.labels_out, "Also write per-frame labels here");

  auto* bench = app.add_subcommand("bench", "Per-stage cost on one minute of input");
  bench->add_option("--model", o.models, "Model file; repeatable")->required();
  bench->add_option("--input", o.input, "Waveform with at least 60 + 2L frames")->required();
  bench->add_option("--min-seconds", o.min_seconds, "Minimum timing duration per stage");

  std::vector<std::string> args(argv + 1, argv + argc);
  args = expand_config(std::move(args));
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*synth) {
    const auto lw = bedrr::gen_scenario(make_script(o.scenario, o.seed, o.minutes, o.rr, o.shuffled));
    if (o.wave_out.size() > 4 && o.wave_out.substr(o.wave_out.size() - 4) == ".csv") {
      bedrr::write_waveform_file(o.wave_out, lw.wave);
    } else {
      auto out = open_or_throw(o.wave_out);
      bedrr::write_waveform_jsonl(out, lw.wave, o.chunk);
    }
    if (!o.labels_out.empty()) {
      auto out = open_or_throw(o.labels_out);
      bedrr::write_labels(out, lw.labels);
    }
    if (!o.gth_out.empty()) {
      auto out = open_or_throw(o.gth_out);
      bedrr::write_ground_truth(out, lw.gth);
    }
    std::cerr << "frames " << lw.labels.size() << ", minutes " << lw.gth.size() << "\n";
    return 0;
  }

  if (*train) {
    bedrr::TrainOptions t = o.train;
    t.kind = bedrr::model_kind_from_string(o.kind);
    t.seed = o.seed;
    for (auto* c : {&t.mlp, &t.rnn}) {
      if (o.epochs) c->epochs = o.epochs;
      if (o.lr > 0.0) c->lr0 = o.lr;
      if (o.batch) c->batch = o.batch;
    }
    std::vector<bedrr::LabeledRecording> recs;
    if (o.synthetic > 0) {
      if (!o.data.empty()) throw bedrr::ConfigError("--synthetic and --data are exclusive");
      for (std::size_t s = 0; s < o.synthetic; ++s) {
        const auto lw = bedrr::gen_scenario(bedrr::protocol_script(o.seed + s, s > 0), t.fs);
        recs.push_back({lw.wave, lw.labels});
      }
    } else {
      if (o.data.empty()) throw bedrr::ConfigError("train needs --data/--labels pairs or --synthetic");
      if (o.data.size() != o.labels.size()) throw bedrr::ConfigError("every --data needs a matching --labels");
      for (std::size_t i = 0; i < o.data.size(); ++i)
        recs.push_back({bedrr::read_waveform_file(o.data[i], t.fs), load_labels(o.labels[i])});
    }
    const auto outcome = bedrr::train_model(recs, t);
    bedrr::save_model(o.model_out, outcome.model);
    const auto& c = outcome.report.test;
    std::printf("kind %s  held-out error %.4f  precision %.4f  recall %.4f  (test frames %zu)\n", o.kind.c_str(),
                c.error(), c.precision(), c.recall(), c.total());
    return 0;
  }

  if (*classify) {
    const auto m = bedrr::load_model(o.model);
    const auto w = bedrr::read_waveform_file(o.input, m.fs);
    const auto labels = bedrr::labels_of(bedrr::classify_batch(m, w));
    with_output(o.out, [&](std::ostream& out) { bedrr::write_labels(out, labels); });
    return 0;
  }

  if (*rr) {
    if (!o.labels_in.empty() && !o.model.empty()) throw bedrr::ConfigError("--labels and --model are exclusive");
    std::vector<bedrr::RrEstimate> est;
    if (!o.model.empty()) {
      const auto m = bedrr::load_model(o.model);
      est = bedrr::run_offline(m, bedrr::read_waveform_file(o.input, m.fs));
    } else {
      const auto w = bedrr::read_waveform_file(o.input);
      std::vector<int> labels = o.labels_in.empty() ? std::vector<int>(w.frame_count(), 1) : load_labels(o.labels_in);
      if (labels.size() < w.frame_count()) throw bedrr::DimensionError("fewer labels than frames");
      est = bedrr::estimate_rr(labels, w.samples, w.fs);
    }
    with_output(o.out, [&](std::ostream& out) {
      for (const auto& e : est) out << bedrr::estimate_line(e) << '\n';
    });
    return 0;
  }

  if (*eval) {
    std::vector<std::optional<double>> gth;
    {
      auto in = read_or_throw(o.gth_in);
      gth = bedrr::read_ground_truth(in);
    }
    json report = json::object();
    std::ostringstream table;
    table << "estimator        n   mean e peaks   mean e ht\n";
    for (const auto& spec : o.estimates) {
      const auto eq = spec.find('=');
      const std::string name = eq == std::string::npos ? spec : spec.substr(0, eq);
      const std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
      auto in = read_or_throw(path);
      const auto r = bedrr::evaluate(bedrr::read_estimates(in), gth);
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << "\n";
      json rows = json::array();
      for (const auto& row : r.rows) {
        json j = {{"window", row.window}, {"gth", row.gth}};
        j["e_peaks"] = row.e_peaks ? json(*row.e_peaks) : json(nullptr);
        j["e_ht"] = row.e_ht ? json(*row.e_ht) : json(nullptr);
        rows.push_back(j);
      }
      auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
      report[name] = {{"mean_e_peaks", num(r.mean_e_peaks)}, {"mean_e_ht", num(r.mean_e_ht)},
                      {"n_peaks", r.n_peaks}, {"n_ht", r.n_ht}, {"without_estimate", r.without_estimate},
                      {"rows", rows}};
      char line[160];
      std::snprintf(line, sizeof line, "%-14s %3zu   %12.4f   %9.4f\n", name.c_str(), r.rows.size(), r.mean_e_peaks,
                    r.mean_e_ht);
      table << line;
    }
    if (o.out.empty()) std::cout << table.str();
    else with_output(o.out, [&](std::ostream& out) { out << report.dump(1) << '\n'; });
    return 0;
  }

  if (*stream) {
    const auto m = bedrr::load_model(o.model);
    std::unique_ptr<std::ofstream> labels_file;
    if (!o.labels_out.empty()) labels_file = std::make_unique<std::ofstream>(open_or_throw(o.labels_out));
    bedrr::StreamStats stats;
    auto go = [&](bedrr::LineSource src) {
      with_output(o.out, [&](std::ostream& out) { stats = bedrr::run_stream(m, std::move(src), out, {}, labels_file.get()); });
    };
    if (o.port >= 0) {
      bedrr::TcpLineServer server(o.port, o.any_address);
      std::cerr << "listening on port " << server.port() << std::endl;
      go(server.accept_lines());
    } else if (o.input.empty() || o.input == "-") {
      go(bedrr::istream_lines(std::cin));
    } else {
      auto in = read_or_throw(o.input);
      go(bedrr::istream_lines(in));
    }
    std::cerr << "records " << stats.records << ", malformed " << stats.malformed << ", frames " << stats.frames
              << ", minutes " << stats.minutes << "\n";
    return 0;
  }

  if (*bench) {
    std::map<std::string, bedrr::ReliabilityModel> loaded;
    for (const auto& path : o.models) {
      auto m = bedrr::load_model(path);
      loaded[bedrr::to_string(m.kind)] = std::move(m);
    }
    std::map<std::string, const bedrr::ReliabilityModel*> ptrs;
    for (const auto& [name, m] : loaded)
      if (m.kind == bedrr::ModelKind::Svm || m.kind == bedrr::ModelKind::Mlp || m.kind == bedrr::ModelKind::Rnn)
        ptrs[name] = &m;
    const int fs = loaded.empty() ? bedrr::kDefaultFs : loaded.begin()->second.fs;
    const auto rep = bedrr::benchmark(ptrs, bedrr::read_waveform_file(o.input, fs), o.min_seconds);
    std::printf("%-12s %14s %14s %8s\n", "stage", "seconds/min", "ops/min", "repeats");
    for (const auto& s : rep.stages) std::printf("%-12s %14.3e %14.3e %8zu\n", s.name.c_str(), s.seconds, s.ops, s.repeats);
    for (const auto& [name, m] : ptrs) std::printf("rr share with %s: %.4f\n", name.c_str(), rep.rr_share(name));
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const bedrr::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const bedrr::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
}
