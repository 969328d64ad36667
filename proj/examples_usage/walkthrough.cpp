// End-to-end use of the library: generate labelled recordings, train a small
// MLP reliability model, then stream a fresh recording through the
// classifier and per-minute RR estimation.

#include <cstdio>
#include <iostream>
#include <sstream>

#include "bedrr.hpp"

int main() {
  std::vector<bedrr::LabeledRecording> train;
  for (std::uint64_t s = 0; s < 2; ++s) {
    const auto lw = bedrr::gen_scenario(bedrr::protocol_script(s, s > 0));
    train.push_back({lw.wave, lw.labels});
  }

  bedrr::TrainOptions opts;
  opts.kind = bedrr::ModelKind::Mlp;
  opts.mlp.epochs = 15;
  opts.seed = 1;
  const auto outcome = bedrr::train_model(train, opts);
  std::printf("held-out error %.3f, precision %.3f, recall %.3f\n", outcome.report.test.error(),
              outcome.report.test.precision(), outcome.report.test.recall());

  // A six-minute rest recording at 15 bpm with a few movement bursts,
  // serialized as JSONL and streamed back in 50-sample records.
  const auto rec = bedrr::gen_scenario(bedrr::rest_script(6.0, 15.0, 42));
  std::stringstream wire;
  bedrr::write_waveform_jsonl(wire, rec.wave, 50);

  std::ostringstream estimates;
  const auto stats = bedrr::run_stream(outcome.model, bedrr::istream_lines(wire), estimates);
  std::printf("records %zu, frames %zu, minutes %zu\n", stats.records, stats.frames, stats.minutes);
  std::cout << estimates.str();

  std::istringstream back(estimates.str());
  const auto report = bedrr::evaluate(bedrr::read_estimates(back), rec.gth);
  std::printf("mean relative error: peaks %.4f, HT %.4f\n", report.mean_e_peaks, report.mean_e_ht);
  return 0;
}
