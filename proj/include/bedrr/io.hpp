#pragma once

// Text formats: waveform CSV/JSONL, per-frame labels, ground truth and
// per-minute RR estimates.

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bedrr/error.hpp"
#include "bedrr/rr.hpp"
#include "bedrr/signal.hpp"

namespace bedrr {

using json = nlohmann::json;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  // JSON readers take "-0" as the integer 0, so keep the sign with a fraction.
  if (v == 0.0 && std::signbit(v)) return "-0.0";
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline double parse_double(const std::string& s) {
  double v = 0.0;
  const auto t = trim(s);
  const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) throw ParseError("not a number: '" + t + "'");
  return v;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return in;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace detail

/// One JSONL waveform record: {"fs":10,"samples":[...]} with optional
/// "start_time". Throws ParseError on anything else.
inline WaveformRecord parse_waveform_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("fs") || !j.contains("samples")) throw ParseError("waveform record needs fs and samples");
  const auto& fs = j.at("fs");
  const auto& s = j.at("samples");
  if (!fs.is_number_integer() || fs.get<long long>() <= 0) throw ParseError("fs must be a positive integer");
  if (!s.is_array()) throw ParseError("samples must be an array");
  WaveformRecord w;
  w.fs = fs.get<int>();
  w.samples.reserve(s.size());
  for (const auto& v : s) {
    if (!v.is_number()) throw ParseError("samples must be numbers");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ParseError("non-finite sample");
    w.samples.push_back(d);
  }
  if (j.contains("start_time")) {
    if (!j["start_time"].is_number()) throw ParseError("start_time must be a number");
    w.start_time = j["start_time"].get<double>();
  }
  return w;
}

inline std::string waveform_line(const WaveformRecord& w) {
  std::string out = "{\"fs\":" + std::to_string(w.fs);
  if (w.start_time != 0.0) out += ",\"start_time\":" + detail::format_double(w.start_time);
  out += ",\"samples\":[";
  for (std::size_t k = 0; k < w.samples.size(); ++k) {
    if (k) out += ',';
    out += detail::format_double(w.samples[k]);
  }
  out += "]}";
  return out;
}

/// Reads every record of a JSONL stream and concatenates them. All records
/// must share one fs. Blank lines are ignored.
inline WaveformRecord read_waveform_jsonl(std::istream& in) {
  WaveformRecord all;
  bool first = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    WaveformRecord r;
    try {
      r = parse_waveform_line(line);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
    if (first) {
      all.fs = r.fs;
      all.start_time = r.start_time;
      first = false;
    } else if (r.fs != all.fs) {
      throw ParseError("line " + std::to_string(lineno) + ": fs changes within a stream");
    }
    all.samples.insert(all.samples.end(), r.samples.begin(), r.samples.end());
  }
  if (first) throw ParseError("no waveform records");
  return all;
}

/// Writes the waveform as JSONL, one record per `chunk` samples (0 = one record).
inline void write_waveform_jsonl(std::ostream& out, const WaveformRecord& w, std::size_t chunk = 0) {
  if (chunk == 0 || w.samples.size() <= chunk) {
    out << waveform_line(w) << '\n';
    return;
  }
  for (std::size_t s = 0; s < w.samples.size(); s += chunk) {
    WaveformRecord r;
    r.fs = w.fs;
    r.start_time = s == 0 ? w.start_time : 0.0;
    r.samples.assign(w.samples.begin() + static_cast<std::ptrdiff_t>(s),
                     w.samples.begin() + static_cast<std::ptrdiff_t>(std::min(w.samples.size(), s + chunk)));
    out << waveform_line(r) << '\n';
  }
}

/// CSV with header `t,value`. The sampling rate is taken from the first two
/// time stamps when present, otherwise `fs_hint`.
inline WaveformRecord read_waveform_csv(std::istream& in, int fs_hint = kDefaultFs) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != "t,value") throw ParseError("CSV header must be 't,value'");
  std::vector<double> t;
  WaveformRecord w;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError("line " + std::to_string(lineno) + ": expected two columns");
    try {
      t.push_back(detail::parse_double(line.substr(0, comma)));
      const double v = detail::parse_double(line.substr(comma + 1));
      if (!std::isfinite(v)) throw ParseError("non-finite sample");
      w.samples.push_back(v);
    } catch (const ParseError& e) {
      throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (w.samples.empty()) throw ParseError("CSV has no samples");
  w.start_time = t.front();
  w.fs = fs_hint;
  if (t.size() >= 2) {
    const double dt = t[1] - t[0];
    if (!(dt > 0.0)) throw ParseError("CSV time stamps must increase");
    w.fs = static_cast<int>(std::lround(1.0 / dt));
    if (w.fs <= 0) throw ParseError("CSV sampling interval too long");
  }
  return w;
}

inline void write_waveform_csv(std::ostream& out, const WaveformRecord& w) {
  out << "t,value\n";
  for (std::size_t k = 0; k < w.samples.size(); ++k)
    out << detail::format_double(w.start_time + static_cast<double>(k) / w.fs) << ','
        << detail::format_double(w.samples[k]) << '\n';
}

/// Picks the reader by extension: .csv or anything else as JSONL.
inline WaveformRecord read_waveform_file(const std::string& path, int fs_hint = kDefaultFs) {
  auto in = detail::open_in(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv") return read_waveform_csv(in, fs_hint);
  return read_waveform_jsonl(in);
}

inline void write_waveform_file(const std::string& path, const WaveformRecord& w) {
  auto out = detail::open_out(path);
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    write_waveform_csv(out, w);
  else
    write_waveform_jsonl(out, w);
}

// ---- labels: {"frame":n,"y":0|1}, n 1-based ----

inline void write_labels(std::ostream& out, const std::vector<int>& labels) {
  for (std::size_t k = 0; k < labels.size(); ++k)
    out << "{\"frame\":" << k + 1 << ",\"y\":" << labels[k] << "}\n";
}

inline std::vector<int> read_labels(std::istream& in) {
  std::vector<int> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed label line: ") + e.what());
    }
    if (!j.contains("frame") || !j.contains("y")) throw ParseError("label record needs frame and y");
    const auto n = j["frame"].get<long long>();
    const int y = j["y"].get<int>();
    if (y != 0 && y != 1) throw ParseError("label must be 0 or 1");
    if (n != static_cast<long long>(labels.size()) + 1) throw OrderingError("label frames must be consecutive from 1");
    labels.push_back(y);
  }
  return labels;
}

// ---- ground truth: {"window":k,"rr":v}, k = 0-based minute ----

inline void write_ground_truth(std::ostream& out, const std::vector<std::optional<double>>& gth) {
  for (std::size_t k = 0; k < gth.size(); ++k)
    if (gth[k]) out << "{\"window\":" << k << ",\"rr\":" << detail::format_double(*gth[k]) << "}\n";
}

inline std::vector<std::optional<double>> read_ground_truth(std::istream& in) {
  std::vector<std::optional<double>> gth;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed ground-truth line: ") + e.what());
    }
    if (!j.contains("window") || !j.contains("rr")) throw ParseError("ground-truth record needs window and rr");
    const auto k = j["window"].get<long long>();
    if (k < 0) throw ParseError("window must be non-negative");
    const auto uk = static_cast<std::size_t>(k);
    if (gth.size() <= uk) gth.resize(uk + 1);
    gth[uk] = j["rr"].get<double>();
  }
  return gth;
}

// ---- RR estimates ----

inline std::string estimate_line(const RrEstimate& e) {
  std::string out = "{\"minute\":" + std::to_string(e.minute) + ",\"rr_peaks\":";
  out += e.rr_peaks ? detail::format_double(*e.rr_peaks) : "null";
  out += ",\"rr_ht\":";
  out += e.rr_ht ? detail::format_double(*e.rr_ht) : "null";
  out += ",\"reliable_s\":" + detail::format_double(e.reliable_seconds) + ",\"segments\":" + std::to_string(e.segments) + "}";
  return out;
}

inline RrEstimate parse_estimate_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed estimate line: ") + e.what());
  }
  RrEstimate e;
  e.minute = j.at("minute").get<std::size_t>();
  if (!j.at("rr_peaks").is_null()) e.rr_peaks = j["rr_peaks"].get<double>();
  if (!j.at("rr_ht").is_null()) e.rr_ht = j["rr_ht"].get<double>();
  e.reliable_seconds = j.at("reliable_s").get<double>();
  e.segments = j.at("segments").get<std::size_t>();
  return e;
}

inline std::vector<RrEstimate> read_estimates(std::istream& in) {
  std::vector<RrEstimate> out;
  std::string line;
  while (std::getline(in, line))
    if (!detail::trim(line).empty()) out.push_back(parse_estimate_line(line));
  return out;
}

}  // namespace bedrr
