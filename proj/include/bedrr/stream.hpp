#pragma once

// Streaming engine: one reader, one classification worker and one RR
// aggregator per stream, connected by ordered queues.

#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "bedrr/io.hpp"
#include "bedrr/model.hpp"
#include "bedrr/rr.hpp"

namespace bedrr {

/// Unbounded FIFO with close(); pop() blocks until an item or close.
template <class T>
class OrderedQueue {
 public:
  void push(T v) {
    {
      std::lock_guard lk(mu_);
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<T> pop() {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_; });
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

/// Blocking line producer; nullopt at end of input.
using LineSource = std::function<std::optional<std::string>()>;

inline LineSource istream_lines(std::istream& in) {
  return [&in]() -> std::optional<std::string> {
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    return line;
  };
}

/// Cuts records into frames regardless of record boundaries.
class Framer {
 public:
  explicit Framer(int fs) : fs_(fs) {}

  std::vector<Frame> push(const std::vector<double>& samples) {
    std::vector<Frame> out;
    const auto fs = static_cast<std::size_t>(fs_);
    for (double v : samples) {
      buf_.push_back(v);
      if (buf_.size() == fs) {
        out.push_back({++count_, std::move(buf_)});
        buf_.clear();
        buf_.reserve(fs);
      }
    }
    return out;
  }

 private:
  int fs_;
  std::size_t count_ = 0;
  std::vector<double> buf_;
};

/// Collects labelled frames and emits one estimate per 60 frames; a partial
/// final minute is emitted by finish().
class MinuteAggregator {
 public:
  MinuteAggregator(int fs, SegmentPolicy policy = {}) : fs_(fs), policy_(policy) {}

  std::optional<RrEstimate> push(const Frame& f, int label) {
    labels_.push_back(label);
    samples_.insert(samples_.end(), f.values.begin(), f.values.end());
    if (labels_.size() < 60) return std::nullopt;
    return flush();
  }

  std::optional<RrEstimate> finish() {
    if (labels_.empty()) return std::nullopt;
    return flush();
  }

 private:
  RrEstimate flush() {
    auto e = minute_rr(labels_, samples_, fs_, minute_, offset_, policy_);
    offset_ += samples_.size();
    ++minute_;
    labels_.clear();
    samples_.clear();
    return e;
  }

  int fs_;
  SegmentPolicy policy_;
  std::size_t minute_ = 0, offset_ = 0;
  std::vector<int> labels_;
  std::vector<double> samples_;
};

struct StreamStats {
  std::size_t records = 0;
  std::size_t malformed = 0;
  std::size_t frames = 0;
  std::size_t minutes = 0;
};

struct LabeledFrame {
  Frame frame;
  int label = 0;
};

/// Runs reader, classifier and aggregator threads over one line source and
/// writes RrEstimate JSONL to `out` in minute order. Malformed lines and
/// records whose fs differs from the model are counted and skipped. If
/// `labels_out` is set, per-frame labels are also written there.
inline StreamStats run_stream(const ReliabilityModel& model, LineSource source, std::ostream& out,
                              const SegmentPolicy& policy = {}, std::ostream* labels_out = nullptr) {
  model.check();
  StreamStats stats;
  OrderedQueue<Frame> frames;
  OrderedQueue<LabeledFrame> labelled;
  std::exception_ptr reader_err, worker_err;

  std::thread reader([&] {
    try {
      Framer framer(model.fs);
      while (auto line = source()) {
        if (detail::trim(*line).empty()) continue;
        WaveformRecord r;
        try {
          r = parse_waveform_line(*line);
        } catch (const ParseError&) {
          ++stats.malformed;
          continue;
        }
        if (r.fs != model.fs) {
          ++stats.malformed;
          continue;
        }
        ++stats.records;
        for (auto& f : framer.push(r.samples)) frames.push(std::move(f));
      }
    } catch (...) {
      reader_err = std::current_exception();
    }
    frames.close();
  });

  std::thread worker([&] {
    try {
      StreamClassifier clf(model);
      std::deque<Frame> waiting;
      auto deliver = [&](const std::vector<FrameLabel>& ls) {
        for (const auto& l : ls) {
          if (waiting.empty() || waiting.front().index != l.frame) throw OrderingError("label emitted out of order");
          labelled.push({std::move(waiting.front()), l.label});
          waiting.pop_front();
        }
      };
      while (auto f = frames.pop()) {
        waiting.push_back(*f);
        deliver(clf.push(*f));
      }
      deliver(clf.finish());
    } catch (...) {
      worker_err = std::current_exception();
      // Drain so the reader never blocks on a full pipeline.
      while (frames.pop()) {
      }
    }
    labelled.close();
  });

  MinuteAggregator agg(model.fs, policy);
  while (auto lf = labelled.pop()) {
    ++stats.frames;
    if (labels_out) *labels_out << "{\"frame\":" << lf->frame.index << ",\"y\":" << lf->label << "}\n";
    if (auto e = agg.push(lf->frame, lf->label)) {
      out << estimate_line(*e) << '\n' << std::flush;
      ++stats.minutes;
    }
  }
  reader.join();
  worker.join();
  if (reader_err) std::rethrow_exception(reader_err);
  if (worker_err) std::rethrow_exception(worker_err);
  if (auto e = agg.finish()) {
    out << estimate_line(*e) << '\n';
    ++stats.minutes;
  }
  return stats;
}

/// Offline equivalent: batch classification followed by per-minute RR.
inline std::vector<RrEstimate> run_offline(const ReliabilityModel& model, const WaveformRecord& w,
                                           const SegmentPolicy& policy = {}) {
  const auto labels = labels_of(classify_batch(model, w));
  return estimate_rr(labels, w.samples, w.fs, policy);
}

}  // namespace bedrr
