#pragma once

// Reliability model file: preprocessing parameters plus one classifier
// payload, stored as a single JSON document. Batch and streaming frame
// classification share the per-window scoring code.

#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bedrr/error.hpp"
#include "bedrr/features.hpp"
#include "bedrr/io.hpp"
#include "bedrr/mlp.hpp"
#include "bedrr/rnn.hpp"
#include "bedrr/signal.hpp"
#include "bedrr/svm.hpp"

namespace bedrr {

inline constexpr int kSchemaVersion = 1;

/// direct labels every frame reliable; energy thresholds the mean square of
/// the normalized context window.
enum class ModelKind { Direct, Energy, Svm, Mlp, Rnn };

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Direct: return "direct";
    case ModelKind::Energy: return "energy";
    case ModelKind::Svm: return "svm";
    case ModelKind::Mlp: return "mlp";
    case ModelKind::Rnn: return "rnn";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  for (auto k : {ModelKind::Direct, ModelKind::Energy, ModelKind::Svm, ModelKind::Mlp, ModelKind::Rnn})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown model kind: " + s);
}

struct EnergyThreshold {
  double threshold = 0.0;
};

struct ReliabilityModel {
  ModelKind kind = ModelKind::Direct;
  int schema_version = kSchemaVersion;
  double sigma = kDefaultSigma;
  int L = kDefaultContext;
  int fs = kDefaultFs;
  std::optional<PcaModel> pca;  // svm and mlp only
  std::variant<std::monostate, EnergyThreshold, SvmEnsemble, MlpModel, HybridRnnModel> payload;

  /// Frames of delay between a frame's arrival and its label.
  int latency() const { return kind == ModelKind::Direct ? 0 : L; }

  void check() const {
    if (schema_version != kSchemaVersion) throw ConfigError("unsupported model schema version");
    if (!(sigma > 0.0) || L < 0 || fs <= 0) throw ConfigError("invalid preprocessing parameters");
    const auto window = static_cast<Eigen::Index>((2 * L + 1) * fs);
    switch (kind) {
      case ModelKind::Direct:
        if (!std::holds_alternative<std::monostate>(payload)) throw ConfigError("direct model carries a payload");
        break;
      case ModelKind::Energy:
        if (!std::holds_alternative<EnergyThreshold>(payload)) throw ConfigError("energy model needs a threshold");
        break;
      case ModelKind::Svm:
      case ModelKind::Mlp: {
        if (!pca) throw ConfigError("feature model needs a PCA projection");
        if (pca->input_dim() != window) throw ConfigError("PCA input width does not match (2L+1)*fs");
        if (kind == ModelKind::Svm) {
          const auto* e = std::get_if<SvmEnsemble>(&payload);
          if (!e || e->members.empty()) throw ConfigError("svm model needs ensemble members");
          for (const auto& m : e->members)
            if (m.dim() != pca->output_dim() || m.alphas_signed.size() != m.size())
              throw ConfigError("svm member dimensions do not match the PCA output");
        } else {
          const auto* m = std::get_if<MlpModel>(&payload);
          if (!m || m->layers.empty()) throw ConfigError("mlp model needs layers");
          if (m->input_dim() != pca->output_dim()) throw ConfigError("mlp input width does not match the PCA output");
          for (std::size_t k = 1; k < m->layers.size(); ++k)
            if (m->layers[k].W.cols() != m->layers[k - 1].W.rows()) throw ConfigError("mlp layer shapes do not chain");
          if (m->layers.back().W.rows() != 1) throw ConfigError("mlp output layer must have width 1");
        }
        break;
      }
      case ModelKind::Rnn: {
        const auto* m = std::get_if<HybridRnnModel>(&payload);
        if (!m) throw ConfigError("rnn model needs weights");
        m->check();
        if (m->L != L) throw ConfigError("rnn latency differs from the model file");
        if (m->frame_dim() != fs) throw ConfigError("rnn frame width differs from fs");
        break;
      }
    }
  }
};

// ---- serialization ----

namespace detail {

inline json matrix_json(const Eigen::MatrixXd& M) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Eigen::MatrixXd matrix_from(const json& j, Eigen::Index cols_if_empty = 0) {
  if (!j.is_array()) throw ConfigError("matrix must be an array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : cols_if_empty;
  Eigen::MatrixXd M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) throw ConfigError("ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

inline Eigen::VectorXd vector_from(const json& j) {
  if (!j.is_array()) throw ConfigError("vector must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

inline json lstm_json(const LstmLayer& l) {
  return {{"W", matrix_json(l.W)}, {"U", matrix_json(l.U)}, {"b", vector_json(l.b)}};
}

inline LstmLayer lstm_from(const json& j) {
  LstmLayer l;
  l.W = matrix_from(j.at("W"));
  l.U = matrix_from(j.at("U"));
  l.b = vector_from(j.at("b"));
  if (l.U.rows() != 4 * l.U.cols() || l.W.rows() != l.U.rows() || l.b.size() != l.U.rows())
    throw ConfigError("LSTM layer shapes are inconsistent");
  return l;
}

}  // namespace detail

inline json to_json(const ReliabilityModel& m) {
  json j;
  j["schema_version"] = m.schema_version;
  j["kind"] = to_string(m.kind);
  j["sigma"] = m.sigma;
  j["L"] = m.L;
  j["fs"] = m.fs;
  if (m.pca) {
    j["pca"] = {{"mean", detail::vector_json(m.pca->mean)},
                {"basis", detail::matrix_json(m.pca->basis)},
                {"eigenvalues", detail::vector_json(m.pca->eigenvalues)},
                {"variance_fraction", m.pca->variance_fraction},
                {"total_variance", m.pca->total_variance}};
  }
  json p = json::object();
  switch (m.kind) {
    case ModelKind::Direct: break;
    case ModelKind::Energy: p["threshold"] = std::get<EnergyThreshold>(m.payload).threshold; break;
    case ModelKind::Svm: {
      json members = json::array();
      for (const auto& s : std::get<SvmEnsemble>(m.payload).members)
        members.push_back({{"sv", detail::matrix_json(s.support_vectors)},
                           {"alphas", detail::vector_json(s.alphas_signed)},
                           {"bias", s.bias},
                           {"gamma", s.gamma},
                           {"C", s.C}});
      p["members"] = std::move(members);
      break;
    }
    case ModelKind::Mlp: {
      const auto& mm = std::get<MlpModel>(m.payload);
      p["dropout"] = mm.dropout_rate;
      p["l2"] = mm.l2;
      p["layer_order"] = "input_to_output";
      json layers = json::array();
      for (const auto& l : mm.layers) layers.push_back({{"W", detail::matrix_json(l.W)}, {"b", detail::vector_json(l.b)}});
      p["layers"] = std::move(layers);
      break;
    }
    case ModelKind::Rnn: {
      const auto& r = std::get<HybridRnnModel>(m.payload);
      p["gate_order"] = "ifgo";
      p["L"] = r.L;
      p["fwd1"] = detail::lstm_json(r.fwd1);
      p["fwd2"] = detail::lstm_json(r.fwd2);
      p["bwd"] = detail::lstm_json(r.bwd);
      p["head"] = {{"w", detail::vector_json(r.head_w)}, {"b", r.head_b}};
      break;
    }
  }
  j["payload"] = std::move(p);
  return j;
}

inline ReliabilityModel model_from_json(const json& j) {
  ReliabilityModel m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion)
      throw ConfigError("model schema version " + std::to_string(m.schema_version) + " is not supported");
    m.kind = model_kind_from_string(j.at("kind").get<std::string>());
    m.sigma = j.at("sigma").get<double>();
    m.L = j.at("L").get<int>();
    m.fs = j.at("fs").get<int>();
    if (j.contains("pca")) {
      const auto& q = j["pca"];
      PcaModel pca;
      pca.mean = detail::vector_from(q.at("mean"));
      pca.basis = detail::matrix_from(q.at("basis"), pca.mean.size());
      pca.eigenvalues = detail::vector_from(q.at("eigenvalues"));
      pca.variance_fraction = q.at("variance_fraction").get<double>();
      pca.total_variance = q.at("total_variance").get<double>();
      m.pca = std::move(pca);
    }
    const auto& p = j.at("payload");
    switch (m.kind) {
      case ModelKind::Direct: break;
      case ModelKind::Energy: m.payload = EnergyThreshold{p.at("threshold").get<double>()}; break;
      case ModelKind::Svm: {
        SvmEnsemble e;
        for (const auto& s : p.at("members")) {
          SvmModel sm;
          sm.alphas_signed = detail::vector_from(s.at("alphas"));
          sm.support_vectors = detail::matrix_from(s.at("sv"), m.pca ? m.pca->output_dim() : 0);
          sm.bias = s.at("bias").get<double>();
          sm.gamma = s.at("gamma").get<double>();
          sm.C = s.at("C").get<double>();
          e.members.push_back(std::move(sm));
        }
        m.payload = std::move(e);
        break;
      }
      case ModelKind::Mlp: {
        MlpModel mm;
        mm.dropout_rate = p.at("dropout").get<double>();
        mm.l2 = p.at("l2").get<double>();
        for (const auto& l : p.at("layers")) mm.layers.push_back({detail::matrix_from(l.at("W")), detail::vector_from(l.at("b"))});
        m.payload = std::move(mm);
        break;
      }
      case ModelKind::Rnn: {
        if (p.value("gate_order", std::string("ifgo")) != "ifgo") throw ConfigError("unsupported LSTM gate order");
        HybridRnnModel r;
        r.L = p.at("L").get<int>();
        r.fwd1 = detail::lstm_from(p.at("fwd1"));
        r.fwd2 = detail::lstm_from(p.at("fwd2"));
        r.bwd = detail::lstm_from(p.at("bwd"));
        r.head_w = detail::vector_from(p.at("head").at("w"));
        r.head_b = p.at("head").at("b").get<double>();
        m.payload = std::move(r);
        break;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model file: ") + e.what());
  }
  m.check();
  return m;
}

inline void save_model(const std::string& path, const ReliabilityModel& m) {
  auto out = detail::open_out(path);
  out << to_json(m).dump(1) << '\n';
}

inline ReliabilityModel load_model(const std::string& path) {
  auto in = detail::open_in(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model file is not JSON: ") + e.what());
  }
  return model_from_json(j);
}

// ---- classification ----

/// Mean square of a context window.
inline double window_energy(std::span<const double> window) {
  double s = 0.0;
  for (double v : window) s += v * v;
  return window.empty() ? 0.0 : s / static_cast<double>(window.size());
}

/// Raw score and label for one context window (energy, svm, mlp kinds).
/// Scores: energy -> mean square, svm -> summed decision value, mlp -> probability.
inline std::pair<double, int> score_window(const ReliabilityModel& m, std::span<const double> window) {
  switch (m.kind) {
    case ModelKind::Direct: return {1.0, 1};
    case ModelKind::Energy: {
      const double e = window_energy(window);
      return {e, e <= std::get<EnergyThreshold>(m.payload).threshold ? 1 : 0};
    }
    case ModelKind::Svm: {
      const Eigen::VectorXd x = project(*m.pca, window);
      const double s = ensemble_score(std::get<SvmEnsemble>(m.payload), x);
      return {s, s >= 0.0 ? 1 : 0};
    }
    case ModelKind::Mlp: {
      const Eigen::VectorXd x = project(*m.pca, window);
      const double p = mlp_forward(std::get<MlpModel>(m.payload), x);
      return {p, prob_label(p)};
    }
    case ModelKind::Rnn: break;
  }
  throw ConfigError("rnn models score frame sequences, not windows");
}

struct FrameLabel {
  std::size_t frame = 0;  // 1-based
  int label = 0;
  double score = std::numeric_limits<double>::quiet_NaN();  // NaN where no classifier output exists
};

/// Offline classification of every complete frame. Frames without L frames
/// of context on both sides are labelled 0 (direct labels everything 1).
inline std::vector<FrameLabel> classify_batch(const ReliabilityModel& m, const WaveformRecord& w) {
  m.check();
  if (w.fs != m.fs) throw ConfigError("waveform fs differs from the model's fs");
  const auto frames = frame_signal(w);
  const std::size_t T = frames.size();
  std::vector<FrameLabel> out(T);
  for (std::size_t k = 0; k < T; ++k) out[k].frame = k + 1;
  if (m.kind == ModelKind::Direct) {
    for (auto& f : out) {
      f.label = 1;
      f.score = 1.0;
    }
    return out;
  }
  const auto norm = normalize_frames(frames, m.sigma);
  if (m.kind == ModelKind::Rnn) {
    const auto& r = std::get<HybridRnnModel>(m.payload);
    if (T < static_cast<std::size_t>(2 * m.L + 1)) return out;
    const auto p = rnn_forward_batch(r, norm);
    for (std::size_t k = 0; k < p.size(); ++k) {
      auto& f = out[static_cast<std::size_t>(m.L) + k];
      f.score = p[k];
      f.label = prob_label(p[k]);
    }
    return out;
  }
  for (std::size_t n = 1; n <= T; ++n) {
    if (!has_full_context(n, T, m.L)) continue;
    const auto win = stack_context(norm, n, m.L);
    const auto [s, y] = score_window(m, win.values);
    out[n - 1].score = s;
    out[n - 1].label = y;
  }
  return out;
}

inline std::vector<int> labels_of(const std::vector<FrameLabel>& v) {
  std::vector<int> y;
  y.reserve(v.size());
  for (const auto& f : v) y.push_back(f.label);
  return y;
}

/// Per-stream incremental classifier. Accepts raw frames in order and emits
/// labels in frame order with at most `latency()` frames of delay. The label
/// sequence equals classify_batch on the same frames.
class StreamClassifier {
 public:
  explicit StreamClassifier(const ReliabilityModel& m) : m_(&m) {
    m.check();
    if (m.kind == ModelKind::Rnn) rnn_.emplace(std::get<HybridRnnModel>(m.payload));
  }

  std::size_t frames_seen() const { return seen_; }

  std::vector<FrameLabel> push(const Frame& raw) {
    if (raw.index != seen_ + 1) throw OrderingError("frame " + std::to_string(raw.index) + " arrived out of order");
    if (static_cast<int>(raw.values.size()) != m_->fs) throw DimensionError("frame width differs from fs");
    ++seen_;
    std::vector<FrameLabel> out;
    const auto L = static_cast<std::size_t>(m_->L);
    if (m_->kind == ModelKind::Direct) {
      out.push_back({seen_, 1, 1.0});
      return out;
    }
    const NormalizedFrame nf = normalize_frame(raw, m_->sigma);
    if (seen_ <= L) out.push_back({seen_, 0});

    if (m_->kind == ModelKind::Rnn) {
      const auto p = rnn_->step(nf);
      // Outputs for the first L frames lack left context and are not used.
      if (p && seen_ > 2 * L) out.push_back({seen_ - L, prob_label(*p), *p});
      return out;
    }
    window_.push_back(nf);
    if (window_.size() > 2 * L + 1) window_.pop_front();
    if (window_.size() == 2 * L + 1) {
      std::vector<double> z;
      z.reserve((2 * L + 1) * static_cast<std::size_t>(m_->fs));
      for (const auto& f : window_) z.insert(z.end(), f.values.begin(), f.values.end());
      const auto [s, y] = score_window(*m_, z);
      out.push_back({seen_ - L, y, s});
    }
    return out;
  }

  /// End of stream: the last L frames never get right context and are
  /// labelled 0.
  std::vector<FrameLabel> finish() {
    std::vector<FrameLabel> out;
    if (m_->kind == ModelKind::Direct) return out;
    const auto L = static_cast<std::size_t>(m_->L);
    const std::size_t first = std::max(L, seen_ >= L ? seen_ - L : 0) + 1;
    for (std::size_t n = first; n <= seen_; ++n) out.push_back({n, 0});
    return out;
  }

 private:
  const ReliabilityModel* m_;
  std::optional<RnnStreamState> rnn_;
  std::deque<NormalizedFrame> window_;
  std::size_t seen_ = 0;
};

}  // namespace bedrr
