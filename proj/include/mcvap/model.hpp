// mcvap/model.hpp

// Copyright 2026  The mcvap Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// The two-speaker projection predictor.
//
//   features_a -> frontend -> channel transformer (a) --+--> cross (a <- b) --+
//   features_b -> frontend -> channel transformer (b) --+--> cross (b <- a) --+
//                                                                  sum -> LN -> VAP head (256)
//   each cross output -> its own row of the VAD head (one logit per speaker)
//
// All attention is causal with ALiBi distance bias, so frame t only ever
// sees frames <= t.

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mcvap/autograd.hpp"
#include "mcvap/codebook.hpp"
#include "mcvap/features.hpp"

namespace mcvap {

struct ModelConfig {
  int feature_bands = kDefaultMelBands;
  int model_dim = 32;
  int channel_layers = 1;
  int cross_layers = 1;
  int heads = 2;
  int ffn_mult = 2;
  int context_frames = 50;
  std::uint64_t seed = 1;
  /// Share one set of channel/cross weights between the two speakers.
  bool tie_channels = false;

  void Validate() const {
    if (feature_bands <= 0 || model_dim <= 0 || heads <= 0 || ffn_mult <= 0)
      throw Error("ModelConfig: dimensions must be positive");
    if (model_dim % heads != 0) throw Error("ModelConfig: model_dim must be divisible by heads");
    if (channel_layers < 0 || cross_layers < 0) throw Error("ModelConfig: negative depth");
    if (context_frames != 50) throw Error("ModelConfig: context must be 50 frames (5 s at 10 Hz)");
  }

  nlohmann::json ToJson() const {
    return {{"feature_bands", feature_bands}, {"model_dim", model_dim},
            {"channel_layers", channel_layers}, {"cross_layers", cross_layers},
            {"heads", heads}, {"ffn_mult", ffn_mult}, {"context_frames", context_frames},
            {"seed", seed}, {"tie_channels", tie_channels}};
  }
  static ModelConfig FromJson(const nlohmann::json& j) {
    ModelConfig c;
    c.feature_bands = j.value("feature_bands", c.feature_bands);
    c.model_dim = j.value("model_dim", c.model_dim);
    c.channel_layers = j.value("channel_layers", c.channel_layers);
    c.cross_layers = j.value("cross_layers", c.cross_layers);
    c.heads = j.value("heads", c.heads);
    c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
    c.context_frames = j.value("context_frames", c.context_frames);
    c.seed = j.value("seed", c.seed);
    c.tie_channels = j.value("tie_channels", c.tie_channels);
    return c;
  }
};

/// Fixed affine map applied to log-mel features before the learned
/// projection; brings the floor (log 1e-10 = -23) and speech levels into a
/// range of a few units.
inline constexpr double kFeatureOffset = -12.0;
inline constexpr double kFeatureScale = 6.0;

/// Named learnable tensors, iterated in name order.
class Parameters {
 public:
  using Map = std::map<std::string, Eigen::MatrixXd>;

  Parameters() = default;
  explicit Parameters(ModelConfig cfg) : cfg_(cfg) {}

  const ModelConfig& config() const { return cfg_; }
  Map& tensors() { return tensors_; }
  const Map& tensors() const { return tensors_; }

  Eigen::MatrixXd& at(const std::string& name) {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("Parameters: no tensor '" + name + "'");
    return it->second;
  }
  const Eigen::MatrixXd& at(const std::string& name) const {
    auto it = tensors_.find(name);
    if (it == tensors_.end()) throw Error("Parameters: no tensor '" + name + "'");
    return it->second;
  }
  bool contains(const std::string& name) const { return tensors_.count(name) > 0; }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : tensors_) n += static_cast<std::size_t>(v.size());
    return n;
  }
  bool finite() const {
    for (const auto& [k, v] : tensors_)
      if (!v.allFinite()) return false;
    return true;
  }

  bool operator==(const Parameters& o) const {
    if (tensors_.size() != o.tensors_.size()) return false;
    for (const auto& [k, v] : tensors_) {
      auto it = o.tensors_.find(k);
      if (it == o.tensors_.end() || it->second.rows() != v.rows() ||
          it->second.cols() != v.cols() || it->second != v)
        return false;
    }
    return true;
  }

  /// Zeroes the VAP and VAD heads.
  void ZeroHeads() {
    for (const char* n : {"vap.w", "vap.b", "vad.w", "vad.b"}) at(n).setZero();
  }

 private:
  ModelConfig cfg_;
  Map tensors_;
};

namespace model_detail {

inline std::string StreamName(const ModelConfig& cfg, int stream) {
  return (stream == 0 || cfg.tie_channels) ? "a" : "b";
}

inline void AddBlockParams(Parameters::Map& m, const std::string& prefix, const ModelConfig& c,
                           bool cross, std::mt19937_64& rng) {
  const int d = c.model_dim, f = c.model_dim * c.ffn_mult;
  auto randn = [&](int rows, int cols, double std) {
    std::normal_distribution<double> g(0.0, std);
    Eigen::MatrixXd w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
    return w;
  };
  auto ones = [](int n) { return Eigen::MatrixXd::Ones(1, n).eval(); };
  auto zeros = [](int r, int n) { return Eigen::MatrixXd::Zero(r, n).eval(); };
  const double s = 1.0 / std::sqrt(static_cast<double>(d));
  m[prefix + ".ln1.g"] = ones(d);
  m[prefix + ".ln1.b"] = zeros(1, d);
  if (cross) {
    m[prefix + ".lnkv.g"] = ones(d);
    m[prefix + ".lnkv.b"] = zeros(1, d);
  }
  m[prefix + ".attn.wq"] = randn(d, d, s);
  m[prefix + ".attn.wk"] = randn(d, d, s);
  m[prefix + ".attn.wv"] = randn(d, d, s);
  m[prefix + ".attn.wo"] = randn(d, d, 0.5 * s);
  m[prefix + ".ln2.g"] = ones(d);
  m[prefix + ".ln2.b"] = zeros(1, d);
  m[prefix + ".ffn.w1"] = randn(f, d, s);
  m[prefix + ".ffn.b1"] = zeros(1, f);
  m[prefix + ".ffn.w2"] = randn(d, f, 0.5 / std::sqrt(static_cast<double>(f)));
  m[prefix + ".ffn.b2"] = zeros(1, d);
}

}  // namespace model_detail

/// Fresh parameters drawn from `cfg.seed`. With `tie_channels` only the "a"
/// stream weights exist and both speakers use them.
inline Parameters InitParameters(const ModelConfig& cfg) {
  cfg.Validate();
  Parameters p(cfg);
  auto& m = p.tensors();
  std::mt19937_64 rng(cfg.seed);
  const int d = cfg.model_dim;
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(static_cast<double>(cfg.feature_bands)));
  Eigen::MatrixXd wf(d, cfg.feature_bands);
  for (Eigen::Index i = 0; i < wf.size(); ++i) wf.data()[i] = g(rng);
  m["frontend.w"] = wf;
  m["frontend.b"] = Eigen::MatrixXd::Zero(1, d);
  const int streams = cfg.tie_channels ? 1 : 2;
  for (int s = 0; s < streams; ++s) {
    const std::string sn = s == 0 ? "a" : "b";
    for (int l = 0; l < cfg.channel_layers; ++l)
      model_detail::AddBlockParams(m, "chan_" + sn + "." + std::to_string(l), cfg, false, rng);
    for (int l = 0; l < cfg.cross_layers; ++l)
      model_detail::AddBlockParams(m, "cross_" + sn + "." + std::to_string(l), cfg, true, rng);
  }
  m["final_ln.g"] = Eigen::MatrixXd::Ones(1, d);
  m["final_ln.b"] = Eigen::MatrixXd::Zero(1, d);
  std::normal_distribution<double> gh(0.0, 0.02);
  Eigen::MatrixXd wv(kNumStates, d);
  for (Eigen::Index i = 0; i < wv.size(); ++i) wv.data()[i] = gh(rng);
  m["vap.w"] = wv;
  m["vap.b"] = Eigen::MatrixXd::Zero(1, kNumStates);
  Eigen::MatrixXd wd(2, d);
  for (Eigen::Index i = 0; i < wd.size(); ++i) wd.data()[i] = gh(rng);
  if (cfg.tie_channels) wd.row(1) = wd.row(0);
  m["vad.w"] = wd;
  m["vad.b"] = Eigen::MatrixXd::Zero(1, 2);
  return p;
}

/// Aligned inputs and targets for one context window. Frames with
/// `mask[t] == 0` have no full 2 s future and carry no loss.
struct FrameBatch {
  FeatureMatrix features_a;
  FeatureMatrix features_b;
  std::vector<int> target_state;
  Eigen::MatrixXd target_vad;  // T x 2, 0/1
  std::vector<std::uint8_t> mask;

  Eigen::Index frames() const { return features_a.rows(); }
  int target_count() const {
    int n = 0;
    for (auto m : mask) n += m ? 1 : 0;
    return n;
  }
};

struct PredictionOutput {
  Eigen::MatrixXd vap;  // T x 256, rows sum to 1
  Eigen::MatrixXd vad;  // T x 2, in [0, 1]

  Eigen::Index frames() const { return vap.rows(); }
  double p_now(Eigen::Index t, int speaker) const {
    const Eigen::RowVectorXd row = vap.row(t);  // vap is column-major
    return PNow(std::span<const double>(row.data(), kNumStates), speaker);
  }
};

struct LossBreakdown {
  double total = 0.0;
  double vap = 0.0;
  double vad = 0.0;
};

/// Handles into a tape holding one forward pass.
struct ForwardGraph {
  ag::Tape tape;
  std::map<std::string, ag::Var> params;
  ag::Var vap_logits;
  ag::Var vad_logits;
};

namespace model_detail {

inline ag::Var Param(ForwardGraph& g, const std::string& name) { return g.params.at(name); }

inline ag::Var SelfBlock(ForwardGraph& g, ag::Var x, const std::string& p, int heads) {
  auto& t = g.tape;
  auto n1 = ag::LayerNorm(t, x, Param(g, p + ".ln1.g"), Param(g, p + ".ln1.b"));
  auto q = ag::Linear(t, n1, Param(g, p + ".attn.wq"));
  auto k = ag::Linear(t, n1, Param(g, p + ".attn.wk"));
  auto v = ag::Linear(t, n1, Param(g, p + ".attn.wv"));
  auto att = ag::Linear(t, ag::CausalAttention(t, q, k, v, heads), Param(g, p + ".attn.wo"));
  auto h = ag::Add(t, x, att);
  auto n2 = ag::LayerNorm(t, h, Param(g, p + ".ln2.g"), Param(g, p + ".ln2.b"));
  auto f = ag::Gelu(t, ag::Dense(t, n2, Param(g, p + ".ffn.w1"), Param(g, p + ".ffn.b1")));
  f = ag::Dense(t, f, Param(g, p + ".ffn.w2"), Param(g, p + ".ffn.b2"));
  return ag::Add(t, h, f);
}

inline ag::Var CrossBlock(ForwardGraph& g, ag::Var x, ag::Var other, const std::string& p,
                          int heads) {
  auto& t = g.tape;
  auto nq = ag::LayerNorm(t, x, Param(g, p + ".ln1.g"), Param(g, p + ".ln1.b"));
  auto nkv = ag::LayerNorm(t, other, Param(g, p + ".lnkv.g"), Param(g, p + ".lnkv.b"));
  auto q = ag::Linear(t, nq, Param(g, p + ".attn.wq"));
  auto k = ag::Linear(t, nkv, Param(g, p + ".attn.wk"));
  auto v = ag::Linear(t, nkv, Param(g, p + ".attn.wv"));
  auto att = ag::Linear(t, ag::CausalAttention(t, q, k, v, heads), Param(g, p + ".attn.wo"));
  auto h = ag::Add(t, x, att);
  auto n2 = ag::LayerNorm(t, h, Param(g, p + ".ln2.g"), Param(g, p + ".ln2.b"));
  auto f = ag::Gelu(t, ag::Dense(t, n2, Param(g, p + ".ffn.w1"), Param(g, p + ".ffn.b1")));
  f = ag::Dense(t, f, Param(g, p + ".ffn.w2"), Param(g, p + ".ffn.b2"));
  return ag::Add(t, h, f);
}

}  // namespace model_detail

/// Builds the forward graph for one window. Parameters become tape leaves
/// that require gradients iff `with_grad`.
inline void BuildForward(ForwardGraph& g, const Parameters& p, const FeatureMatrix& features_a,
                         const FeatureMatrix& features_b, bool with_grad) {
  const ModelConfig& cfg = p.config();
  if (features_a.rows() != features_b.rows() || features_a.cols() != features_b.cols())
    throw Error("forward: channel feature shapes differ");
  if (features_a.cols() != cfg.feature_bands)
    throw Error("forward: expected " + std::to_string(cfg.feature_bands) + " feature bands");
  if (features_a.rows() == 0) throw Error("forward: empty input");
  if (features_a.rows() > cfg.context_frames)
    throw Error("forward: sequence longer than the context window");

  auto& t = g.tape;
  for (const auto& [name, value] : p.tensors()) g.params[name] = t.Leaf(value, with_grad);

  using model_detail::Param;
  const std::string sa = model_detail::StreamName(cfg, 0);
  const std::string sb = model_detail::StreamName(cfg, 1);

  auto embed = [&](const FeatureMatrix& f) {
    auto x = t.Constant(((f.array() - kFeatureOffset) / kFeatureScale).matrix());
    return ag::Dense(t, x, Param(g, "frontend.w"), Param(g, "frontend.b"));
  };
  ag::Var xa = embed(features_a);
  ag::Var xb = embed(features_b);
  for (int l = 0; l < cfg.channel_layers; ++l) {
    xa = model_detail::SelfBlock(g, xa, "chan_" + sa + "." + std::to_string(l), cfg.heads);
    xb = model_detail::SelfBlock(g, xb, "chan_" + sb + "." + std::to_string(l), cfg.heads);
  }
  for (int l = 0; l < cfg.cross_layers; ++l) {
    auto ya = model_detail::CrossBlock(g, xa, xb, "cross_" + sa + "." + std::to_string(l),
                                       cfg.heads);
    auto yb = model_detail::CrossBlock(g, xb, xa, "cross_" + sb + "." + std::to_string(l),
                                       cfg.heads);
    xa = ya;
    xb = yb;
  }
  auto fused = ag::LayerNorm(t, ag::Add(t, xa, xb), Param(g, "final_ln.g"),
                             Param(g, "final_ln.b"));
  g.vap_logits = ag::Dense(t, fused, Param(g, "vap.w"), Param(g, "vap.b"));
  g.vad_logits = ag::PerStreamHead(t, xa, xb, Param(g, "vad.w"), Param(g, "vad.b"));
}

inline PredictionOutput OutputsFromGraph(const ForwardGraph& g) {
  PredictionOutput out;
  out.vap = ag::SoftmaxRows(g.tape.value(g.vap_logits));
  out.vad = g.tape.value(g.vad_logits).unaryExpr([](double z) { return ag::Sigmoid(z); });
  return out;
}

/// Inference over one window (at most `context_frames` frames).
inline PredictionOutput Forward(const Parameters& p, const FeatureMatrix& features_a,
                                const FeatureMatrix& features_b) {
  ForwardGraph g;
  BuildForward(g, p, features_a, features_b, false);
  return OutputsFromGraph(g);
}
inline PredictionOutput Forward(const Parameters& p, const FrameBatch& batch) {
  return Forward(p, batch.features_a, batch.features_b);
}

/// Joint loss from output probabilities: mean frame cross-entropy against the
/// target state plus mean (over frames and speakers) binary cross-entropy
/// for VAD. Probabilities are clamped at 1e-12.
inline LossBreakdown Loss(const PredictionOutput& out, const FrameBatch& batch) {
  constexpr double kEps = 1e-12;
  LossBreakdown l;
  int n = 0;
  for (Eigen::Index t = 0; t < out.frames(); ++t) {
    if (!batch.mask[t]) continue;
    l.vap -= std::log(std::max(out.vap(t, batch.target_state[t]), kEps));
    for (int s = 0; s < 2; ++s) {
      double p = out.vad(t, s), y = batch.target_vad(t, s);
      l.vad -= y * std::log(std::max(p, kEps)) + (1 - y) * std::log(std::max(1 - p, kEps));
    }
    ++n;
  }
  if (n == 0) throw Error("loss: no frames with targets");
  l.vap /= n;
  l.vad /= 2.0 * n;
  l.total = l.vap + l.vad;
  return l;
}

/// Attaches the joint loss to a built graph; returns (total, vap, vad) nodes.
struct LossNodes {
  ag::Var total, vap, vad;
};
inline LossNodes AttachLoss(ForwardGraph& g, const FrameBatch& batch) {
  auto& t = g.tape;
  LossNodes n;
  n.vap = ag::SoftmaxCrossEntropy(t, g.vap_logits, batch.target_state, batch.mask);
  n.vad = ag::SigmoidCrossEntropy(t, g.vad_logits, batch.target_vad, batch.mask);
  n.total = ag::Add(t, n.vap, n.vad);
  return n;
}

/// Loss and gradient for one window. `grads` is accumulated into (scaled by
/// `weight`) and must contain zero-initialized tensors for every parameter.
inline LossBreakdown LossAndGradient(const Parameters& p, const FrameBatch& batch,
                                     Parameters::Map* grads, double weight = 1.0) {
  ForwardGraph g;
  BuildForward(g, p, batch.features_a, batch.features_b, grads != nullptr);
  auto n = AttachLoss(g, batch);
  LossBreakdown l{g.tape.value(n.total)(0, 0), g.tape.value(n.vap)(0, 0),
                  g.tape.value(n.vad)(0, 0)};
  if (grads) {
    g.tape.Backward(n.total);
    for (auto& [name, var] : g.params) (*grads)[name] += weight * g.tape.grad(var);
  }
  return l;
}

inline Parameters::Map ZeroGradients(const Parameters& p) {
  Parameters::Map m;
  for (const auto& [k, v] : p.tensors()) m[k] = Eigen::MatrixXd::Zero(v.rows(), v.cols());
  return m;
}

// ---------------------------------------------------------------------------
// Checkpoints: JSON with a format tag, the config echo and named tensors
// (row-major values).

inline constexpr const char* kCheckpointFormat = "mcvap-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json ParametersToJson(const Parameters& p) {
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = p.config().ToJson();
  auto& ts = j["tensors"];
  ts = nlohmann::json::object();
  for (const auto& [name, m] : p.tensors()) {
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) vals.push_back(m(r, c));
    ts[name] = {{"rows", m.rows()}, {"cols", m.cols()}, {"data", vals}};
  }
  return j;
}

inline Parameters ParametersFromJson(const nlohmann::json& j) {
  if (j.value("format", std::string()) != kCheckpointFormat)
    throw Error("checkpoint: unrecognized format");
  if (j.value("version", 0) != kCheckpointVersion)
    throw Error("checkpoint: unsupported version");
  ModelConfig cfg = ModelConfig::FromJson(j.at("config"));
  cfg.Validate();
  Parameters p(cfg);
  Parameters reference = InitParameters(cfg);
  for (const auto& [name, spec] : j.at("tensors").items()) {
    auto rows = spec.at("rows").get<Eigen::Index>();
    auto cols = spec.at("cols").get<Eigen::Index>();
    auto data = spec.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != rows * cols)
      throw Error("checkpoint: tensor '" + name + "' has wrong element count");
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    p.tensors()[name] = std::move(m);
  }
  for (const auto& [name, m] : reference.tensors()) {
    if (!p.contains(name)) throw Error("checkpoint: missing tensor '" + name + "'");
    if (p.at(name).rows() != m.rows() || p.at(name).cols() != m.cols())
      throw Error("checkpoint: tensor '" + name + "' has wrong shape");
  }
  if (p.tensors().size() != reference.tensors().size())
    throw Error("checkpoint: unexpected extra tensors");
  return p;
}

inline void SaveCheckpoint(const Parameters& p, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write checkpoint " + path.string());
  f << ParametersToJson(p).dump() << "\n";
}

inline Parameters LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint " + path.string() + ": " + e.what());
  }
  return ParametersFromJson(j);
}

}  // namespace mcvap
