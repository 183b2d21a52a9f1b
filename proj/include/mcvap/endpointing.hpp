// mcvap/endpointing.hpp

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

// End-of-turn decisions: a threshold detector over streamed p_now, a
// simulated cloud recognizer that finalizes after trailing silence plus a
// network delay, and the arbiter that takes whichever comes first.

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>

#include <json.hpp>

#include "mcvap/audio.hpp"
#include "mcvap/streaming.hpp"

namespace mcvap {

struct VapEndpointerConfig {
  bool enabled = true;
  double theta = 0.6;
  int consecutive_k = 3;
  double min_user_speech_ms = 300.0;
  /// Frames whose user VAD exceeds this count as detected user speech.
  double user_vad_threshold = 0.5;

  void Validate() const {
    if (!(theta > 0.5 && theta < 1.0)) throw Error("VapEndpointerConfig: theta must be in (0.5, 1)");
    if (consecutive_k < 1) throw Error("VapEndpointerConfig: consecutive_k must be >= 1");
    if (min_user_speech_ms < 0) throw Error("VapEndpointerConfig: min_user_speech_ms must be >= 0");
  }
  nlohmann::json ToJson() const {
    return {{"enabled", enabled},
            {"theta", theta},
            {"consecutive_k", consecutive_k},
            {"min_user_speech_ms", min_user_speech_ms},
            {"user_vad_threshold", user_vad_threshold}};
  }
  static VapEndpointerConfig FromJson(const nlohmann::json& j) {
    VapEndpointerConfig c;
    c.enabled = j.value("enabled", c.enabled);
    c.theta = j.value("theta", c.theta);
    c.consecutive_k = j.value("consecutive_k", c.consecutive_k);
    c.min_user_speech_ms = j.value("min_user_speech_ms", c.min_user_speech_ms);
    c.user_vad_threshold = j.value("user_vad_threshold", c.user_vad_threshold);
    c.Validate();
    return c;
  }
};

/// Frame-by-frame form of the threshold detector. Holds the state of one
/// turn; Reset() between turns.
class OnlineVapEndpointer {
 public:
  explicit OnlineVapEndpointer(VapEndpointerConfig cfg = {}) : cfg_(cfg) { cfg_.Validate(); }

  /// Returns the decision timestamp on the frame that completes the run.
  /// Once decided, further frames return the same decision.
  std::optional<double> Feed(const FrameResult& f) {
    if (decision_) return decision_;
    if (f.vad[0] > cfg_.user_vad_threshold) speech_ms_ += kTickSeconds * 1000.0;
    run_ = f.p_now_robot > cfg_.theta ? run_ + 1 : 0;
    if (run_ >= cfg_.consecutive_k && speech_ms_ + 1e-6 >= cfg_.min_user_speech_ms)
      decision_ = f.timestamp_s;
    return decision_;
  }
  std::optional<double> decision() const { return decision_; }
  void Reset() {
    run_ = 0;
    speech_ms_ = 0.0;
    decision_.reset();
  }

 private:
  VapEndpointerConfig cfg_;
  int run_ = 0;
  double speech_ms_ = 0.0;
  std::optional<double> decision_;
};

/// Earliest frame timestamp ending a run of consecutive_k frames with
/// p_now_robot > theta, provided the frames up to it contain at least
/// min_user_speech_ms of detected user speech.
inline std::optional<double> VapDecide(std::span<const FrameResult> frames,
                                       const VapEndpointerConfig& cfg) {
  if (!cfg.enabled) return std::nullopt;
  OnlineVapEndpointer det(cfg);
  for (const auto& f : frames)
    if (auto d = det.Feed(f)) return d;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Simulated cloud recognizer.

enum class LatencyFamily { kLognormal, kNormal, kConstant };

inline std::string ToString(LatencyFamily f) {
  switch (f) {
    case LatencyFamily::kLognormal: return "lognormal";
    case LatencyFamily::kNormal: return "normal";
    case LatencyFamily::kConstant: return "constant";
  }
  return "?";
}
inline LatencyFamily ParseLatencyFamily(const std::string& s) {
  if (s == "lognormal") return LatencyFamily::kLognormal;
  if (s == "normal") return LatencyFamily::kNormal;
  if (s == "constant") return LatencyFamily::kConstant;
  throw Error("unknown latency family '" + s + "' (expected lognormal, normal or constant)");
}

/// Network delay added to every recognizer decision. Draws are truncated at 0.
struct LatencyModel {
  LatencyFamily family = LatencyFamily::kLognormal;
  double mean_s = 0.6;
  double std_s = 0.3;

  void Validate() const {
    if (mean_s < 0 || std_s < 0) throw Error("LatencyModel: mean_s and std_s must be >= 0");
    if (family == LatencyFamily::kLognormal && mean_s <= 0 && std_s > 0)
      throw Error("LatencyModel: lognormal needs mean_s > 0");
  }

  double Sample(std::mt19937_64& rng) const {
    if (family == LatencyFamily::kConstant || std_s == 0.0) return std::max(0.0, mean_s);
    if (family == LatencyFamily::kNormal) {
      std::normal_distribution<double> g(mean_s, std_s);
      return std::max(0.0, g(rng));
    }
    // Moment-matched so the draws have the configured mean and std.
    const double s2 = std::log1p((std_s * std_s) / (mean_s * mean_s));
    std::lognormal_distribution<double> g(std::log(mean_s) - 0.5 * s2, std::sqrt(s2));
    return g(rng);
  }

  nlohmann::json ToJson() const {
    return {{"family", ToString(family)}, {"mean_s", mean_s}, {"std_s", std_s}};
  }
  static LatencyModel FromJson(const nlohmann::json& j) {
    LatencyModel m;
    if (j.contains("family")) m.family = ParseLatencyFamily(j.at("family").get<std::string>());
    m.mean_s = j.value("mean_s", m.mean_s);
    m.std_s = j.value("std_s", m.std_s);
    m.Validate();
    return m;
  }
};

struct SttSimConfig {
  double silence_threshold_ms = 800.0;
  LatencyModel latency;
  std::uint64_t seed = 11;

  void Validate() const {
    if (!(silence_threshold_ms > 0)) throw Error("SttSimConfig: silence_threshold_ms must be > 0");
    latency.Validate();
  }
  nlohmann::json ToJson() const {
    return {{"silence_threshold_ms", silence_threshold_ms},
            {"latency_model", latency.ToJson()},
            {"seed", seed}};
  }
  static SttSimConfig FromJson(const nlohmann::json& j) {
    SttSimConfig c;
    c.silence_threshold_ms = j.value("silence_threshold_ms", c.silence_threshold_ms);
    if (j.contains("latency_model")) c.latency = LatencyModel::FromJson(j.at("latency_model"));
    c.seed = j.value("seed", c.seed);
    c.Validate();
    return c;
  }
};

/// Seconds (from the start of `vad`) at which the recognizer reports a
/// final result: end of the last active frame + silence threshold + delay.
inline double SttDecide(const VadTrack& vad, const SttSimConfig& cfg, std::mt19937_64& rng) {
  std::size_t last = vad.size();
  for (std::size_t i = vad.size(); i-- > 0;)
    if (vad[i]) {
      last = i;
      break;
    }
  if (last == vad.size()) throw Error("SttDecide: VAD track has no active frames");
  const double speech_end = static_cast<double>(last + 1) / VadTrack::frame_rate();
  return speech_end + cfg.silence_threshold_ms / 1000.0 + cfg.latency.Sample(rng);
}

// ---------------------------------------------------------------------------
// Arbitration.

enum class DecisionSource { kVap, kStt, kNone };

inline std::string ToString(DecisionSource s) {
  switch (s) {
    case DecisionSource::kVap: return "VAP";
    case DecisionSource::kStt: return "STT";
    case DecisionSource::kNone: return "NONE";
  }
  return "?";
}

struct TurnEvent {
  std::string turn_id;
  double decision_time_s = 0.0;
  double true_end_time_s = 0.0;
  DecisionSource source = DecisionSource::kStt;

  double latency_s() const { return decision_time_s - true_end_time_s; }

  nlohmann::json ToJson() const {
    return {{"turn_id", turn_id},
            {"decision_time_s", decision_time_s},
            {"true_end_time_s", true_end_time_s},
            {"source", ToString(source)},
            {"latency_s", latency_s()}};
  }
};

/// Earlier decision wins; a tie goes to VAP.
inline TurnEvent Arbitrate(std::optional<double> vap_decision, double stt_decision,
                           double true_end_time_s = 0.0, std::string turn_id = {}) {
  TurnEvent e;
  e.turn_id = std::move(turn_id);
  e.true_end_time_s = true_end_time_s;
  if (vap_decision && *vap_decision <= stt_decision) {
    e.decision_time_s = *vap_decision;
    e.source = DecisionSource::kVap;
  } else {
    e.decision_time_s = stt_decision;
    e.source = DecisionSource::kStt;
  }
  return e;
}

}  // namespace mcvap
