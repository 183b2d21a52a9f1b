// mcvap/session.hpp

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

// Replays rendered dialogues through the endpointers and scores response
// times against the label clock.
//
// For each user turn the microphone opens when the previous robot turn ends
// (at 0 for the first turn) and only the user channel is streamed; the robot
// channel is silent, as on the deployed system. The VAP decision becomes
// available at the end of the hop it was computed on. The robot starts
// speaking a fixed generation delay after the decision.

#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcvap/dialogue.hpp"
#include "mcvap/endpointing.hpp"
#include "mcvap/stats.hpp"
#include "mcvap/streaming.hpp"

namespace mcvap {

enum class Policy { kVapOnly, kSttOnly, kHybrid };

inline std::string ToString(Policy p) {
  switch (p) {
    case Policy::kVapOnly: return "vap";
    case Policy::kSttOnly: return "stt";
    case Policy::kHybrid: return "hybrid";
  }
  return "?";
}
inline Policy ParsePolicy(const std::string& s) {
  if (s == "vap" || s == "vap-only") return Policy::kVapOnly;
  if (s == "stt" || s == "stt-only") return Policy::kSttOnly;
  if (s == "hybrid") return Policy::kHybrid;
  throw Error("unknown policy '" + s + "' (expected vap, stt or hybrid)");
}
inline bool UsesVap(Policy p) { return p != Policy::kSttOnly; }

struct SessionConfig {
  VapEndpointerConfig vap;
  SttSimConfig stt;
  double response_delay_s = 0.3;
  /// User reaction to the robot under the recognizer-only system and under
  /// the systems that use the turn-taking model.
  TruncNormal user_reaction_baseline_s{2.61, 0.8, 0.3, 5.0};
  TruncNormal user_reaction_proposed_s{2.35, 0.8, 0.3, 5.0};
  /// How long past the true end the VAP path keeps listening; the window
  /// also closes at the next user onset.
  double vap_window_s = 4.0;
  std::uint64_t seed = 5;

  void Validate() const {
    vap.Validate();
    stt.Validate();
    if (response_delay_s < 0) throw Error("SessionConfig: response_delay_s must be >= 0");
    if (!(vap_window_s > 0)) throw Error("SessionConfig: vap_window_s must be > 0");
  }
  const TruncNormal& user_reaction(Policy p) const {
    return p == Policy::kSttOnly ? user_reaction_baseline_s : user_reaction_proposed_s;
  }

  nlohmann::json ToJson() const {
    auto tn = [](const TruncNormal& t) {
      return nlohmann::json{{"mean", t.mean}, {"std", t.std}, {"min", t.min}, {"max", t.max}};
    };
    return {{"vap", vap.ToJson()},
            {"stt", stt.ToJson()},
            {"response_delay_s", response_delay_s},
            {"user_reaction_baseline_s", tn(user_reaction_baseline_s)},
            {"user_reaction_proposed_s", tn(user_reaction_proposed_s)},
            {"vap_window_s", vap_window_s},
            {"seed", seed}};
  }
  static SessionConfig FromJson(const nlohmann::json& j) {
    auto tn = [](const nlohmann::json& v, TruncNormal t) {
      t.mean = v.value("mean", t.mean);
      t.std = v.value("std", t.std);
      t.min = v.value("min", t.min);
      t.max = v.value("max", t.max);
      return t;
    };
    SessionConfig c;
    if (j.contains("vap")) c.vap = VapEndpointerConfig::FromJson(j.at("vap"));
    if (j.contains("stt")) c.stt = SttSimConfig::FromJson(j.at("stt"));
    c.response_delay_s = j.value("response_delay_s", c.response_delay_s);
    if (j.contains("user_reaction_baseline_s"))
      c.user_reaction_baseline_s = tn(j.at("user_reaction_baseline_s"), c.user_reaction_baseline_s);
    if (j.contains("user_reaction_proposed_s"))
      c.user_reaction_proposed_s = tn(j.at("user_reaction_proposed_s"), c.user_reaction_proposed_s);
    c.vap_window_s = j.value("vap_window_s", c.vap_window_s);
    c.seed = j.value("seed", c.seed);
    c.Validate();
    return c;
  }
};

/// The stretch of one dialogue the VAP path listens to for one turn.
struct TurnWindow {
  const SyntheticDialogue* dialogue = nullptr;
  std::size_t turn = 0;
  double start_s = 0.0;  // microphone opens
  double end_s = 0.0;    // listening stops
};

/// Returns the time (dialogue clock) at which the VAP path ends the turn,
/// or std::nullopt if it never fires inside the window.
using VapDecider = std::function<std::optional<double>(const TurnWindow&)>;

/// Streams the user channel of the window through a fresh StreamContext
/// and stops at the first decision.
inline VapDecider ModelVapDecider(std::shared_ptr<const Parameters> params,
                                  VapEndpointerConfig cfg) {
  if (!params) throw Error("ModelVapDecider: no model supplied");
  return [params = std::move(params), cfg](const TurnWindow& w) -> std::optional<double> {
    const auto& user = w.dialogue->audio.channel_a.vec();
    const std::size_t begin = dialogue_detail::ToSamples(w.start_s);
    const std::size_t end = std::min(user.size(), dialogue_detail::ToSamples(w.end_s));
    StreamContext ctx(params);
    OnlineVapEndpointer det(cfg);
    for (std::size_t pos = begin; pos + kHopSamples <= end; pos += kHopSamples) {
      ctx.PushAudio(std::span<const double>(user.data() + pos, kHopSamples));
      auto r = ctx.Tick();
      if (auto d = det.Feed(*r)) return w.start_s + *d + kTickSeconds;
    }
    return std::nullopt;
  };
}

/// Label-driven stand-in for the model: user VAD comes from the user labels
/// and p_now_robot jumps to 1 on the first hop starting at or after the true
/// end of the turn.
inline VapDecider OracleVapDecider(VapEndpointerConfig cfg) {
  return [cfg](const TurnWindow& w) -> std::optional<double> {
    const auto& turn = w.dialogue->turns.at(w.turn);
    const auto& vad = w.dialogue->audio.vad_a;
    OnlineVapEndpointer det(cfg);
    const auto hops = static_cast<std::int64_t>(std::floor((w.end_s - w.start_s) / kTickSeconds + 1e-9));
    for (std::int64_t t = 0; t < hops; ++t) {
      FrameResult f;
      f.frame_index = t;
      f.timestamp_s = static_cast<double>(t) * kTickSeconds;
      const double hop_begin = w.start_s + f.timestamp_s;
      const auto lb = static_cast<std::size_t>(std::lround(hop_begin * 100.0));
      int active = 0;
      for (std::size_t k = lb; k < lb + 10 && k < vad.size(); ++k) active += vad[k];
      f.vad = {active >= 5 ? 1.0 : 0.0, 0.0};
      f.p_now_robot = hop_begin + 1e-9 >= turn.end_s ? 1.0 : 0.0;
      f.p_now_user = 1.0 - f.p_now_robot;
      if (auto d = det.Feed(f)) return w.start_s + *d + kTickSeconds;
    }
    return std::nullopt;
  };
}

struct ResponseTimeRecord {
  std::string turn_id;
  Policy policy = Policy::kHybrid;
  DecisionSource source = DecisionSource::kStt;
  double true_end_time_s = 0.0;
  /// Decision instant on the dialogue clock; absent when nothing fired.
  std::optional<double> decision_time_s;
  std::optional<double> robot_onset_s;
  /// True user speech end to robot onset, clamped at 0.
  std::optional<double> robot_response_s;
  /// Decision before the user had finished (robot cut in).
  bool cut_in = false;
  /// Robot turn end to the user's next onset.
  double user_response_s = 0.0;

  bool decided() const { return decision_time_s.has_value(); }
  TurnEvent event() const {
    return {turn_id, decision_time_s.value_or(0.0), true_end_time_s, source};
  }

  nlohmann::json ToJson() const {
    auto opt = [](const std::optional<double>& v) {
      return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    return {{"turn_id", turn_id},
            {"policy", ToString(policy)},
            {"source", ToString(source)},
            {"true_end_time_s", true_end_time_s},
            {"decision_time_s", opt(decision_time_s)},
            {"latency_s", decision_time_s ? nlohmann::json(*decision_time_s - true_end_time_s)
                                          : nlohmann::json(nullptr)},
            {"robot_onset_s", opt(robot_onset_s)},
            {"robot_response_s", opt(robot_response_s)},
            {"cut_in", cut_in},
            {"user_response_s", user_response_s}};
  }
};

inline void WriteRecordsCsv(const std::vector<ResponseTimeRecord>& rs, std::ostream& os) {
  os << "turn_id,policy,source,true_end_time_s,decision_time_s,robot_onset_s,robot_response_s,"
        "cut_in,user_response_s\n";
  auto opt = [&](const std::optional<double>& v) {
    if (v) os << *v;
    os << ',';
  };
  for (const auto& r : rs) {
    os << r.turn_id << ',' << ToString(r.policy) << ',' << ToString(r.source) << ','
       << r.true_end_time_s << ',';
    opt(r.decision_time_s);
    opt(r.robot_onset_s);
    opt(r.robot_response_s);
    os << (r.cut_in ? 1 : 0) << ',' << r.user_response_s << '\n';
  }
}

/// Runs every policy in `policies` over the turns of one dialogue. The VAP
/// path is evaluated once per turn and shared by the policies that use it;
/// recognizer delays and user reactions are drawn per turn from seeds that
/// do not depend on the policy, so policies are compared on paired draws.
inline std::vector<ResponseTimeRecord> SimulateDialogue(const SyntheticDialogue& d,
                                                        const std::string& dialogue_id,
                                                        const std::vector<Policy>& policies,
                                                        const VapDecider& vap,
                                                        const SessionConfig& cfg) {
  cfg.Validate();
  bool needs_vap = false;
  for (Policy p : policies) needs_vap = needs_vap || UsesVap(p);
  if (needs_vap && cfg.vap.enabled && !vap)
    throw Error("SimulateDialogue: policy needs a VAP model but none was supplied");

  std::vector<ResponseTimeRecord> out;
  for (std::size_t i = 0; i < d.turns.size(); ++i) {
    const UserTurn& turn = d.turns[i];
    const std::string id = dialogue_id + "/" + std::to_string(i);
    const double open_s = i == 0 ? 0.0 : d.turns[i - 1].robot_end_s;
    const double next_onset = i + 1 < d.turns.size() ? d.turns[i + 1].start_s : d.audio.duration();

    // Recognizer: labels from the microphone opening to the robot's reply.
    const auto lb = static_cast<std::size_t>(std::lround(open_s * 100.0));
    const auto le = std::min(d.audio.vad_a.size(),
                             static_cast<std::size_t>(std::lround(turn.robot_end_s * 100.0)));
    VadTrack slice(std::vector<std::uint8_t>(d.audio.vad_a.active.begin() + static_cast<std::ptrdiff_t>(lb),
                                             d.audio.vad_a.active.begin() + static_cast<std::ptrdiff_t>(le)));
    std::mt19937_64 stt_rng(DeriveSeed(cfg.stt.seed ^ cfg.seed, "stt:" + id));
    const double stt = open_s + SttDecide(slice, cfg.stt, stt_rng);

    std::optional<double> vap_time;
    if (needs_vap && cfg.vap.enabled) {
      TurnWindow w{&d, i, open_s, std::min(next_onset, turn.end_s + cfg.vap_window_s)};
      vap_time = vap(w);
    }

    for (Policy p : policies) {
      ResponseTimeRecord r;
      r.turn_id = id;
      r.policy = p;
      r.true_end_time_s = turn.end_s;
      if (p == Policy::kSttOnly) {
        r.decision_time_s = stt;
        r.source = DecisionSource::kStt;
      } else if (p == Policy::kHybrid) {
        TurnEvent e = Arbitrate(vap_time, stt, turn.end_s, id);
        r.decision_time_s = e.decision_time_s;
        r.source = e.source;
      } else if (vap_time) {
        r.decision_time_s = vap_time;
        r.source = DecisionSource::kVap;
      } else {
        r.source = DecisionSource::kNone;
      }
      if (r.decision_time_s) {
        r.robot_onset_s = *r.decision_time_s + cfg.response_delay_s;
        r.robot_response_s = std::max(0.0, *r.robot_onset_s - turn.end_s);
        r.cut_in = *r.decision_time_s < turn.end_s - 1e-9;
      }
      std::mt19937_64 user_rng(DeriveSeed(cfg.seed, "user:" + id));
      r.user_response_s = cfg.user_reaction(p).Sample(user_rng);
      out.push_back(std::move(r));
    }
  }
  return out;
}

/// User-channel SNRs for simulated deployment: the training set plus 0 dB,
/// below the augmentation range.
inline std::vector<double> SessionSnrs() { return {kCleanSnr, 20, 15, 10, 5, 0}; }

/// Adds a noise condition to the user channel of simulated dialogue `id`.
/// The SNR is drawn from `snrs` (kCleanSnr allowed) and the noise type from
/// `bank`, seeded by (seed, id). Returns the condition applied.
inline Condition ApplySessionNoise(SyntheticDialogue& d, const std::string& id,
                                   const NoiseBank& bank, const std::vector<double>& snrs,
                                   std::uint64_t seed) {
  if (snrs.empty()) throw Error("ApplySessionNoise: empty SNR set");
  if (std::all_of(snrs.begin(), snrs.end(), IsClean)) return {};
  std::mt19937_64 rng(DeriveSeed(seed, id + "@noise"));
  const Condition c = SampleCondition(rng, bank, snrs);
  ApplyConditionToUser(d.audio, bank, c, rng);
  return c;
}

/// Single-policy convenience form.
inline std::vector<ResponseTimeRecord> RunSession(const SyntheticDialogue& d,
                                                  const std::string& dialogue_id, Policy policy,
                                                  const VapDecider& vap,
                                                  const SessionConfig& cfg) {
  return SimulateDialogue(d, dialogue_id, {policy}, vap, cfg);
}

struct SessionStats {
  std::size_t n = 0;
  std::size_t decided = 0;
  std::size_t cut_ins = 0;
  std::size_t vap_decisions = 0;
  Descriptive robot;  // over decided turns
  Descriptive user;
  Histogram robot_hist = ResponseHistogram();
  Histogram user_hist = ResponseHistogram();
  /// Fraction of decided turns whose decision came from the VAP path.
  double vap_source_fraction = 0.0;

  nlohmann::json ToJson() const {
    return {{"n", n},
            {"decided", decided},
            {"cut_ins", cut_ins},
            {"vap_decisions", vap_decisions},
            {"vap_source_fraction", vap_source_fraction},
            {"robot_response_s", robot.ToJson()},
            {"user_response_s", user.ToJson()},
            {"robot_histogram", robot_hist.ToJson()},
            {"user_histogram", user_hist.ToJson()}};
  }
};

inline std::vector<double> RobotResponses(const std::vector<ResponseTimeRecord>& rs) {
  std::vector<double> v;
  for (const auto& r : rs)
    if (r.robot_response_s) v.push_back(*r.robot_response_s);
  return v;
}

inline SessionStats Summarize(const std::vector<ResponseTimeRecord>& rs) {
  if (rs.empty()) throw Error("Summarize: no records");
  SessionStats s;
  s.n = rs.size();
  std::vector<double> robot = RobotResponses(rs), user;
  for (const auto& r : rs) {
    user.push_back(r.user_response_s);
    s.user_hist.Add(r.user_response_s);
    if (r.robot_response_s) s.robot_hist.Add(*r.robot_response_s);
    if (r.cut_in) ++s.cut_ins;
    if (r.source == DecisionSource::kVap) ++s.vap_decisions;
  }
  s.decided = robot.size();
  if (!robot.empty()) s.robot = Describe(robot);
  s.user = Describe(user);
  s.vap_source_fraction =
      s.decided ? static_cast<double>(s.vap_decisions) / static_cast<double>(s.decided) : 0.0;
  return s;
}

}  // namespace mcvap
