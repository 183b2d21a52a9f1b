// mcvap/dialogue.hpp

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

// Synthetic two-party dialogues with exact activity labels. Speech is
// rendered as coloured noise under a syllable-rate envelope; the two
// speakers differ in spectral tilt. A user turn may contain short pauses
// and usually ends with a darker, decaying "final" segment, which is the
// cue the predictor can learn to anticipate the turn end from.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include <json.hpp>

#include "mcvap/audio.hpp"
#include "mcvap/noise_mix.hpp"

namespace mcvap {

struct Range {
  double min = 0.0;
  double max = 0.0;
};

/// Normal distribution truncated to [min, max].
struct TruncNormal {
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double max = 1e9;

  double Sample(std::mt19937_64& rng) const {
    if (std <= 0.0) return std::clamp(mean, min, max);
    std::normal_distribution<double> g(mean, std);
    for (int i = 0; i < 64; ++i) {
      double v = g(rng);
      if (v >= min && v <= max) return v;
    }
    return std::clamp(mean, min, max);
  }
};

struct DialogueScript {
  int n_turns = 3;  // user turns, each answered by the robot
  Range user_utterance_s{1.0, 3.0};
  Range robot_utterance_s{1.0, 2.5};
  /// Robot turn end to next user onset.
  TruncNormal user_reaction_s{2.35, 0.8, 0.3, 5.0};
  /// User turn end to robot onset in the recorded dialogue.
  TruncNormal robot_gap_s{0.35, 0.1, 0.15, 0.7};
  /// The number of intra-turn pauses is geometric: each further pause
  /// occurs with pause_prob, up to max_pauses. Speech segments are at
  /// least min_segment_s long.
  double pause_prob = 0.5;
  int max_pauses = 2;
  double min_segment_s = 0.3;
  Range pause_s{0.15, 0.6};
  /// Probability that a user turn ends with the final cue.
  double final_cue_prob = 0.7;
  double final_cue_s = 0.4;
  Range lead_silence_s{0.5, 1.0};
  double tail_silence_s = 2.5;
  double speech_rms = 0.1;
  std::uint64_t seed = 1;

  void Validate() const {
    if (n_turns < 0) throw Error("DialogueScript: negative turn count");
    for (const Range& r : {user_utterance_s, robot_utterance_s, pause_s, lead_silence_s})
      if (r.min < 0 || r.max < r.min) throw Error("DialogueScript: invalid range");
    if (user_utterance_s.min <= 0 || robot_utterance_s.min <= 0)
      throw Error("DialogueScript: utterance durations must be positive");
    if (tail_silence_s < 0 || speech_rms <= 0) throw Error("DialogueScript: invalid levels");
    if (pause_prob < 0 || pause_prob > 1 || final_cue_prob < 0 || final_cue_prob > 1)
      throw Error("DialogueScript: probabilities must be in [0, 1]");
    if (max_pauses < 0 || min_segment_s <= 0)
      throw Error("DialogueScript: invalid pause structure");
  }

  nlohmann::json ToJson() const {
    auto range = [](const Range& r) { return nlohmann::json{r.min, r.max}; };
    auto tn = [](const TruncNormal& d) {
      return nlohmann::json{{"mean", d.mean}, {"std", d.std}, {"min", d.min}, {"max", d.max}};
    };
    return {{"n_turns", n_turns},
            {"user_utterance_s", range(user_utterance_s)},
            {"robot_utterance_s", range(robot_utterance_s)},
            {"user_reaction_s", tn(user_reaction_s)},
            {"robot_gap_s", tn(robot_gap_s)},
            {"pause_prob", pause_prob},
            {"max_pauses", max_pauses},
            {"min_segment_s", min_segment_s},
            {"pause_s", range(pause_s)},
            {"final_cue_prob", final_cue_prob},
            {"final_cue_s", final_cue_s},
            {"lead_silence_s", range(lead_silence_s)},
            {"tail_silence_s", tail_silence_s},
            {"speech_rms", speech_rms},
            {"seed", seed}};
  }

  static DialogueScript FromJson(const nlohmann::json& j) {
    DialogueScript s;
    auto range = [&](const char* key, Range& r) {
      if (j.contains(key)) r = {j[key].at(0).get<double>(), j[key].at(1).get<double>()};
    };
    auto tn = [&](const char* key, TruncNormal& d) {
      if (!j.contains(key)) return;
      const auto& o = j[key];
      d.mean = o.value("mean", d.mean);
      d.std = o.value("std", d.std);
      d.min = o.value("min", d.min);
      d.max = o.value("max", d.max);
    };
    s.n_turns = j.value("n_turns", s.n_turns);
    range("user_utterance_s", s.user_utterance_s);
    range("robot_utterance_s", s.robot_utterance_s);
    tn("user_reaction_s", s.user_reaction_s);
    tn("robot_gap_s", s.robot_gap_s);
    s.pause_prob = j.value("pause_prob", s.pause_prob);
    s.max_pauses = j.value("max_pauses", s.max_pauses);
    s.min_segment_s = j.value("min_segment_s", s.min_segment_s);
    range("pause_s", s.pause_s);
    s.final_cue_prob = j.value("final_cue_prob", s.final_cue_prob);
    s.final_cue_s = j.value("final_cue_s", s.final_cue_s);
    range("lead_silence_s", s.lead_silence_s);
    s.tail_silence_s = j.value("tail_silence_s", s.tail_silence_s);
    s.speech_rms = j.value("speech_rms", s.speech_rms);
    s.seed = j.value("seed", s.seed);
    return s;
  }
};

/// Ground-truth timing of one user turn and the robot reply that follows it
/// in the rendered dialogue. Times in seconds from dialogue start.
struct UserTurn {
  double start_s = 0.0;
  double end_s = 0.0;  // end of the last user speech segment in the turn
  double robot_start_s = 0.0;
  double robot_end_s = 0.0;
  /// Silence between the previous robot turn and this turn's onset (the
  /// user's reaction); for the first turn, the lead silence.
  double user_reaction_s = 0.0;
  int pauses = 0;
  bool has_final_cue = false;
};

struct SyntheticDialogue {
  StereoDialogue audio;
  std::vector<UserTurn> turns;
};

namespace dialogue_detail {

/// Rounds to the 10 ms label grid.
inline double Snap(double s) { return std::round(s * 100.0) / 100.0; }
inline std::size_t ToSamples(double s) { return static_cast<std::size_t>(std::lround(s * kSampleRate)); }

inline double Uniform(std::mt19937_64& rng, const Range& r) {
  std::uniform_real_distribution<double> u(r.min, r.max);
  return r.max > r.min ? u(rng) : r.min;
}

struct Voice {
  double lowpass;    // one-pole coefficient, larger is darker
  double highpass;   // first-difference weight
  double rate_hz;    // syllable rate
};

inline constexpr Voice kUserVoice{0.55, 0.9, 4.5};
inline constexpr Voice kRobotVoice{0.15, 0.6, 5.5};
inline constexpr double kCueLowpass = 0.88;

/// Renders one speech segment into `out[begin, end)`. When `cue_samples` > 0
/// the trailing part switches to the darker filter and decays to half level.
inline void RenderSegment(std::vector<double>& out, std::size_t begin, std::size_t end,
                          const Voice& v, double rms, std::size_t cue_samples,
                          std::mt19937_64& rng) {
  if (end <= begin) return;
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t n = end - begin;
  std::vector<double> x(n);
  double lp = 0.0, prev = 0.0;
  const double phase = std::numbers::pi * u(rng);
  const std::size_t cue_start = cue_samples > 0 && cue_samples < n ? n - cue_samples : n;
  for (std::size_t i = 0; i < n; ++i) {
    const bool cue = i >= cue_start;
    const double a = cue ? kCueLowpass : v.lowpass;
    lp = a * lp + (1.0 - a) * g(rng);
    double hp = lp - v.highpass * prev;
    prev = lp;
    double t = static_cast<double>(i) / kSampleRate;
    double env = 0.45 + 0.55 * std::abs(std::sin(std::numbers::pi * v.rate_hz * t + phase));
    if (cue) env *= 1.0 - 0.5 * static_cast<double>(i - cue_start) / static_cast<double>(n - cue_start);
    x[i] = hp * env;
  }
  // Level is set on the pre-cue part so the cue is a genuine drop.
  const std::size_t ref_end = cue_start > n / 4 ? cue_start : n;
  double p = 0.0;
  for (std::size_t i = 0; i < ref_end; ++i) p += x[i] * x[i];
  p /= static_cast<double>(ref_end);
  const double k = p > 0 ? rms / std::sqrt(p) : 0.0;
  const std::size_t ramp = std::min<std::size_t>(32, n / 2);
  for (std::size_t i = 0; i < n; ++i) {
    double r = 1.0;
    if (i < ramp) r = static_cast<double>(i + 1) / ramp;
    if (n - i <= ramp) r = std::min(r, static_cast<double>(n - i) / ramp);
    out[begin + i] = std::clamp(x[i] * k * r, -1.0, 1.0);
  }
}

inline void MarkActive(VadTrack& t, double b, double e) {
  auto fb = static_cast<std::size_t>(std::lround(b * 100.0));
  auto fe = static_cast<std::size_t>(std::lround(e * 100.0));
  for (std::size_t f = fb; f < fe && f < t.size(); ++f) t.active[f] = 1;
}

}  // namespace dialogue_detail

/// Renders a dialogue from `script`. All boundaries lie on the 10 ms grid,
/// so the label tracks are exact.
inline SyntheticDialogue GenerateDialogue(const DialogueScript& script) {
  using namespace dialogue_detail;
  script.Validate();
  SyntheticDialogue d;
  if (script.n_turns == 0) return d;

  std::mt19937_64 rng(script.seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  struct Segment {
    int speaker;
    double b, e;
    bool cue;
  };
  std::vector<Segment> segs;
  double t = Snap(Uniform(rng, script.lead_silence_s));
  double reaction = t;
  for (int i = 0; i < script.n_turns; ++i) {
    UserTurn turn;
    turn.start_s = t;
    turn.user_reaction_s = reaction;
    double dur = Snap(Uniform(rng, script.user_utterance_s));
    turn.has_final_cue = coin(rng) < script.final_cue_prob;
    while (turn.pauses < script.max_pauses && coin(rng) < script.pause_prob &&
           (turn.pauses + 2) * script.min_segment_s <= dur)
      ++turn.pauses;
    // Segment lengths: the minimum plus a random share of the remainder.
    std::vector<double> w(turn.pauses + 1);
    for (double& x : w) x = 0.5 + coin(rng);
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    const double spare = dur - static_cast<double>(w.size()) * script.min_segment_s;
    double spoken = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      const bool last = k + 1 == w.size();
      double len = last ? dur - spoken : Snap(script.min_segment_s + spare * w[k] / sum);
      if (last && len <= script.final_cue_s) turn.has_final_cue = false;
      segs.push_back({0, t, Snap(t + len), last && turn.has_final_cue});
      t = Snap(t + len);
      spoken += len;
      if (!last) t = Snap(t + Uniform(rng, script.pause_s));
    }
    turn.end_s = t;
    t = Snap(t + script.robot_gap_s.Sample(rng));
    turn.robot_start_s = t;
    t = Snap(t + Uniform(rng, script.robot_utterance_s));
    segs.push_back({1, turn.robot_start_s, t, false});
    turn.robot_end_s = t;
    d.turns.push_back(turn);
    if (i + 1 < script.n_turns) {
      reaction = Snap(script.user_reaction_s.Sample(rng));
      t = Snap(t + reaction);
    }
  }
  const double total = Snap(t + script.tail_silence_s);
  const std::size_t n = ToSamples(total);
  std::vector<double> a(n, 0.0), b(n, 0.0);
  const std::size_t frames = LabelFrameCount(n);
  d.audio.vad_a = VadTrack(frames);
  d.audio.vad_b = VadTrack(frames);
  for (const auto& s : segs) {
    auto& buf = s.speaker == 0 ? a : b;
    const Voice& v = s.speaker == 0 ? kUserVoice : kRobotVoice;
    std::size_t cue = s.cue ? ToSamples(script.final_cue_s) : 0;
    RenderSegment(buf, ToSamples(s.b), ToSamples(s.e), v, script.speech_rms, cue, rng);
    MarkActive(s.speaker == 0 ? d.audio.vad_a : d.audio.vad_b, s.b, s.e);
  }
  d.audio.channel_a = Waveform(std::move(a));
  d.audio.channel_b = Waveform(std::move(b));
  d.audio.Validate();
  return d;
}

}  // namespace mcvap
