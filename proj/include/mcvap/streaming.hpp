// mcvap/streaming.hpp

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

// Real-time runtime. Audio is queued on push; each tick consumes one 100 ms
// hop into a 5 s ring per channel and recomputes features and the forward
// pass over the whole ring. The ring starts as silence, so early ticks see a
// zero-padded context. Per-hop power spectra depend only on their own hop,
// so they are cached alongside the ring and only the newest hop is
// transformed on each tick. A context is single-writer/single-ticker; share the
// Parameters, not the context.

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "mcvap/features.hpp"
#include "mcvap/model.hpp"

namespace mcvap {

inline constexpr std::size_t kContextSamples = 80000;  // 5 s
inline constexpr double kTickSeconds = 0.1;

struct FrameResult {
  std::int64_t frame_index = 0;
  double timestamp_s = 0.0;
  double p_now_user = 0.5;
  double p_now_robot = 0.5;
  std::array<double, 2> vad{0.5, 0.5};
  double vap_entropy = 0.0;  // nats
  double compute_ms = 0.0;

  nlohmann::json ToJson() const {
    return {{"frame_index", frame_index}, {"timestamp_s", timestamp_s},
            {"p_now_user", p_now_user},   {"p_now_robot", p_now_robot},
            {"vad", {vad[0], vad[1]}},    {"vap_entropy", vap_entropy},
            {"compute_ms", compute_ms}};
  }
};

/// Fills the timing-independent fields of a FrameResult from one output row.
inline FrameResult ResultFromOutput(const PredictionOutput& out, Eigen::Index row,
                                    std::int64_t frame_index) {
  FrameResult r;
  r.frame_index = frame_index;
  r.timestamp_s = static_cast<double>(frame_index) * kTickSeconds;
  r.p_now_user = out.p_now(row, kUser);
  r.p_now_robot = out.p_now(row, kRobot);
  r.vad = {out.vad(row, 0), out.vad(row, 1)};
  double h = 0.0;
  for (int k = 0; k < kNumStates; ++k) {
    double p = out.vap(row, k);
    if (p > 0) h -= p * std::log(p);
  }
  r.vap_entropy = h;
  return r;
}

class StreamContext {
 public:
  StreamContext() { Reset(); }
  explicit StreamContext(std::shared_ptr<const Parameters> params) : params_(std::move(params)) {
    Reset();
  }

  void Attach(std::shared_ptr<const Parameters> params) { params_ = std::move(params); }
  bool attached() const { return params_ != nullptr; }

  /// Queues equal-length chunks for both channels.
  void PushAudio(std::span<const double> chunk_a, std::span<const double> chunk_b) {
    if (chunk_a.size() != chunk_b.size())
      throw Error("PushAudio: channel chunk lengths differ (" + std::to_string(chunk_a.size()) +
                  " vs " + std::to_string(chunk_b.size()) + ")");
    pending_a_.insert(pending_a_.end(), chunk_a.begin(), chunk_a.end());
    pending_b_.insert(pending_b_.end(), chunk_b.begin(), chunk_b.end());
  }
  /// Deployment mode: the robot channel is silent.
  void PushAudio(std::span<const double> chunk_a) {
    pending_a_.insert(pending_a_.end(), chunk_a.begin(), chunk_a.end());
    pending_b_.insert(pending_b_.end(), chunk_a.size(), 0.0);
  }

  std::size_t ticks_due() const { return (pending_a_.size() - read_) / kHopSamples; }
  std::int64_t clock() const { return clock_; }

  /// Processes one due hop; std::nullopt when fewer than 100 ms are queued.
  std::optional<FrameResult> Tick() {
    if (!params_) throw Error("Tick: no model attached");
    if (ticks_due() == 0) return std::nullopt;
    const auto t0 = std::chrono::steady_clock::now();
    Advance(ring_a_, power_a_, pending_a_);
    Advance(ring_b_, power_b_, pending_b_);
    read_ += kHopSamples;
    if (read_ >= 16 * kHopSamples) Compact();

    const auto& fx = DefaultFeatureExtractor();
    auto fa = fx.FromSubframes(power_a_, 0, power_a_.rows());
    auto fb = fx.FromSubframes(power_b_, 0, power_b_.rows());
    auto out = Forward(*params_, fa, fb);
    FrameResult r = ResultFromOutput(out, out.frames() - 1, clock_);
    ++clock_;
    r.compute_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return r;
  }

  /// Runs every due tick.
  std::vector<FrameResult> Drain() {
    std::vector<FrameResult> out;
    while (auto r = Tick()) out.push_back(*r);
    return out;
  }

  /// Silences both rings, drops queued audio and restarts the clock.
  void Reset() {
    ring_a_.assign(kContextSamples, 0.0);
    ring_b_.assign(kContextSamples, 0.0);
    power_a_ = Eigen::MatrixXd::Zero(kContextHops, kSpectrumBins);
    power_b_ = Eigen::MatrixXd::Zero(kContextHops, kSpectrumBins);
    pending_a_.clear();
    pending_b_.clear();
    read_ = 0;
    clock_ = 0;
  }

  /// The 5 s contexts, oldest sample first.
  const std::vector<double>& context_a() const { return ring_a_; }
  const std::vector<double>& context_b() const { return ring_b_; }

 private:
  static constexpr Eigen::Index kContextHops = kContextSamples / kHopSamples;

  // The rings are kept linear (oldest first); shifting them per tick is
  // cheap next to the forward pass.
  void Advance(std::vector<double>& ring, Eigen::MatrixXd& power,
               const std::vector<double>& pending) const {
    std::copy(ring.begin() + kHopSamples, ring.end(), ring.begin());
    std::copy(pending.begin() + static_cast<std::ptrdiff_t>(read_),
              pending.begin() + static_cast<std::ptrdiff_t>(read_ + kHopSamples),
              ring.end() - kHopSamples);
    power.topRows(kContextHops - 1) = power.bottomRows(kContextHops - 1).eval();
    std::span<const double> hop(ring.data() + kContextSamples - kHopSamples, kHopSamples);
    if (std::all_of(hop.begin(), hop.end(), [](double v) { return v == 0.0; }))
      power.row(kContextHops - 1).setZero();
    else
      power.row(kContextHops - 1) = DefaultFeatureExtractor().SubframePower(hop).row(0);
  }
  void Compact() {
    pending_a_.erase(pending_a_.begin(), pending_a_.begin() + static_cast<std::ptrdiff_t>(read_));
    pending_b_.erase(pending_b_.begin(), pending_b_.begin() + static_cast<std::ptrdiff_t>(read_));
    read_ = 0;
  }

  std::shared_ptr<const Parameters> params_;
  std::vector<double> ring_a_, ring_b_;
  Eigen::MatrixXd power_a_, power_b_;
  std::vector<double> pending_a_, pending_b_;
  std::size_t read_ = 0;
  std::int64_t clock_ = 0;
};

/// Offline reference for the streaming runtime: for every complete hop t of
/// the two channels, the forward pass over the 5 s window ending at hop t
/// (zero-padded before the start), reading the last output row.
inline std::vector<FrameResult> OfflineFrames(const Parameters& p, std::span<const double> a,
                                              std::span<const double> b) {
  if (a.size() != b.size()) throw Error("OfflineFrames: channel lengths differ");
  const std::size_t hops = a.size() / kHopSamples;
  std::vector<FrameResult> out;
  std::vector<double> wa(kContextSamples), wb(kContextSamples);
  for (std::size_t t = 0; t < hops; ++t) {
    const std::ptrdiff_t end = static_cast<std::ptrdiff_t>((t + 1) * kHopSamples);
    const std::ptrdiff_t begin = end - static_cast<std::ptrdiff_t>(kContextSamples);
    for (std::size_t i = 0; i < kContextSamples; ++i) {
      std::ptrdiff_t k = begin + static_cast<std::ptrdiff_t>(i);
      wa[i] = k >= 0 ? a[static_cast<std::size_t>(k)] : 0.0;
      wb[i] = k >= 0 ? b[static_cast<std::size_t>(k)] : 0.0;
    }
    auto res = Forward(p, ExtractFeatures(Waveform(wa)), ExtractFeatures(Waveform(wb)));
    out.push_back(ResultFromOutput(res, res.frames() - 1, static_cast<std::int64_t>(t)));
  }
  return out;
}

}  // namespace mcvap
