// mcvap/codebook.hpp

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

// The projection-state codebook. The next 2 s are split into four bins; each
// speaker is active or not in each bin, giving 2^(2*4) = 256 classes. Bit
// layout: user bins in the low nibble, robot bins in the high nibble, bin 0
// least significant.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>

#include "mcvap/audio.hpp"

namespace mcvap {

inline constexpr int kNumSpeakers = 2;
inline constexpr int kNumBins = 4;
inline constexpr int kNumStates = 256;
/// Label frames in the 2 s projection horizon.
inline constexpr int kHorizonLabelFrames = 200;

enum Speaker : int { kUser = 0, kRobot = 1 };

struct BinConfig {
  std::array<double, kNumBins> boundaries_s{0.2, 0.6, 1.2, 2.0};
  double activity_ratio = 0.5;

  void Validate() const {
    for (int i = 1; i < kNumBins; ++i)
      if (!(boundaries_s[i] > boundaries_s[i - 1]))
        throw Error("BinConfig: boundaries must be strictly ascending");
    if (boundaries_s[0] <= 0.0) throw Error("BinConfig: first boundary must be positive");
    if (std::abs(boundaries_s[kNumBins - 1] - 2.0) > 1e-12)
      throw Error("BinConfig: last boundary must be 2.0 s");
    if (!(activity_ratio > 0.0 && activity_ratio <= 1.0))
      throw Error("BinConfig: activity ratio must be in (0, 1]");
  }

  /// Label-frame [begin, end) of bin i, relative to the prediction frame.
  std::pair<int, int> LabelRange(int bin) const {
    int b = bin == 0 ? 0 : static_cast<int>(std::lround(boundaries_s[bin - 1] * 100.0));
    int e = static_cast<int>(std::lround(boundaries_s[bin] * 100.0));
    return {b, e};
  }
};

struct ProjectionWindow {
  std::array<std::array<bool, kNumBins>, kNumSpeakers> bits{};

  bool at(int speaker, int bin) const { return bits[speaker][bin]; }
  void set(int speaker, int bin, bool v) { bits[speaker][bin] = v; }
  bool operator==(const ProjectionWindow&) const = default;
};

class StateIndex {
 public:
  constexpr StateIndex() = default;
  explicit StateIndex(int v) : value_(v) {
    if (v < 0 || v >= kNumStates)
      throw Error("StateIndex: " + std::to_string(v) + " outside 0..255");
  }
  constexpr int value() const { return value_; }
  constexpr bool operator==(const StateIndex&) const = default;

 private:
  int value_ = 0;
};

inline StateIndex EncodeState(const ProjectionWindow& w) {
  int v = 0;
  for (int s = 0; s < kNumSpeakers; ++s)
    for (int i = 0; i < kNumBins; ++i)
      if (w.at(s, i)) v |= 1 << (4 * s + i);
  return StateIndex(v);
}

inline ProjectionWindow DecodeState(StateIndex idx) {
  ProjectionWindow w;
  for (int s = 0; s < kNumSpeakers; ++s)
    for (int i = 0; i < kNumBins; ++i) w.set(s, i, (idx.value() >> (4 * s + i)) & 1);
  return w;
}
inline ProjectionWindow DecodeState(int idx) { return DecodeState(StateIndex(idx)); }

/// Builds the target window from the 200 label frames following a
/// prediction frame. Throws when either slice is shorter than the horizon;
/// callers drop such frames from training.
inline ProjectionWindow WindowFromLabels(std::span<const std::uint8_t> vad_a,
                                         std::span<const std::uint8_t> vad_b,
                                         const BinConfig& cfg = {}) {
  if (vad_a.size() < kHorizonLabelFrames || vad_b.size() < kHorizonLabelFrames)
    throw Error("WindowFromLabels: label slice shorter than the 2 s horizon");
  ProjectionWindow w;
  const std::span<const std::uint8_t> tracks[2] = {vad_a, vad_b};
  for (int s = 0; s < kNumSpeakers; ++s) {
    for (int i = 0; i < kNumBins; ++i) {
      auto [b, e] = cfg.LabelRange(i);
      int active = 0;
      for (int f = b; f < e; ++f) active += tracks[s][f] ? 1 : 0;
      // active / (e - b) >= ratio, with the boundary counting as active.
      double need = cfg.activity_ratio * (e - b);
      w.set(s, i, active >= need - 1e-9);
    }
  }
  return w;
}

/// A 256-way distribution over projection states.
struct VapDistribution {
  std::array<double, kNumStates> probs{};

  static VapDistribution Uniform() {
    VapDistribution d;
    d.probs.fill(1.0 / kNumStates);
    return d;
  }
  double sum() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }
  bool normalized(double tol = 1e-6) const { return std::abs(sum() - 1.0) <= tol; }
};

namespace codebook_detail {

/// Per-state share of each speaker's activity across bins 0 and 1.
struct NearActivityTable {
  std::array<std::array<double, kNumStates>, kNumSpeakers> share{};
  NearActivityTable() {
    for (int idx = 0; idx < kNumStates; ++idx) {
      for (int s = 0; s < kNumSpeakers; ++s) {
        int bits = ((idx >> (4 * s)) & 1) + ((idx >> (4 * s + 1)) & 1);
        share[s][idx] = bits / 2.0;
      }
    }
  }
};

inline const NearActivityTable& Table() {
  static const NearActivityTable t;
  return t;
}

}  // namespace codebook_detail

/// Probability that `speaker` holds the turn over the next 600 ms (bins 0
/// and 1), normalized against the other speaker. 0.5 when neither speaker
/// carries any near-term mass.
inline double PNow(std::span<const double> probs, int speaker) {
  const auto& t = codebook_detail::Table();
  double a[2] = {0.0, 0.0};
  for (int idx = 0; idx < kNumStates; ++idx) {
    a[0] += probs[idx] * t.share[0][idx];
    a[1] += probs[idx] * t.share[1][idx];
  }
  double total = a[0] + a[1];
  if (total < 1e-9) return 0.5;
  return a[speaker] / total;
}
inline double PNow(const VapDistribution& d, int speaker) { return PNow(d.probs, speaker); }

}  // namespace mcvap
