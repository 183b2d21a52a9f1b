// mcvap/train.hpp

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

// Targets, context windows, gradient checking, training and per-SNR
// evaluation.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mcvap/codebook.hpp"
#include "mcvap/features.hpp"
#include "mcvap/model.hpp"
#include "mcvap/noise_mix.hpp"

namespace mcvap {

struct DialogueItem {
  std::string id;
  StereoDialogue audio;
};
using Dataset = std::vector<DialogueItem>;

/// Per-hop targets for a whole dialogue. Hop t covers audio up to
/// (t + 1) * 100 ms; its projection target is the 2 s of labels after that.
struct DialogueTargets {
  std::vector<int> state;  // -1 where the horizon overruns the recording
  Eigen::MatrixXd vad;     // hops x 2

  std::size_t hops() const { return state.size(); }
};

inline DialogueTargets ComputeTargets(const StereoDialogue& d, const BinConfig& bins = {}) {
  d.Validate();
  const std::size_t hops = FeatureExtractor::FrameCount(d.channel_a.size());
  const std::size_t labels = d.vad_a.size();
  constexpr std::size_t kLabelsPerHop = kHopSamples / kLabelHop;
  DialogueTargets t;
  t.state.assign(hops, -1);
  t.vad = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(hops), 2);
  const std::span<const std::uint8_t> va(d.vad_a.active), vb(d.vad_b.active);
  for (std::size_t h = 0; h < hops; ++h) {
    const std::size_t e = (h + 1) * kLabelsPerHop;
    for (int s = 0; s < 2; ++s) {
      const auto& tr = s == 0 ? va : vb;
      std::size_t act = 0;
      for (std::size_t f = e - kLabelsPerHop; f < e && f < labels; ++f) act += tr[f] ? 1 : 0;
      t.vad(static_cast<Eigen::Index>(h), s) = 2 * act >= kLabelsPerHop ? 1.0 : 0.0;
    }
    if (e + kHorizonLabelFrames <= labels)
      t.state[h] = EncodeState(WindowFromLabels(va.subspan(e, kHorizonLabelFrames),
                                                vb.subspan(e, kHorizonLabelFrames), bins))
                       .value();
  }
  return t;
}

/// Builds the context window of `frames` hops starting at hop `start`
/// (negative starts are left-padded with silence) from precomputed sub-frame
/// power for each channel.
inline FrameBatch MakeWindow(const Eigen::MatrixXd& power_a, const Eigen::MatrixXd& power_b,
                             const DialogueTargets& targets, Eigen::Index start, int frames,
                             const FeatureExtractor& fx = DefaultFeatureExtractor()) {
  const Eigen::Index end = start + frames;
  if (end > power_a.rows()) throw Error("MakeWindow: window beyond end of audio");
  const Eigen::Index begin = std::max<Eigen::Index>(start, 0);
  const Eigen::Index pad = begin - start;
  FrameBatch b;
  b.features_a = FeatureMatrix::Constant(frames, fx.bands(), std::log(kLogFloor));
  b.features_b = b.features_a;
  b.features_a.bottomRows(frames - pad) = fx.FromSubframes(power_a, begin, end);
  b.features_b.bottomRows(frames - pad) = fx.FromSubframes(power_b, begin, end);
  b.target_state.assign(frames, 0);
  b.target_vad = Eigen::MatrixXd::Zero(frames, 2);
  b.mask.assign(frames, 0);
  for (Eigen::Index i = pad; i < frames; ++i) {
    const auto h = static_cast<std::size_t>(start + i);
    if (targets.state[h] < 0) continue;
    b.target_state[i] = targets.state[h];
    b.target_vad.row(i) = targets.vad.row(static_cast<Eigen::Index>(h));
    b.mask[i] = 1;
  }
  return b;
}

/// Window starts covering every hop that has a target, beginning at
/// `phase` (in (-frames, 0]) and stepping by `frames`.
inline std::vector<Eigen::Index> WindowStarts(const DialogueTargets& t, int frames,
                                              Eigen::Index phase = 0) {
  std::vector<Eigen::Index> starts;
  const auto hops = static_cast<Eigen::Index>(t.hops());
  Eigen::Index last_target = -1;
  for (Eigen::Index h = 0; h < hops; ++h)
    if (t.state[static_cast<std::size_t>(h)] >= 0) last_target = h;
  if (last_target < 0 || hops < frames) return starts;
  Eigen::Index s = phase;
  for (; s + frames <= hops && s <= last_target; s += frames) starts.push_back(s);
  if (s <= last_target) starts.push_back(hops - frames);
  return starts;
}

// ---------------------------------------------------------------------------
// Gradient checking.

struct GradCheckEntry {
  std::string tensor;
  Eigen::Index index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::vector<GradCheckEntry> entries;
};

/// Relative error between an analytic and a central-difference derivative.
/// A coordinate with zero analytic gradient and |numeric| < 1e-8 passes.
inline double GradRelError(double analytic, double numeric) {
  if (analytic == 0.0 && std::abs(numeric) < 1e-8) return 0.0;
  double denom = std::max(std::abs(analytic), std::abs(numeric));
  if (denom == 0.0) return 0.0;
  return std::abs(analytic - numeric) / denom;
}

/// Compares `analytic` against central finite differences of the total loss
/// at `samples` random coordinates (uniform over all parameters).
inline GradCheckReport CompareGradients(Parameters p, const FrameBatch& batch,
                                        const Parameters::Map& analytic, int samples,
                                        std::uint64_t seed, double step = 1e-4) {
  std::vector<std::pair<std::string, Eigen::Index>> coords;
  for (const auto& [name, m] : p.tensors())
    for (Eigen::Index i = 0; i < m.size(); ++i) coords.emplace_back(name, i);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, coords.size() - 1);
  GradCheckReport rep;
  for (int k = 0; k < samples; ++k) {
    const auto& [name, idx] = coords[pick(rng)];
    double& x = p.at(name).data()[idx];
    const double orig = x;
    x = orig + step;
    double lp = LossAndGradient(p, batch, nullptr).total;
    x = orig - step;
    double lm = LossAndGradient(p, batch, nullptr).total;
    x = orig;
    GradCheckEntry e{name, idx, analytic.at(name).data()[idx], (lp - lm) / (2 * step), 0.0};
    e.rel_error = GradRelError(e.analytic, e.numeric);
    rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

inline GradCheckReport GradCheck(const Parameters& p, const FrameBatch& batch, int samples = 24,
                                 std::uint64_t seed = 7, double step = 1e-4) {
  if (batch.frames() > 10) throw Error("GradCheck: batch must have at most 10 frames");
  auto grads = ZeroGradients(p);
  LossAndGradient(p, batch, &grads);
  return CompareGradients(p, batch, grads, samples, seed, step);
}

// ---------------------------------------------------------------------------
// Training.

enum class AugmentMode { kClean, kMultiCondition };

inline std::string ToString(AugmentMode m) {
  return m == AugmentMode::kClean ? "clean" : "mc";
}
inline AugmentMode ParseAugmentMode(const std::string& s) {
  if (s == "clean") return AugmentMode::kClean;
  if (s == "mc" || s == "multi-condition") return AugmentMode::kMultiCondition;
  throw Error("unknown augmentation mode '" + s + "' (expected clean or mc)");
}

struct TrainConfig {
  int epochs = 50;
  double lr = 0.1;
  double lr_decay = 0.98;  // per epoch
  int batch_windows = 8;
  double clip_norm = 1.0;
  AugmentMode mode = AugmentMode::kMultiCondition;
  std::vector<double> snr_set = DefaultTrainingSnrs();
  /// Probability of silencing the robot channel of a training dialogue.
  double zero_robot_prob = 0.0;
  std::uint64_t seed = 1;

  nlohmann::json ToJson() const {
    nlohmann::json snrs = nlohmann::json::array();
    for (double s : snr_set) {
      if (IsClean(s)) snrs.push_back("clean");
      else snrs.push_back(s);
    }
    return {{"epochs", epochs}, {"lr", lr}, {"lr_decay", lr_decay},
            {"batch_windows", batch_windows}, {"clip_norm", clip_norm},
            {"mode", ToString(mode)}, {"snr_set", snrs},
            {"zero_robot_prob", zero_robot_prob}, {"seed", seed}};
  }
  static TrainConfig FromJson(const nlohmann::json& j) {
    TrainConfig c;
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.lr_decay = j.value("lr_decay", c.lr_decay);
    c.batch_windows = j.value("batch_windows", c.batch_windows);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    if (j.contains("mode")) c.mode = ParseAugmentMode(j["mode"].get<std::string>());
    if (j.contains("snr_set")) {
      c.snr_set.clear();
      for (const auto& v : j["snr_set"])
        c.snr_set.push_back(v.is_string() ? kCleanSnr : v.get<double>());
    }
    c.zero_robot_prob = j.value("zero_robot_prob", c.zero_robot_prob);
    c.seed = j.value("seed", c.seed);
    return c;
  }
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;
  LossBreakdown valid;
};

struct TrainResult {
  Parameters params;  // best on validation
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

class TrainingDiverged : public Error {
 public:
  using Error::Error;
};

inline void WriteHistoryCsv(const std::vector<EpochRecord>& h, std::ostream& os) {
  os << "epoch,train_L,train_L_vap,train_L_vad,valid_L,valid_L_vap,valid_L_vad\n";
  os.precision(10);
  for (const auto& r : h)
    os << r.epoch << ',' << r.train.total << ',' << r.train.vap << ',' << r.train.vad << ','
       << r.valid.total << ',' << r.valid.vap << ',' << r.valid.vad << '\n';
}

namespace train_detail {

/// Sub-frame power for both channels of one (possibly augmented) dialogue.
struct Prepared {
  Eigen::MatrixXd power_a;
  Eigen::MatrixXd power_b;
  const DialogueTargets* targets = nullptr;
};

struct LossAccumulator {
  double total = 0, vap = 0, vad = 0;
  double weight = 0;
  void Add(const LossBreakdown& l, double w) {
    total += w * l.total;
    vap += w * l.vap;
    vad += w * l.vad;
    weight += w;
  }
  LossBreakdown Mean() const {
    if (weight == 0) return {};
    return {total / weight, vap / weight, vad / weight};
  }
};

inline void CheckFinite(const LossBreakdown& l, int epoch, const std::string& where) {
  if (!std::isfinite(l.total))
    throw TrainingDiverged("training diverged: non-finite loss in " + where + " at epoch " +
                           std::to_string(epoch) + " (L_vap=" + std::to_string(l.vap) +
                           ", L_vad=" + std::to_string(l.vad) + ")");
}

}  // namespace train_detail

/// Frame-weighted loss over fixed windows (phase 0) of a set of prepared
/// dialogues.
inline LossBreakdown EvaluateWindows(const Parameters& p,
                                     const std::vector<train_detail::Prepared>& items) {
  train_detail::LossAccumulator acc;
  const int T = p.config().context_frames;
  for (const auto& it : items) {
    for (auto s : WindowStarts(*it.targets, T, 0)) {
      auto b = MakeWindow(it.power_a, it.power_b, *it.targets, s, T);
      int n = b.target_count();
      if (n == 0) continue;
      acc.Add(Loss(Forward(p, b), b), n);
    }
  }
  return acc.Mean();
}

/// Seeded gradient-descent training with per-epoch augmentation of the user
/// channel. Returns the parameters with the lowest validation loss.
inline TrainResult Fit(const Dataset& train, const Dataset& valid, const ModelConfig& mcfg,
                       const TrainConfig& tcfg, const NoiseBank& bank,
                       const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  using train_detail::Prepared;
  if (train.empty() || valid.empty()) throw Error("Fit: empty dataset");
  if (tcfg.mode == AugmentMode::kMultiCondition) bank.Validate();
  const FeatureExtractor& fx = DefaultFeatureExtractor();
  const int T = mcfg.context_frames;

  std::vector<DialogueTargets> train_targets, valid_targets;
  std::vector<Eigen::MatrixXd> train_power_a, train_power_b;
  for (const auto& it : train) {
    train_targets.push_back(ComputeTargets(it.audio));
    train_power_a.push_back(fx.SubframePower(it.audio.channel_a.samples()));
    train_power_b.push_back(fx.SubframePower(it.audio.channel_b.samples()));
  }
  for (const auto& it : valid) valid_targets.push_back(ComputeTargets(it.audio));

  // Validation uses one fixed condition per item drawn from the training set
  // of conditions (all clean in clean mode).
  std::vector<Prepared> valid_prep;
  for (std::size_t i = 0; i < valid.size(); ++i) {
    StereoDialogue d = valid[i].audio;
    if (tcfg.mode == AugmentMode::kMultiCondition) {
      std::mt19937_64 rng(DeriveSeed(tcfg.seed, "valid:" + valid[i].id));
      auto c = SampleCondition(rng, bank, tcfg.snr_set);
      ApplyConditionToUser(d, bank, c, rng);
    }
    valid_prep.push_back({fx.SubframePower(d.channel_a.samples()),
                          fx.SubframePower(d.channel_b.samples()), &valid_targets[i]});
  }

  // One augmented view of every training dialogue for `epoch`.
  auto prepare_epoch = [&](int epoch) {
    std::vector<Prepared> out(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
      std::mt19937_64 rng(DeriveSeed(tcfg.seed, static_cast<std::uint64_t>(epoch), i));
      std::uniform_real_distribution<double> coin(0.0, 1.0);
      out[i].targets = &train_targets[i];
      if (tcfg.mode == AugmentMode::kMultiCondition) {
        auto c = SampleCondition(rng, bank, tcfg.snr_set);
        if (c.is_clean()) {
          out[i].power_a = train_power_a[i];
        } else {
          StereoDialogue d = train[i].audio;
          ApplyConditionToUser(d, bank, c, rng);
          out[i].power_a = fx.SubframePower(d.channel_a.samples());
        }
      } else {
        out[i].power_a = train_power_a[i];
      }
      if (coin(rng) < tcfg.zero_robot_prob)
        out[i].power_b = Eigen::MatrixXd::Zero(train_power_b[i].rows(), train_power_b[i].cols());
      else
        out[i].power_b = train_power_b[i];
    }
    return out;
  };

  TrainResult res;
  Parameters p = InitParameters(mcfg);
  res.params = p;
  double best_valid = std::numeric_limits<double>::infinity();

  {
    EpochRecord r0;
    r0.epoch = 0;
    r0.train = EvaluateWindows(p, prepare_epoch(0));
    r0.valid = EvaluateWindows(p, valid_prep);
    train_detail::CheckFinite(r0.train, 0, "train");
    res.history.push_back(r0);
    best_valid = r0.valid.total;
    if (on_epoch) on_epoch(r0);
  }

  std::mt19937_64 order_rng(DeriveSeed(tcfg.seed, "order"));
  double lr = tcfg.lr;
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    auto prep = prepare_epoch(epoch);
    std::vector<std::pair<std::size_t, Eigen::Index>> windows;
    for (std::size_t i = 0; i < prep.size(); ++i) {
      std::uniform_int_distribution<Eigen::Index> ph(-(T - 1), 0);
      std::mt19937_64 rng(DeriveSeed(tcfg.seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(epoch), i));
      for (auto s : WindowStarts(*prep[i].targets, T, ph(rng))) windows.emplace_back(i, s);
    }
    std::shuffle(windows.begin(), windows.end(), order_rng);

    train_detail::LossAccumulator acc;
    for (std::size_t b0 = 0; b0 < windows.size(); b0 += tcfg.batch_windows) {
      const std::size_t b1 = std::min(windows.size(), b0 + tcfg.batch_windows);
      auto grads = ZeroGradients(p);
      const double w = 1.0 / static_cast<double>(b1 - b0);
      for (std::size_t k = b0; k < b1; ++k) {
        const auto& [i, s] = windows[k];
        auto batch = MakeWindow(prep[i].power_a, prep[i].power_b, *prep[i].targets, s, T);
        if (batch.target_count() == 0) continue;
        auto l = LossAndGradient(p, batch, &grads, w);
        train_detail::CheckFinite(l, epoch, "train");
        acc.Add(l, batch.target_count());
      }
      double norm2 = 0.0;
      for (const auto& [n, g] : grads) norm2 += g.squaredNorm();
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm))
        throw TrainingDiverged("training diverged: non-finite gradient at epoch " +
                               std::to_string(epoch));
      const double scale = norm > tcfg.clip_norm ? tcfg.clip_norm / norm : 1.0;
      for (auto& [n, g] : grads) p.at(n) -= lr * scale * g;
      if (mcfg.tie_channels) p.at("vad.w").row(1) = p.at("vad.w").row(0);
    }
    lr *= tcfg.lr_decay;

    EpochRecord r;
    r.epoch = epoch;
    r.train = acc.Mean();
    r.valid = EvaluateWindows(p, valid_prep);
    train_detail::CheckFinite(r.valid, epoch, "validation");
    res.history.push_back(r);
    if (r.valid.total < best_valid) {
      best_valid = r.valid.total;
      res.params = p;
      res.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(r);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Per-SNR evaluation.

struct SnrRow {
  double snr_db = kCleanSnr;
  double l_vap = 0.0;
  int frames = 0;
};

/// Mean L_vap over the test set with noise added to the user channel at
/// each SNR. Noise clip and offset are fixed per (item, SNR) by `seed`.
inline std::vector<SnrRow> EvalPerSnr(const Parameters& p, const Dataset& test,
                                      const std::vector<double>& snrs, const NoiseBank& bank,
                                      std::uint64_t seed) {
  if (test.empty()) throw Error("EvalPerSnr: empty test set");
  const FeatureExtractor& fx = DefaultFeatureExtractor();
  const int T = p.config().context_frames;
  std::vector<DialogueTargets> targets;
  std::vector<Eigen::MatrixXd> power_b;
  for (const auto& it : test) {
    targets.push_back(ComputeTargets(it.audio));
    power_b.push_back(fx.SubframePower(it.audio.channel_b.samples()));
  }
  std::vector<SnrRow> rows;
  for (double snr : snrs) {
    double sum = 0.0;
    int frames = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
      StereoDialogue d = test[i].audio;
      if (!IsClean(snr)) {
        std::mt19937_64 rng(DeriveSeed(seed, test[i].id + "@" + SnrLabel(snr)));
        std::uniform_int_distribution<std::size_t> pick(0, bank.size() - 1);
        Condition c{bank.entries[pick(rng)].first, snr};
        ApplyConditionToUser(d, bank, c, rng);
      }
      auto pa = fx.SubframePower(d.channel_a.samples());
      for (auto s : WindowStarts(targets[i], T, 0)) {
        auto b = MakeWindow(pa, power_b[i], targets[i], s, T);
        int n = b.target_count();
        if (n == 0) continue;
        sum += Loss(Forward(p, b), b).vap * n;
        frames += n;
      }
    }
    if (frames == 0) throw Error("EvalPerSnr: no target frames in test set");
    rows.push_back({snr, sum / frames, frames});
  }
  return rows;
}

}  // namespace mcvap
