// mcvap/noise_mix.hpp

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

// Multi-condition augmentation: noise superposition at an exact SNR, random
// (noise, SNR) condition draws and the seeded 8:1:1 dataset split.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mcvap/audio.hpp"

namespace mcvap {

/// SNR value standing for "no noise added".
inline constexpr double kCleanSnr = std::numeric_limits<double>::infinity();

inline bool IsClean(double snr_db) { return std::isinf(snr_db) && snr_db > 0; }

inline std::string SnrLabel(double snr_db) {
  if (IsClean(snr_db)) return "clean";
  return std::to_string(static_cast<int>(std::lround(snr_db)));
}

/// Default augmentation set: clean plus the four noisy SNRs, drawn uniformly.
inline std::vector<double> DefaultTrainingSnrs() { return {kCleanSnr, 5, 10, 15, 20}; }
inline std::vector<double> NoisySnrs() { return {5, 10, 15, 20}; }
/// Evaluation rows, in table order.
inline std::vector<double> EvalSnrs() { return {kCleanSnr, 20, 15, 10, 5}; }

struct Condition {
  std::string noise_name;
  double snr_db = kCleanSnr;

  bool is_clean() const { return IsClean(snr_db); }
  bool operator==(const Condition&) const = default;
};

struct NoiseBank {
  std::vector<std::pair<std::string, Waveform>> entries;

  bool empty() const { return entries.empty(); }
  std::size_t size() const { return entries.size(); }

  const Waveform& Find(const std::string& name) const {
    for (const auto& [n, w] : entries)
      if (n == name) return w;
    throw Error("NoiseBank: no entry named '" + name + "'");
  }

  void Validate() const {
    if (entries.empty()) throw Error("NoiseBank: empty");
    for (const auto& [n, w] : entries)
      if (w.size() < static_cast<std::size_t>(kSampleRate))
        throw Error("NoiseBank: clip '" + n + "' is shorter than 1 s");
  }
};

/// Derives a per-item seed from a global seed and an item key (SplitMix64
/// finalizer over an FNV-1a hash of the key).
inline std::uint64_t DeriveSeed(std::uint64_t global, const std::string& key) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::uint64_t z = global + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline std::uint64_t DeriveSeed(std::uint64_t global, std::uint64_t a, std::uint64_t b = 0) {
  return DeriveSeed(global, std::to_string(a) + ":" + std::to_string(b));
}

/// Gain applied to the noise so that P_signal / (g^2 P_noise) hits `snr_db`.
inline double NoiseGain(double signal_power, double noise_power, double snr_db) {
  if (IsClean(snr_db)) return 0.0;
  return std::sqrt(signal_power / (noise_power * std::pow(10.0, snr_db / 10.0)));
}

/// Noise tiled (wrapping) to `length` samples starting at `offset`.
inline std::vector<double> TileNoise(const Waveform& noise, std::size_t length,
                                     std::size_t offset = 0) {
  if (noise.empty()) throw Error("TileNoise: empty noise");
  std::vector<double> out(length);
  auto s = noise.samples();
  std::size_t k = offset % s.size();
  for (std::size_t i = 0; i < length; ++i) {
    out[i] = s[k];
    if (++k == s.size()) k = 0;
  }
  return out;
}

struct MixResult {
  Waveform mixed;
  double gain = 0.0;
  std::size_t clipped = 0;
};

/// signal + g * noise at the requested SNR; noise is tiled/truncated to the
/// signal length from `noise_offset`. Power is measured over the tiled
/// segment actually added.
inline MixResult MixAtSnr(const Waveform& signal, const Waveform& noise, double snr_db,
                          std::size_t noise_offset = 0) {
  if (IsClean(snr_db)) return {signal, 0.0, 0};
  if (signal.empty() || noise.empty()) throw Error("MixAtSnr: empty input");
  double ps = RmsPower(signal);
  if (ps <= 0.0) throw Error("MixAtSnr: silent signal, SNR undefined");
  auto tiled = TileNoise(noise, signal.size(), noise_offset);
  double pn = RmsPower(tiled);
  if (pn <= 0.0) throw Error("MixAtSnr: silent noise, SNR undefined");
  MixResult r;
  r.gain = NoiseGain(ps, pn, snr_db);
  std::vector<double> out(signal.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = signal[i] + r.gain * tiled[i];
  r.clipped = ClipInPlace(out);
  r.mixed = Waveform(std::move(out));
  return r;
}

inline Condition SampleCondition(std::mt19937_64& rng, const NoiseBank& bank,
                                 const std::vector<double>& snr_set) {
  if (bank.empty()) throw Error("SampleCondition: empty noise bank");
  if (snr_set.empty()) throw Error("SampleCondition: empty SNR set");
  std::uniform_int_distribution<std::size_t> pick_noise(0, bank.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_snr(0, snr_set.size() - 1);
  Condition c;
  c.noise_name = bank.entries[pick_noise(rng)].first;
  c.snr_db = snr_set[pick_snr(rng)];
  return c;
}

/// Applies a condition to `signal`, drawing the tiling offset from `rng`.
/// Silent signals are returned unchanged (nothing to reference the SNR to).
inline MixResult ApplyCondition(const Waveform& signal, const NoiseBank& bank,
                                const Condition& c, std::mt19937_64& rng) {
  if (c.is_clean() || signal.empty()) return {signal, 0.0, 0};
  const Waveform& noise = bank.Find(c.noise_name);
  std::uniform_int_distribution<std::size_t> pick(0, noise.size() - 1);
  std::size_t offset = pick(rng);
  if (RmsPower(signal) <= 0.0) return {signal, 0.0, 0};
  return MixAtSnr(signal, noise, c.snr_db, offset);
}

/// Adds a noise condition to the user channel (the robot channel is left
/// untouched). Returns the number of clipped samples.
inline std::size_t ApplyConditionToUser(StereoDialogue& d, const NoiseBank& bank,
                                        const Condition& c, std::mt19937_64& rng) {
  auto r = ApplyCondition(d.channel_a, bank, c, rng);
  d.channel_a = std::move(r.mixed);
  return r.clipped;
}

struct DatasetSplit {
  std::vector<std::string> train, valid, test;
};

/// Seeded shuffle then round(0.8n) / round(0.1n) / remainder.
inline DatasetSplit SplitDataset(std::vector<std::string> items, std::uint64_t seed) {
  if (items.size() < 10) throw Error("SplitDataset: need at least 10 items");
  std::mt19937_64 rng(seed);
  std::shuffle(items.begin(), items.end(), rng);
  const auto n = static_cast<double>(items.size());
  auto n_train = static_cast<std::size_t>(std::lround(0.8 * n));
  auto n_valid = static_cast<std::size_t>(std::lround(0.1 * n));
  DatasetSplit s;
  s.train.assign(items.begin(), items.begin() + n_train);
  s.valid.assign(items.begin() + n_train, items.begin() + n_train + n_valid);
  s.test.assign(items.begin() + n_train + n_valid, items.end());
  return s;
}

/// One line of the augmentation manifest.
struct ConditionRecord {
  std::string item_id;
  Condition condition;
  std::uint64_t seed = 0;

  nlohmann::json ToJson() const {
    nlohmann::json j;
    j["item_id"] = item_id;
    j["noise_name"] = condition.is_clean() ? std::string() : condition.noise_name;
    if (condition.is_clean())
      j["snr_db"] = "clean";
    else
      j["snr_db"] = condition.snr_db;
    j["seed"] = seed;
    return j;
  }
  static ConditionRecord FromJson(const nlohmann::json& j) {
    ConditionRecord r;
    r.item_id = j.at("item_id").get<std::string>();
    r.condition.noise_name = j.at("noise_name").get<std::string>();
    const auto& s = j.at("snr_db");
    r.condition.snr_db = s.is_string() ? kCleanSnr : s.get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  }
};

// ---------------------------------------------------------------------------
// Synthetic noise bank.

namespace noise_detail {

inline std::vector<double> Gaussian(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = g(rng);
  return x;
}

inline void NormalizeRms(std::vector<double>& x, double target_rms) {
  double p = RmsPower(x);
  if (p <= 0) return;
  double k = target_rms / std::sqrt(p);
  for (auto& v : x) v *= k;
}

}  // namespace noise_detail

inline std::vector<std::string> SyntheticNoiseTypes() {
  return {"white", "pink", "brown", "babble", "hum"};
}

/// Deterministic stand-ins for environmental noise recordings, RMS 0.1.
inline Waveform MakeSyntheticNoise(const std::string& type, double seconds, std::uint64_t seed) {
  using namespace noise_detail;
  std::mt19937_64 rng(DeriveSeed(seed, type));
  const auto n = static_cast<std::size_t>(seconds * kSampleRate);
  std::vector<double> x;
  if (type == "white") {
    x = Gaussian(n, rng);
  } else if (type == "pink") {
    // Paul Kellet's economy pink filter.
    auto w = Gaussian(n, rng);
    x.resize(n);
    double b0 = 0, b1 = 0, b2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      b0 = 0.99765 * b0 + w[i] * 0.0990460;
      b1 = 0.96300 * b1 + w[i] * 0.2965164;
      b2 = 0.57000 * b2 + w[i] * 1.0526913;
      x[i] = b0 + b1 + b2 + w[i] * 0.1848;
    }
  } else if (type == "brown") {
    auto w = Gaussian(n, rng);
    x.resize(n);
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      acc = 0.995 * acc + 0.1 * w[i];
      x[i] = acc;
    }
  } else if (type == "babble") {
    // Several overlapping talkers: coloured noise under syllable-rate envelopes.
    x.assign(n, 0.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int talker = 0; talker < 6; ++talker) {
      auto w = Gaussian(n, rng);
      double pole = 0.3 + 0.6 * u(rng);
      double rate = 3.0 + 3.0 * u(rng);
      double phase = 2 * std::numbers::pi * u(rng);
      double lp = 0.0, prev = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        lp = pole * lp + (1 - pole) * w[i];
        double hp = lp - 0.9 * prev;
        prev = lp;
        double t = static_cast<double>(i) / kSampleRate;
        double env = 0.5 + 0.5 * std::sin(2 * std::numbers::pi * rate * t + phase);
        x[i] += env * env * hp;
      }
    }
  } else if (type == "hum") {
    auto w = Gaussian(n, rng);
    x.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / kSampleRate;
      double h = 0;
      for (int k = 1; k <= 5; ++k) h += std::sin(2 * std::numbers::pi * 50.0 * k * t) / k;
      x[i] = h + 0.2 * w[i];
    }
  } else {
    throw Error("MakeSyntheticNoise: unknown type '" + type + "'");
  }
  NormalizeRms(x, 0.1);
  ClipInPlace(x);
  return Waveform(std::move(x));
}

inline NoiseBank MakeSyntheticNoiseBank(std::uint64_t seed, double seconds = 8.0) {
  NoiseBank bank;
  for (const auto& t : SyntheticNoiseTypes())
    bank.entries.emplace_back(t, MakeSyntheticNoise(t, seconds, seed));
  return bank;
}

/// Every *.wav in `dir` (sorted by filename), keyed by file stem.
inline NoiseBank LoadNoiseBank(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error("LoadNoiseBank: not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  NoiseBank bank;
  for (const auto& f : files) bank.entries.emplace_back(f.stem().string(), LoadWav(f));
  bank.Validate();
  return bank;
}

}  // namespace mcvap
