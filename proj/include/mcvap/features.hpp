// mcvap/features.hpp

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

// Fixed log-mel frontend. One feature vector per 100 ms hop; each vector
// summarizes the 400 ms ending at the hop boundary, as the Welch average of
// four Hann-windowed 100 ms sub-frame power spectra. Audio before the start
// of the input counts as silence.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mcvap/audio.hpp"

namespace mcvap {

inline constexpr int kHopSamples = 1600;       // 100 ms
inline constexpr int kSubframesPerWindow = 4;  // 400 ms analysis window
inline constexpr int kFftSize = 2048;
inline constexpr int kSpectrumBins = kFftSize / 2 + 1;
inline constexpr int kDefaultMelBands = 40;
inline constexpr double kMelLowHz = 20.0;
inline constexpr double kMelHighHz = 8000.0;
inline constexpr double kLogFloor = 1e-10;

/// Feature matrix: one row per 100 ms frame, one column per mel band.
using FeatureMatrix = Eigen::MatrixXd;

inline double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double MelToHz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// In-place iterative radix-2 FFT.
class Fft {
 public:
  explicit Fft(int n) : n_(n), twiddle_(n / 2), rev_(n) {
    if (n < 2 || (n & (n - 1)) != 0) throw Error("Fft: size must be a power of two");
    for (int k = 0; k < n / 2; ++k)
      twiddle_[k] = std::polar(1.0, -2.0 * std::numbers::pi * k / n);
    int bits = 0;
    while ((1 << bits) < n) ++bits;
    for (int i = 0; i < n; ++i) {
      int r = 0;
      for (int b = 0; b < bits; ++b)
        if (i & (1 << b)) r |= 1 << (bits - 1 - b);
      rev_[i] = r;
    }
  }

  int size() const { return n_; }

  void Forward(std::vector<std::complex<double>>& x) const {
    for (int i = 0; i < n_; ++i)
      if (i < rev_[i]) std::swap(x[i], x[rev_[i]]);
    for (int len = 2; len <= n_; len <<= 1) {
      int step = n_ / len;
      for (int i = 0; i < n_; i += len) {
        for (int k = 0; k < len / 2; ++k) {
          auto t = twiddle_[k * step] * x[i + k + len / 2];
          x[i + k + len / 2] = x[i + k] - t;
          x[i + k] += t;
        }
      }
    }
  }

 private:
  int n_;
  std::vector<std::complex<double>> twiddle_;
  std::vector<int> rev_;
};

/// Triangular mel filters over the FFT bins, peak weight 1.
class MelBank {
 public:
  explicit MelBank(int bands = kDefaultMelBands, double low_hz = kMelLowHz,
                   double high_hz = kMelHighHz)
      : weights_(Eigen::MatrixXd::Zero(bands, kSpectrumBins)), centers_hz_(bands) {
    const double lo = HzToMel(low_hz), hi = HzToMel(high_hz);
    const double step = (hi - lo) / (bands + 1);
    for (int m = 0; m < bands; ++m) {
      double left = lo + step * m, center = left + step, right = center + step;
      centers_hz_[m] = MelToHz(center);
      for (int k = 0; k < kSpectrumBins; ++k) {
        double mel = HzToMel(static_cast<double>(k) * kSampleRate / kFftSize);
        double w = 0.0;
        if (mel > left && mel <= center)
          w = (mel - left) / (center - left);
        else if (mel > center && mel < right)
          w = (right - mel) / (right - center);
        weights_(m, k) = w;
      }
    }
  }

  int bands() const { return static_cast<int>(weights_.rows()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  double center_hz(int band) const { return centers_hz_[band]; }

 private:
  Eigen::MatrixXd weights_;
  std::vector<double> centers_hz_;
};

/// Computes the frontend. Instances are immutable after construction and
/// may be shared between threads.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(int bands = kDefaultMelBands)
      : fft_(kFftSize), mel_(bands), window_(kHopSamples) {
    double sum = 0.0;
    for (int i = 0; i < kHopSamples; ++i) {
      window_[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / kHopSamples);
      sum += window_[i];
    }
    // Scale so a full-scale sinusoid peaks near 0.5 in magnitude.
    for (auto& w : window_) w /= sum;
  }

  int bands() const { return mel_.bands(); }
  const MelBank& mel_bank() const { return mel_; }

  static std::size_t FrameCount(std::size_t samples) { return samples / kHopSamples; }

  /// Power spectrum of each complete 100 ms hop; rows are hops.
  Eigen::MatrixXd SubframePower(std::span<const double> samples) const {
    const auto hops = static_cast<Eigen::Index>(FrameCount(samples.size()));
    Eigen::MatrixXd power(hops, kSpectrumBins);
    std::vector<std::complex<double>> buf(kFftSize);
    for (Eigen::Index h = 0; h < hops; ++h) {
      std::fill(buf.begin(), buf.end(), std::complex<double>());
      const double* x = samples.data() + h * kHopSamples;
      for (int i = 0; i < kHopSamples; ++i) buf[i] = x[i] * window_[i];
      fft_.Forward(buf);
      for (int k = 0; k < kSpectrumBins; ++k) power(h, k) = std::norm(buf[k]);
    }
    return power;
  }

  /// Log-mel features for hops [begin, end) of a precomputed sub-frame power
  /// matrix, treating hops before `begin` as silent.
  FeatureMatrix FromSubframes(const Eigen::MatrixXd& power, Eigen::Index begin,
                              Eigen::Index end) const {
    FeatureMatrix out(end - begin, mel_.bands());
    Eigen::RowVectorXd avg(kSpectrumBins);
    for (Eigen::Index t = begin; t < end; ++t) {
      avg.setZero();
      for (Eigen::Index j = std::max(begin, t - kSubframesPerWindow + 1); j <= t; ++j)
        avg += power.row(j);
      avg /= kSubframesPerWindow;
      Eigen::RowVectorXd mag = avg.cwiseSqrt();
      Eigen::RowVectorXd mel = mag * mel_.weights().transpose();
      for (int m = 0; m < mel_.bands(); ++m)
        out(t - begin, m) = std::log(std::max(mel(m), kLogFloor));
    }
    return out;
  }

  FeatureMatrix Extract(std::span<const double> samples) const {
    auto power = SubframePower(samples);
    return FromSubframes(power, 0, power.rows());
  }
  FeatureMatrix Extract(const Waveform& w) const { return Extract(w.samples()); }

 private:
  Fft fft_;
  MelBank mel_;
  std::vector<double> window_;
};

inline const FeatureExtractor& DefaultFeatureExtractor() {
  static const FeatureExtractor fx;
  return fx;
}

inline FeatureMatrix ExtractFeatures(const Waveform& w) {
  return DefaultFeatureExtractor().Extract(w);
}

}  // namespace mcvap
