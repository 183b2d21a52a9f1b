// mcvap/stats.hpp

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

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <span>
#include <vector>

#include <json.hpp>

#include "mcvap/audio.hpp"

namespace mcvap {

struct Descriptive {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double stddev = 0.0;  // sample (n - 1) estimate; 0 for a single value

  nlohmann::json ToJson() const {
    return {{"n", n}, {"mean", mean}, {"median", median}, {"stddev", stddev}};
  }
};

inline Descriptive Describe(std::span<const double> x) {
  if (x.empty()) throw Error("Describe: empty sample");
  Descriptive d;
  d.n = x.size();
  d.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(d.n);
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  d.median = d.n % 2 ? s[d.n / 2] : 0.5 * (s[d.n / 2 - 1] + s[d.n / 2]);
  if (d.n > 1) {
    double ss = 0.0;
    for (double v : x) ss += (v - d.mean) * (v - d.mean);
    d.stddev = std::sqrt(ss / static_cast<double>(d.n - 1));
  }
  return d;
}

/// Fixed-width histogram over [lo, hi). Values outside are counted in
/// underflow/overflow.
struct Histogram {
  double lo = 0.0;
  double width = 0.25;
  std::vector<std::size_t> counts;
  std::size_t underflow = 0;
  std::size_t overflow = 0;

  Histogram() = default;
  Histogram(double lo_, double hi, double width_) : lo(lo_), width(width_) {
    if (!(width_ > 0) || !(hi > lo_)) throw Error("Histogram: invalid range");
    counts.assign(static_cast<std::size_t>(std::llround((hi - lo_) / width_)), 0);
  }

  double hi() const { return lo + width * static_cast<double>(counts.size()); }

  void Add(double v) {
    if (v < lo) {
      ++underflow;
      return;
    }
    auto k = static_cast<std::size_t>(std::floor((v - lo) / width));
    if (k >= counts.size()) {
      ++overflow;
      return;
    }
    ++counts[k];
  }
  std::size_t total() const {
    return std::accumulate(counts.begin(), counts.end(), underflow + overflow);
  }

  void WriteCsv(std::ostream& os) const {
    os << "bin_start,count\n";
    for (std::size_t k = 0; k < counts.size(); ++k)
      os << lo + width * static_cast<double>(k) << ',' << counts[k] << '\n';
  }
  nlohmann::json ToJson() const {
    return {{"lo", lo}, {"width", width}, {"counts", counts},
            {"underflow", underflow}, {"overflow", overflow}};
  }
};

/// Response-time histogram layout: 0.25 s bins over [0, 6) s.
inline Histogram ResponseHistogram() { return Histogram(0.0, 6.0, 0.25); }

struct RankSumResult {
  double u = 0.0;  // Mann-Whitney U of the first sample
  double z = 0.0;
  double p = 1.0;  // two-sided

  nlohmann::json ToJson() const { return {{"u", u}, {"z", z}, {"p", p}}; }
};

/// Two-sided Mann-Whitney rank-sum test, normal approximation with tie and
/// continuity corrections.
inline RankSumResult RankSum(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error("RankSum: both samples must be non-empty");
  const double n1 = static_cast<double>(a.size()), n2 = static_cast<double>(b.size());
  std::vector<std::pair<double, int>> all;
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end());

  double r1 = 0.0, tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].second == 0) r1 += rank;
    i = j;
  }
  RankSumResult r;
  r.u = r1 - n1 * (n1 + 1) / 2.0;
  const double n = n1 + n2;
  const double mu = n1 * n2 / 2.0;
  const double var = n1 * n2 / 12.0 * ((n + 1) - tie_term / (n * (n - 1)));
  if (var <= 0) return r;  // every value tied
  const double diff = r.u - mu;
  const double cc = diff > 0 ? -0.5 : (diff < 0 ? 0.5 : 0.0);
  r.z = (diff + cc) / std::sqrt(var);
  r.p = std::min(1.0, std::erfc(std::abs(r.z) / std::sqrt(2.0)));
  return r;
}

}  // namespace mcvap
