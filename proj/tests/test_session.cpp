// tests/test_session.cpp

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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "mcvap/session.hpp"

using namespace mcvap;

namespace {

// Two user turns whose ends sit on the 100 ms grid of their microphone
// window.
SyntheticDialogue AlignedDialogue() {
  SyntheticDialogue d;
  const std::size_t n = 16000 * 10;
  d.audio.channel_a = Waveform::Zeros(n);
  d.audio.channel_b = Waveform::Zeros(n);
  d.audio.vad_a = VadTrack(1000);
  d.audio.vad_b = VadTrack(1000);
  auto mark = [](VadTrack& t, int b, int e) {
    for (int i = b; i < e; ++i) t.active[i] = 1;
  };
  mark(d.audio.vad_a, 100, 250);
  mark(d.audio.vad_b, 280, 400);
  mark(d.audio.vad_a, 500, 620);
  mark(d.audio.vad_b, 650, 750);
  d.turns.push_back({1.0, 2.5, 2.8, 4.0, 1.0, false, false});
  d.turns.push_back({5.0, 6.2, 6.5, 7.5, 1.0, false, false});
  return d;
}

SyntheticDialogue Generated(std::uint64_t seed) {
  DialogueScript s;
  s.seed = seed;
  return GenerateDialogue(s);
}

SessionConfig ZeroDelayConfig() {
  SessionConfig c;
  c.stt.latency = {LatencyFamily::kConstant, 0.0, 0.0};
  return c;
}

// Exact two-sided Mann-Whitney p-value by counting rank arrangements.
double ExactRankSumP(int n1, int n2, double u) {
  // count[k][s]: ways to choose k of the first m ranks with U-contribution s.
  const int max_u = n1 * n2;
  std::vector<std::vector<double>> f(n1 + 1, std::vector<double>(max_u + 1, 0.0));
  f[0][0] = 1.0;
  for (int m = 1; m <= n1 + n2; ++m)
    for (int k = std::min(m, n1); k >= 1; --k) {
      const int shift = m - k;  // elements of the second sample below this one
      for (int s = max_u; s >= shift; --s) f[k][s] += f[k - 1][s - shift];
    }
  double total = 0.0, tail = 0.0;
  const double mu = max_u / 2.0, dev = std::abs(u - mu);
  for (int s = 0; s <= max_u; ++s) {
    total += f[n1][s];
    if (std::abs(s - mu) >= dev - 1e-9) tail += f[n1][s];
  }
  return tail / total;
}

}  // namespace

TEST(Session, SttOnlyZeroDelay) {
  auto cfg = ZeroDelayConfig();
  for (std::uint64_t seed : {1, 2, 3}) {
    auto recs = RunSession(Generated(seed), "g", Policy::kSttOnly, {}, cfg);
    ASSERT_EQ(recs.size(), 3u);
    for (const auto& r : recs) {
      EXPECT_EQ(r.source, DecisionSource::kStt);
      EXPECT_NEAR(*r.robot_response_s, 1.1, 1e-9);
      EXPECT_FALSE(r.cut_in);
    }
  }
}

TEST(Session, OracleEndpointerLatency) {
  SessionConfig cfg;
  auto d = AlignedDialogue();
  auto recs = RunSession(d, "a", Policy::kHybrid, OracleVapDecider(cfg.vap), cfg);
  ASSERT_EQ(recs.size(), 2u);
  for (const auto& r : recs) {
    EXPECT_EQ(r.source, DecisionSource::kVap);
    EXPECT_NEAR(*r.robot_response_s, cfg.vap.consecutive_k * 0.1 + 0.3, 1e-9);
  }
  // Unaligned ends add less than one hop.
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto d = Generated(seed);
    auto recs = RunSession(d, "g", Policy::kVapOnly, OracleVapDecider(cfg.vap), cfg);
    for (std::size_t i = 0; i < recs.size(); ++i) {
      ASSERT_TRUE(recs[i].robot_response_s);
      EXPECT_GE(*recs[i].robot_response_s, 0.6 - 1e-9);
      EXPECT_LT(*recs[i].robot_response_s, 0.7 - 1e-9);
    }
  }
}

TEST(Session, NoiseOnUserChannelOnly) {
  auto bank = MakeSyntheticNoiseBank(99, 2.0);
  const auto ref = Generated(3);
  auto d = ref;
  EXPECT_TRUE(ApplySessionNoise(d, "a", bank, {kCleanSnr}, 1).is_clean());
  EXPECT_EQ(d.audio.channel_a, ref.audio.channel_a);
  const Condition c = ApplySessionNoise(d, "a", bank, {10.0}, 1);
  EXPECT_EQ(c.snr_db, 10.0);
  EXPECT_EQ(d.audio.channel_b, ref.audio.channel_b);
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < d.audio.channel_a.size(); ++i) {
    const double n = d.audio.channel_a[i] - ref.audio.channel_a[i];
    ps += ref.audio.channel_a[i] * ref.audio.channel_a[i];
    pn += n * n;
  }
  EXPECT_NEAR(10.0 * std::log10(ps / pn), 10.0, 0.1);
  auto e = ref;
  ApplySessionNoise(e, "a", bank, {10.0}, 1);
  EXPECT_EQ(e.audio.channel_a, d.audio.channel_a);
  ApplySessionNoise(e = ref, "b", bank, {10.0}, 1);
  EXPECT_NE(e.audio.channel_a, d.audio.channel_a);
  EXPECT_THROW(ApplySessionNoise(e, "a", bank, {}, 1), Error);
}

TEST(Session, HybridNeverSlowerThanStt) {
  SessionConfig cfg;
  std::vector<double> hybrid, stt;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto recs = SimulateDialogue(Generated(seed), "g" + std::to_string(seed),
                                 {Policy::kSttOnly, Policy::kHybrid}, OracleVapDecider(cfg.vap), cfg);
    for (std::size_t i = 0; i < recs.size(); i += 2) {
      ASSERT_EQ(recs[i].turn_id, recs[i + 1].turn_id);
      ASSERT_LE(*recs[i + 1].robot_response_s, *recs[i].robot_response_s);
      stt.push_back(*recs[i].robot_response_s);
      hybrid.push_back(*recs[i + 1].robot_response_s);
    }
  }
  EXPECT_LT(Describe(hybrid).mean, Describe(stt).mean);
}

TEST(Session, ModelRequiredUnlessVapDisabled) {
  SessionConfig cfg;
  auto d = Generated(4);
  EXPECT_THROW(RunSession(d, "g", Policy::kHybrid, {}, cfg), Error);
  cfg.vap.enabled = false;
  auto recs = RunSession(d, "g", Policy::kHybrid, {}, cfg);
  for (const auto& r : recs) EXPECT_EQ(r.source, DecisionSource::kStt);
  EXPECT_EQ(Summarize(recs).vap_source_fraction, 0.0);
  for (const auto& r : RunSession(d, "g", Policy::kVapOnly, {}, cfg)) {
    EXPECT_EQ(r.source, DecisionSource::kNone);
    EXPECT_FALSE(r.robot_response_s);
  }
  EXPECT_THROW(ModelVapDecider(nullptr, cfg.vap), Error);
}

TEST(Session, Deterministic) {
  SessionConfig cfg;
  auto d = Generated(6);
  auto a = SimulateDialogue(d, "g", {Policy::kSttOnly, Policy::kHybrid}, OracleVapDecider(cfg.vap), cfg);
  auto b = SimulateDialogue(d, "g", {Policy::kSttOnly, Policy::kHybrid}, OracleVapDecider(cfg.vap), cfg);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].ToJson(), b[i].ToJson());
}

TEST(Session, UserReactionFollowsPolicy) {
  SessionConfig cfg;
  cfg.user_reaction_baseline_s = {2.61, 0.0, 0.0, 10.0};
  cfg.user_reaction_proposed_s = {2.35, 0.0, 0.0, 10.0};
  auto recs = SimulateDialogue(Generated(7), "g", {Policy::kSttOnly, Policy::kHybrid},
                               OracleVapDecider(cfg.vap), cfg);
  for (const auto& r : recs)
    EXPECT_DOUBLE_EQ(r.user_response_s, r.policy == Policy::kSttOnly ? 2.61 : 2.35);
}

TEST(Session, ModelDeciderStreams) {
  SessionConfig cfg;
  auto p = std::make_shared<const Parameters>(InitParameters({}));
  auto d = Generated(8);
  auto recs = RunSession(d, "g", Policy::kHybrid, ModelVapDecider(p, cfg.vap), cfg);
  ASSERT_EQ(recs.size(), 3u);
  for (const auto& r : recs) {
    ASSERT_TRUE(r.decision_time_s);
    EXPECT_GE(*r.robot_response_s, 0.0);
  }
}

TEST(Records, JsonAndCsv) {
  SessionConfig cfg;
  cfg.vap.enabled = false;
  auto recs = SimulateDialogue(Generated(9), "g", {Policy::kVapOnly, Policy::kSttOnly}, {}, cfg);
  EXPECT_TRUE(recs[0].ToJson()["robot_response_s"].is_null());
  EXPECT_EQ(recs[0].ToJson()["source"], "NONE");
  std::ostringstream os;
  WriteRecordsCsv(recs, os);
  std::istringstream in(os.str());
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1 + static_cast<int>(recs.size()));
}

TEST(Summarize, SingleAndConstant) {
  ResponseTimeRecord r;
  r.decision_time_s = 1.0;
  r.robot_response_s = 1.0;
  r.user_response_s = 1.0;
  auto s = Summarize({r});
  EXPECT_EQ(s.robot.mean, 1.0);
  EXPECT_EQ(s.robot.median, 1.0);
  EXPECT_EQ(s.robot.stddev, 0.0);
  auto many = Summarize(std::vector<ResponseTimeRecord>(25, r));
  int nonzero = 0;
  for (auto c : many.robot_hist.counts) nonzero += c > 0;
  EXPECT_EQ(nonzero, 1);
  EXPECT_EQ(many.robot_hist.counts[4], 25u);
  EXPECT_THROW(Summarize({}), Error);
}

TEST(Summarize, MatchesRecords) {
  SessionConfig cfg;
  std::vector<ResponseTimeRecord> recs;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto r = SimulateDialogue(Generated(seed), "g" + std::to_string(seed), {Policy::kHybrid},
                              OracleVapDecider(cfg.vap), cfg);
    recs.insert(recs.end(), r.begin(), r.end());
  }
  auto s = Summarize(recs);
  double sum = 0;
  for (const auto& r : recs) sum += *r.robot_response_s;
  EXPECT_NEAR(s.robot.mean, sum / static_cast<double>(recs.size()), 1e-12);
  EXPECT_EQ(s.robot_hist.total(), recs.size());
  std::size_t vap = 0;
  for (const auto& r : recs) vap += r.source == DecisionSource::kVap;
  EXPECT_DOUBLE_EQ(s.vap_source_fraction, static_cast<double>(vap) / static_cast<double>(recs.size()));
  EXPECT_GT(s.vap_source_fraction, 0.0);
}

TEST(Histogram, LayoutAndCsv) {
  auto h = ResponseHistogram();
  EXPECT_EQ(h.counts.size(), 24u);
  h.Add(-0.1);
  h.Add(0.0);
  h.Add(5.99);
  h.Add(6.0);
  EXPECT_EQ(h.underflow, 1u);
  EXPECT_EQ(h.overflow, 1u);
  EXPECT_EQ(h.counts.front(), 1u);
  EXPECT_EQ(h.counts.back(), 1u);
  std::ostringstream os;
  h.WriteCsv(os);
  EXPECT_EQ(os.str().substr(0, 20), "bin_start,count\n0,1\n");
}

TEST(RankSum, DisjointSamples) {
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back(i * 0.01);
    b.push_back(1.0 + i * 0.01);
  }
  auto r = RankSum(a, b);
  EXPECT_EQ(r.u, 0.0);
  EXPECT_LT(r.p, 0.001);
  EXPECT_LT(ExactRankSumP(30, 30, 0.0), 0.001);
  EXPECT_THROW(RankSum(a, {}), Error);
}

TEST(RankSum, NormalApproximationTracksExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int k = 0; k < 20; ++k) {
    std::vector<double> a(12), b(14);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = g(rng) + 0.5;
    auto r = RankSum(a, b);
    EXPECT_NEAR(r.p, ExactRankSumP(12, 14, r.u), 0.02);
    auto s = RankSum(b, a);
    EXPECT_DOUBLE_EQ(r.u + s.u, 12.0 * 14.0);
    EXPECT_NEAR(r.p, s.p, 1e-12);
  }
}

TEST(RankSum, TiesAndIdentity) {
  std::vector<double> a{1, 1, 1}, b{1, 1, 1, 1};
  EXPECT_EQ(RankSum(a, b).p, 1.0);
  std::vector<double> c{1, 2, 2, 3}, d{2, 3, 3, 4, 5};
  auto r = RankSum(c, d);
  EXPECT_GT(r.p, 0.0);
  EXPECT_LE(r.p, 1.0);
}

TEST(SessionConfig, JsonRoundTrip) {
  SessionConfig c;
  c.vap.theta = 0.7;
  auto j = c.ToJson();
  EXPECT_EQ(SessionConfig::FromJson(j).ToJson(), j);
  j["vap"]["theta"] = 0.4;
  EXPECT_THROW(SessionConfig::FromJson(j), Error);
  EXPECT_EQ(ParsePolicy("hybrid"), Policy::kHybrid);
  EXPECT_THROW(ParsePolicy("fast"), Error);
}
