// tests/test_endpointing.cpp

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

#include "mcvap/endpointing.hpp"

using namespace mcvap;

namespace {

std::vector<FrameResult> Series(const std::vector<double>& p_robot, double user_vad = 1.0) {
  std::vector<FrameResult> v;
  for (std::size_t i = 0; i < p_robot.size(); ++i) {
    FrameResult f;
    f.frame_index = static_cast<std::int64_t>(i);
    f.timestamp_s = 0.1 * static_cast<double>(i);
    f.p_now_robot = p_robot[i];
    f.p_now_user = 1 - p_robot[i];
    f.vad = {user_vad, 0.0};
    v.push_back(f);
  }
  return v;
}

// Direct search over every candidate end frame.
std::optional<double> BruteForceDecide(const std::vector<FrameResult>& f,
                                       const VapEndpointerConfig& c) {
  for (std::size_t t = 0; t < f.size(); ++t) {
    if (t + 1 < static_cast<std::size_t>(c.consecutive_k)) continue;
    bool run = true;
    for (std::size_t j = t + 1 - c.consecutive_k; j <= t; ++j) run = run && f[j].p_now_robot > c.theta;
    int speech = 0;
    for (std::size_t j = 0; j <= t; ++j) speech += f[j].vad[0] > c.user_vad_threshold;
    if (run && speech * 100.0 >= c.min_user_speech_ms) return f[t].timestamp_s;
  }
  return std::nullopt;
}

VadTrack Speech(int begin, int end, int n) {
  VadTrack t(static_cast<std::size_t>(n));
  for (int i = begin; i < end; ++i) t.active[i] = 1;
  return t;
}

}  // namespace

TEST(VapDecide, Examples) {
  VapEndpointerConfig c;
  EXPECT_FALSE(VapDecide(Series(std::vector<double>(60, 0.4)), c));
  std::vector<double> jump(60, 0.2);
  for (int i = 30; i < 60; ++i) jump[i] = 0.9;
  auto d = VapDecide(Series(jump), c);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 3.2, 1e-12);
  std::vector<double> blip(60, 0.2);
  blip[30] = blip[31] = 0.9;
  EXPECT_FALSE(VapDecide(Series(blip), c));
}

TEST(VapDecide, GuardNeedsUserSpeech) {
  VapEndpointerConfig c;
  EXPECT_FALSE(VapDecide(Series(std::vector<double>(20, 0.9), 0.0), c));
  // Two speech frames are not enough; three are.
  auto f = Series(std::vector<double>(20, 0.9), 0.0);
  f[0].vad[0] = f[1].vad[0] = 0.9;
  EXPECT_FALSE(VapDecide(f, c));
  f[5].vad[0] = 0.9;
  auto d = VapDecide(f, c);
  ASSERT_TRUE(d);
  EXPECT_NEAR(*d, 0.5, 1e-12);
}

TEST(VapDecide, DisabledNeverFires) {
  VapEndpointerConfig c;
  c.enabled = false;
  EXPECT_FALSE(VapDecide(Series(std::vector<double>(20, 0.99)), c));
}

TEST(VapDecide, MatchesBruteForceAndIsMonotoneInTheta) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 300; ++k) {
    std::vector<double> p(40);
    for (auto& v : p) v = u(rng);
    auto f = Series(p);
    for (auto& x : f) x.vad[0] = u(rng);
    std::optional<double> prev;
    bool fired_before = true;
    for (double theta : {0.55, 0.6, 0.7, 0.8, 0.9}) {
      VapEndpointerConfig c;
      c.theta = theta;
      c.consecutive_k = 1 + k % 3;
      auto d = VapDecide(f, c);
      auto o = BruteForceDecide(f, c);
      ASSERT_EQ(d.has_value(), o.has_value());
      if (d) {
        ASSERT_EQ(*d, *o);
      }
      // Raising theta never fires earlier, and never fires where a lower one did not.
      if (d) {
        ASSERT_TRUE(fired_before);
        if (prev) {
          ASSERT_GE(*d, *prev);
        }
      }
      fired_before = d.has_value();
      prev = d;
    }
  }
}

TEST(VapDecide, OnlineMatchesBatch) {
  std::vector<double> p(50, 0.3);
  for (int i = 20; i < 50; ++i) p[i] = 0.8;
  auto f = Series(p);
  OnlineVapEndpointer det;
  std::optional<double> online;
  for (const auto& x : f)
    if (!online) online = det.Feed(x);
  EXPECT_EQ(online, VapDecide(f, {}));
  det.Reset();
  EXPECT_FALSE(det.decision());
}

TEST(VapEndpointerConfig, Validation) {
  VapEndpointerConfig c;
  c.theta = 0.5;
  EXPECT_THROW(c.Validate(), Error);
  c.theta = 0.7;
  c.consecutive_k = 0;
  EXPECT_THROW(c.Validate(), Error);
}

TEST(SttDecide, Arithmetic) {
  SttSimConfig c;
  c.latency = {LatencyFamily::kConstant, 0.5, 0.0};
  std::mt19937_64 rng(1);
  EXPECT_NEAR(SttDecide(Speech(20, 100, 300), c, rng), 2.3, 1e-12);
  c.latency = {LatencyFamily::kConstant, 0.0, 0.0};
  EXPECT_NEAR(SttDecide(Speech(20, 100, 300), c, rng), 1.8, 1e-12);
  EXPECT_THROW(SttDecide(VadTrack(100), c, rng), Error);
}

TEST(SttDecide, LognormalMean) {
  LatencyModel m;
  std::mt19937_64 rng(2);
  double s = 0, s2 = 0;
  for (int i = 0; i < 10000; ++i) {
    double v = m.Sample(rng);
    ASSERT_GE(v, 0.0);
    s += v;
    s2 += v * v;
  }
  const double mean = s / 10000, sd = std::sqrt(s2 / 10000 - mean * mean);
  EXPECT_NEAR(mean, 0.6, 0.02);
  EXPECT_NEAR(sd, 0.3, 0.03);
}

TEST(SttDecide, NormalIsTruncatedAtZero) {
  LatencyModel m{LatencyFamily::kNormal, 0.1, 1.0};
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) ASSERT_GE(m.Sample(rng), 0.0);
}

TEST(Arbitrate, MinRuleAndTies) {
  auto e = Arbitrate(1.1, 2.3, 0.9, "t");
  EXPECT_EQ(e.source, DecisionSource::kVap);
  EXPECT_DOUBLE_EQ(e.decision_time_s, 1.1);
  EXPECT_NEAR(e.latency_s(), 0.2, 1e-12);
  e = Arbitrate(std::nullopt, 2.3);
  EXPECT_EQ(e.source, DecisionSource::kStt);
  EXPECT_DOUBLE_EQ(e.decision_time_s, 2.3);
  EXPECT_EQ(Arbitrate(2.3, 2.3).source, DecisionSource::kVap);
  EXPECT_EQ(Arbitrate(2.4, 2.3).source, DecisionSource::kStt);
}

TEST(Arbitrate, NeverLaterThanStt) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    double stt = u(rng);
    std::optional<double> vap;
    if (i % 3) vap = u(rng);
    ASSERT_LE(Arbitrate(vap, stt).decision_time_s, stt);
  }
}

TEST(TurnEvent, JsonLine) {
  auto j = Arbitrate(1.0, 2.0, 0.5, "d/0").ToJson();
  EXPECT_EQ(j["turn_id"], "d/0");
  EXPECT_EQ(j["source"], "VAP");
  EXPECT_DOUBLE_EQ(j["latency_s"].get<double>(), 0.5);
  EXPECT_EQ(j.dump().find('\n'), std::string::npos);
}

TEST(SttSimConfig, JsonRoundTrip) {
  SttSimConfig c;
  c.latency.family = LatencyFamily::kNormal;
  auto j = c.ToJson();
  EXPECT_EQ(SttSimConfig::FromJson(j).ToJson(), j);
  j["silence_threshold_ms"] = 0;
  EXPECT_THROW(SttSimConfig::FromJson(j), Error);
  j["silence_threshold_ms"] = 800;
  j["latency_model"]["family"] = "gamma";
  EXPECT_THROW(SttSimConfig::FromJson(j), Error);
}
