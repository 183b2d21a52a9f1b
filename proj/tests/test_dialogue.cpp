// tests/test_dialogue.cpp

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

#include <filesystem>

#include "mcvap/dataset.hpp"
#include "mcvap/dialogue.hpp"

using namespace mcvap;

TEST(Dialogue, NoTurnsIsEmpty) {
  DialogueScript s;
  s.n_turns = 0;
  auto d = GenerateDialogue(s);
  EXPECT_TRUE(d.turns.empty());
  EXPECT_EQ(d.audio.channel_a.size(), 0u);
  EXPECT_EQ(d.audio.vad_a.size(), 0u);
}

TEST(Dialogue, SeedDeterminism) {
  DialogueScript s;
  s.seed = 77;
  auto a = GenerateDialogue(s), b = GenerateDialogue(s);
  EXPECT_EQ(a.audio.channel_a, b.audio.channel_a);
  EXPECT_EQ(a.audio.channel_b, b.audio.channel_b);
  EXPECT_EQ(a.audio.vad_a, b.audio.vad_a);
  s.seed = 78;
  EXPECT_NE(GenerateDialogue(s).audio.channel_a, a.audio.channel_a);
}

TEST(Dialogue, TurnStructure) {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    DialogueScript s;
    s.seed = seed;
    auto d = GenerateDialogue(s);
    ASSERT_EQ(d.turns.size(), 3u);
    double prev_end = 0.0;
    for (const auto& t : d.turns) {
      EXPECT_GE(t.start_s, prev_end);
      EXPECT_LT(t.start_s, t.end_s);
      EXPECT_LT(t.end_s, t.robot_start_s);
      EXPECT_LT(t.robot_start_s, t.robot_end_s);
      EXPECT_GE(t.robot_start_s - t.end_s, 0.15 - 1e-9);
      // User labels end exactly at the turn end; nothing until the next turn.
      auto f = static_cast<std::size_t>(std::lround(t.end_s * 100));
      EXPECT_TRUE(d.audio.vad_a[f - 1]);
      EXPECT_FALSE(d.audio.vad_a[f]);
      prev_end = t.robot_end_s;
    }
    EXPECT_GE(d.audio.duration(), d.turns.back().robot_end_s + s.tail_silence_s - 0.01);
    EXPECT_NO_THROW(d.audio.Validate());
  }
}

TEST(Dialogue, PauseStructure) {
  int counts[4] = {0, 0, 0, 0};
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    DialogueScript s;
    s.seed = seed;
    s.max_pauses = 3;
    auto d = GenerateDialogue(s);
    for (const auto& t : d.turns) {
      // Recover the user's speech runs inside the turn from the labels.
      const auto b = static_cast<std::size_t>(std::lround(t.start_s * 100));
      const auto e = static_cast<std::size_t>(std::lround(t.end_s * 100));
      std::vector<std::pair<std::size_t, std::size_t>> runs;
      for (std::size_t f = b; f < e; ++f) {
        if (!d.audio.vad_a[f]) continue;
        if (runs.empty() || runs.back().second != f) runs.push_back({f, f});
        runs.back().second = f + 1;
      }
      ASSERT_EQ(runs.size(), static_cast<std::size_t>(t.pauses) + 1);
      ASSERT_LE(t.pauses, s.max_pauses);
      ++counts[t.pauses];
      std::size_t spoken = 0;
      for (std::size_t k = 0; k < runs.size(); ++k) {
        spoken += runs[k].second - runs[k].first;
        EXPECT_GE(runs[k].second - runs[k].first, 30u);
        if (k > 0) {
          const double gap = (runs[k].first - runs[k - 1].second) / 100.0;
          EXPECT_GE(gap, s.pause_s.min - 0.011);
          EXPECT_LE(gap, s.pause_s.max + 0.011);
        }
      }
      EXPECT_GE(spoken / 100.0, s.user_utterance_s.min - 0.011);
      EXPECT_LE(spoken / 100.0, s.user_utterance_s.max + 0.011);
    }
  }
  // Geometric with p = 0.5 over 300 turns, capped at 3 pauses and by turn length.
  EXPECT_GT(counts[0], 110);
  EXPECT_LT(counts[0], 190);
  EXPECT_GT(counts[1], 40);
  EXPECT_GT(counts[2], 10);
  EXPECT_GT(counts[3], 0);
  DialogueScript none;
  none.pause_prob = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    none.seed = seed;
    for (const auto& t : GenerateDialogue(none).turns) EXPECT_EQ(t.pauses, 0);
  }
}

TEST(Dialogue, LabelsAgreeWithEnergy) {
  std::size_t agree = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    DialogueScript s;
    s.seed = seed;
    auto d = GenerateDialogue(s);
    for (int ch = 0; ch < 2; ++ch) {
      const auto& w = ch == 0 ? d.audio.channel_a : d.audio.channel_b;
      const auto& lab = ch == 0 ? d.audio.vad_a : d.audio.vad_b;
      auto est = VadFromEnergy(w, -45.0, 0.0);
      ASSERT_EQ(est.size(), lab.size());
      for (std::size_t f = 0; f < lab.size(); ++f) agree += est[f] == lab[f];
      total += lab.size();
    }
  }
  EXPECT_GE(static_cast<double>(agree) / static_cast<double>(total), 0.99);
}

TEST(Dialogue, SpeakersHaveDistinctSpectra) {
  DialogueScript s;
  s.seed = 5;
  auto d = GenerateDialogue(s);
  // Fraction of power in the upper half of the band, per channel.
  auto tilt = [](const Waveform& w) {
    double hi = 0.0, all = 0.0;
    for (std::size_t i = 1; i < w.size(); ++i) {
      double diff = w[i] - w[i - 1];
      hi += diff * diff;
      all += w[i] * w[i];
    }
    return hi / all;
  };
  EXPECT_GT(std::abs(tilt(d.audio.channel_a) - tilt(d.audio.channel_b)), 0.1);
}

TEST(DialogueScript, JsonRoundTripAndValidation) {
  DialogueScript s;
  s.seed = 9;
  s.user_reaction_s.mean = 2.61;
  auto j = s.ToJson();
  EXPECT_EQ(DialogueScript::FromJson(j).ToJson(), j);
  s.user_utterance_s = {0.0, 1.0};
  EXPECT_THROW(s.Validate(), Error);
  s = {};
  s.pause_prob = 1.5;
  EXPECT_THROW(s.Validate(), Error);
  s = {};
  s.max_pauses = -1;
  EXPECT_THROW(s.Validate(), Error);
}

TEST(TruncNormal, StaysInRange) {
  TruncNormal t{2.35, 0.8, 0.3, 5.0};
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    double v = t.Sample(rng);
    ASSERT_GE(v, 0.3);
    ASSERT_LE(v, 5.0);
  }
}

TEST(Corpus, WriteAndReload) {
  auto dir = std::filesystem::temp_directory_path() / "mcvap_corpus_test";
  std::filesystem::remove_all(dir);
  CorpusSpec spec;
  spec.n_dialogues = 10;
  spec.script.n_turns = 1;
  auto m = WriteCorpus(dir, spec);
  EXPECT_EQ(m["split"]["train"].size(), 8u);
  EXPECT_EQ(m["split"]["valid"].size(), 1u);
  EXPECT_EQ(m["split"]["test"].size(), 1u);
  auto d = LoadDialogue(dir, "dlg0003");
  DialogueScript s = spec.script;
  s.seed = spec.script.seed + 3;
  auto ref = GenerateDialogue(s);
  EXPECT_EQ(d.audio.vad_a, ref.audio.vad_a);
  EXPECT_EQ(d.audio.vad_b, ref.audio.vad_b);
  ASSERT_EQ(d.turns.size(), 1u);
  EXPECT_EQ(d.turns[0].end_s, ref.turns[0].end_s);
  for (std::size_t i = 0; i < d.audio.channel_a.size(); ++i)
    ASSERT_LE(std::abs(d.audio.channel_a[i] - ref.audio.channel_a[i]), 1.0 / 32768);
  EXPECT_EQ(LoadSplit(dir, "train").size(), 8u);
  EXPECT_THROW(LoadSplit(dir, "dev"), Error);
  EXPECT_THROW(ReadManifest(dir / "missing"), Error);
}
