// tests/test_cli.cpp

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

// Drives the mcvap binary end to end in a scratch directory.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mcvap/mcvap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = fs::temp_directory_path() / "mcvap_cli_test";
    fs::remove_all(root_);
    fs::create_directories(root_);
    ASSERT_EQ(Run("synth-data --data " + Data() + " -n 10 --set data.script.n_turns=1"), 0);
  }
  static void TearDownTestSuite() { fs::remove_all(root_); }

  static int Run(const std::string& args) {
    std::string cmd = std::string(MCVAP_CLI_PATH) + " " + args + " >" + (root_ / "out.txt").string() +
                      " 2>" + (root_ / "err.txt").string();
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  static std::string Data() { return (root_ / "data").string(); }
  static std::string Dir(const std::string& name) { return (root_ / name).string(); }
  static std::vector<std::string> Lines(const fs::path& p) {
    std::ifstream is(p);
    std::vector<std::string> v;
    for (std::string l; std::getline(is, l);) v.push_back(l);
    return v;
  }
  static std::string Slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
  }
  // Trains once and reuses the checkpoint.
  static std::string Checkpoint() {
    static bool done = false;
    const std::string run = Dir("train_run");
    if (!done) {
      EXPECT_EQ(Run("train --data " + Data() + " --run-dir " + run + " --epochs 1"), 0);
      done = true;
    }
    return run + "/checkpoint.json";
  }

  static fs::path root_;
};

fs::path Cli::root_;

}  // namespace

TEST_F(Cli, SynthDataSplitAndDeterminism) {
  auto m = json::parse(Slurp(root_ / "data" / "manifest.json"));
  EXPECT_EQ(m["split"]["train"].size(), 8u);
  EXPECT_EQ(m["split"]["valid"].size(), 1u);
  EXPECT_EQ(m["split"]["test"].size(), 1u);
  EXPECT_TRUE(fs::exists(root_ / "data" / "config.json"));
  ASSERT_EQ(Run("synth-data --data " + Dir("data2") + " -n 10 --set data.script.n_turns=1"), 0);
  EXPECT_EQ(Slurp(root_ / "data" / "manifest.json"), Slurp(root_ / "data2" / "manifest.json"));
}

TEST_F(Cli, ConfigErrorsExitTwo) {
  {
    std::ofstream bad(root_ / "bad.json");
    bad << "{ not json";
  }
  EXPECT_EQ(Run("train -c " + (root_ / "bad.json").string()), 2);
  EXPECT_EQ(Run("train -c " + Dir("no_such.json")), 2);
  EXPECT_EQ(Run("train --set model.heads=3"), 2);
  EXPECT_EQ(Run("train --mode sometimes"), 2);
  EXPECT_EQ(Run("simulate --policies stt,fast"), 2);
  EXPECT_EQ(Run("stream"), 2);
  EXPECT_EQ(Run("frobnicate"), 2);
}

TEST_F(Cli, RuntimeErrorsExitThree) {
  EXPECT_EQ(Run("train --data " + Dir("nowhere") + " --run-dir " + Dir("r1")), 3);
  EXPECT_EQ(Run("eval --data " + Data() + " --run-dir " + Dir("r2") + " --checkpoint " +
                Dir("missing.json")),
            3);
  EXPECT_EQ(Run("stream --run-dir " + Dir("r3") + " -i " + Dir("missing.wav") + " --checkpoint " +
                Checkpoint()),
            3);
}

TEST_F(Cli, TrainWritesRunDirectory) {
  const fs::path run = fs::path(Checkpoint()).parent_path();
  for (const char* f : {"config.json", "checkpoint.json", "history.csv", "stats.json"})
    EXPECT_TRUE(fs::exists(run / f)) << f;
  auto h = Lines(run / "history.csv");
  ASSERT_EQ(h.size(), 3u);
  EXPECT_EQ(h[0], "epoch,train_L,train_L_vap,train_L_vad,valid_L,valid_L_vap,valid_L_vad");
  EXPECT_EQ(h[1].substr(0, 2), "0,");
  auto cfg = json::parse(Slurp(run / "config.json"));
  EXPECT_EQ(cfg["train"]["epochs"], 1);
}

TEST_F(Cli, EvalTable) {
  ASSERT_EQ(Run("eval --data " + Data() + " --run-dir " + Dir("eval_run") + " --checkpoint mc=" +
                Checkpoint()),
            0);
  auto rows = Lines(root_ / "eval_run" / "eval.csv");
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0], "snr,mc,uniform");
  EXPECT_EQ(rows[1].substr(0, 6), "clean,");
}

TEST_F(Cli, StreamOneLinePerHop) {
  mcvap::DialogueScript s;
  s.n_turns = 2;
  auto d = mcvap::GenerateDialogue(s);
  std::vector<double> x(d.audio.channel_a.vec().begin(), d.audio.channel_a.vec().begin() + 160000);
  mcvap::SaveWav(mcvap::Waveform(x), root_ / "in.wav");
  ASSERT_EQ(Run("stream --run-dir " + Dir("stream_run") + " -i " + (root_ / "in.wav").string() +
                " --checkpoint " + Checkpoint()),
            0);
  auto frames = Lines(root_ / "stream_run" / "frames.jsonl");
  ASSERT_EQ(frames.size(), 100u);
  auto f = json::parse(frames[99]);
  EXPECT_EQ(f["frame_index"], 99);
  ASSERT_EQ(Run("stream --run-dir " + Dir("stream_run2") + " -i " + (root_ / "in.wav").string() +
                " --checkpoint " + Checkpoint() + " --stdout"),
            0);
  EXPECT_EQ(Lines(root_ / "out.txt").size(), 100u);
}

TEST_F(Cli, BenchStats) {
  ASSERT_EQ(Run("bench --run-dir " + Dir("bench_run") + " --ticks 20"), 0);
  auto st = json::parse(Slurp(root_ / "bench_run" / "stats.json"));
  EXPECT_EQ(st["ticks"], 20);
  EXPECT_TRUE(st["within_budget"].get<bool>());
  EXPECT_GT(st["mean_ms"].get<double>(), 0.0);
}

TEST_F(Cli, SimulateTwoPolicies) {
  ASSERT_EQ(Run("simulate --run-dir " + Dir("sim_run") + " --policies stt,hybrid -n 3 --checkpoint " +
                Checkpoint()),
            0);
  auto st = json::parse(Slurp(root_ / "sim_run" / "stats.json"));
  EXPECT_EQ(st["policies"].size(), 2u);
  EXPECT_EQ(st["comparisons"].size(), 1u);
  EXPECT_EQ(Lines(root_ / "sim_run" / "records.jsonl").size(), 18u);
  for (const char* f : {"records.csv", "hist_stt_robot.csv", "hist_hybrid_user.csv", "config.json"})
    EXPECT_TRUE(fs::exists(root_ / "sim_run" / f)) << f;
}

TEST_F(Cli, SimulateWithoutModelWhenVapDisabled) {
  ASSERT_EQ(Run("simulate --run-dir " + Dir("sim_off") + " -n 2 --set session.vap.enabled=false"), 0);
  auto st = json::parse(Slurp(root_ / "sim_off" / "stats.json"));
  EXPECT_EQ(st["policies"]["hybrid"]["vap_source_fraction"], 0.0);
  EXPECT_EQ(st["policies"]["vap"]["decided"], 0);
  EXPECT_EQ(Run("simulate --run-dir " + Dir("sim_nomodel") + " -n 2 --checkpoint " +
                Dir("missing.json")),
            3);
}
