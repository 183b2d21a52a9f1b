// mcvap/dataset.hpp

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

// On-disk dialogue corpus:
//
//   <dir>/manifest.json        ids, generation settings, train/valid/test split
//   <dir>/<id>_user.wav        16-bit mono, 16 kHz
//   <dir>/<id>_robot.wav
//   <dir>/<id>.labels.json     VAD segments (10 ms frames, [begin, end)) and turns

#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcvap/dialogue.hpp"
#include "mcvap/noise_mix.hpp"
#include "mcvap/train.hpp"

namespace mcvap {

inline nlohmann::json VadSegments(const VadTrack& t) {
  nlohmann::json segs = nlohmann::json::array();
  for (std::size_t i = 0; i < t.size();) {
    if (!t[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < t.size() && t[j]) ++j;
    segs.push_back({i, j});
    i = j;
  }
  return segs;
}

inline VadTrack VadFromSegments(const nlohmann::json& segs, std::size_t frames) {
  VadTrack t(frames);
  for (const auto& s : segs) {
    auto b = s.at(0).get<std::size_t>(), e = s.at(1).get<std::size_t>();
    if (b > e || e > frames) throw Error("labels: segment out of range");
    for (std::size_t f = b; f < e; ++f) t.active[f] = 1;
  }
  return t;
}

inline nlohmann::json TurnToJson(const UserTurn& t) {
  return {{"start_s", t.start_s},          {"end_s", t.end_s},
          {"robot_start_s", t.robot_start_s}, {"robot_end_s", t.robot_end_s},
          {"user_reaction_s", t.user_reaction_s}, {"pauses", t.pauses},
          {"has_final_cue", t.has_final_cue}};
}

inline UserTurn TurnFromJson(const nlohmann::json& j) {
  UserTurn t;
  t.start_s = j.at("start_s").get<double>();
  t.end_s = j.at("end_s").get<double>();
  t.robot_start_s = j.at("robot_start_s").get<double>();
  t.robot_end_s = j.at("robot_end_s").get<double>();
  t.user_reaction_s = j.value("user_reaction_s", 0.0);
  t.pauses = j.value("pauses", 0);
  t.has_final_cue = j.value("has_final_cue", false);
  return t;
}

inline std::string DialogueId(std::size_t i) {
  std::ostringstream os;
  os << "dlg" << std::setw(4) << std::setfill('0') << i;
  return os.str();
}

struct CorpusSpec {
  std::size_t n_dialogues = 200;
  DialogueScript script;  // script.seed is the base seed; dialogue i uses base + i
  std::uint64_t split_seed = 42;
};

/// Renders and writes a corpus; returns the manifest.
inline nlohmann::json WriteCorpus(const std::filesystem::path& dir, const CorpusSpec& spec) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw Error("cannot create dataset directory " + dir.string());
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < spec.n_dialogues; ++i) {
    DialogueScript s = spec.script;
    s.seed = spec.script.seed + i;
    auto d = GenerateDialogue(s);
    const std::string id = DialogueId(i);
    SaveWav(d.audio.channel_a, dir / (id + "_user.wav"));
    SaveWav(d.audio.channel_b, dir / (id + "_robot.wav"));
    nlohmann::json labels{{"frame_rate", VadTrack::frame_rate()},
                          {"frames", d.audio.vad_a.size()},
                          {"user", VadSegments(d.audio.vad_a)},
                          {"robot", VadSegments(d.audio.vad_b)},
                          {"turns", nlohmann::json::array()}};
    for (const auto& t : d.turns) labels["turns"].push_back(TurnToJson(t));
    std::ofstream(dir / (id + ".labels.json")) << labels.dump(1) << '\n';
    ids.push_back(id);
  }
  auto split = SplitDataset(ids, spec.split_seed);
  nlohmann::json m{{"format", "mcvap-corpus"},
                   {"version", 1},
                   {"n_dialogues", spec.n_dialogues},
                   {"script", spec.script.ToJson()},
                   {"split_seed", spec.split_seed},
                   {"items", ids},
                   {"split", {{"train", split.train}, {"valid", split.valid}, {"test", split.test}}}};
  std::ofstream os(dir / "manifest.json");
  os << m.dump(1) << '\n';
  if (!os) throw Error("cannot write " + (dir / "manifest.json").string());
  return m;
}

inline nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline nlohmann::json ReadManifest(const std::filesystem::path& dir) {
  auto m = ReadJsonFile(dir / "manifest.json");
  if (m.value("format", "") != "mcvap-corpus")
    throw Error(dir.string() + "/manifest.json is not a corpus manifest");
  return m;
}

inline SyntheticDialogue LoadDialogue(const std::filesystem::path& dir, const std::string& id) {
  SyntheticDialogue d;
  d.audio.channel_a = LoadWav(dir / (id + "_user.wav"));
  d.audio.channel_b = LoadWav(dir / (id + "_robot.wav"));
  auto labels = ReadJsonFile(dir / (id + ".labels.json"));
  const auto frames = labels.at("frames").get<std::size_t>();
  d.audio.vad_a = VadFromSegments(labels.at("user"), frames);
  d.audio.vad_b = VadFromSegments(labels.at("robot"), frames);
  for (const auto& t : labels.at("turns")) d.turns.push_back(TurnFromJson(t));
  d.audio.Validate();
  return d;
}

/// Loads one split ("train", "valid" or "test").
inline Dataset LoadSplit(const std::filesystem::path& dir, const std::string& split) {
  auto m = ReadManifest(dir);
  if (!m.at("split").contains(split)) throw Error("manifest has no split '" + split + "'");
  Dataset out;
  for (const auto& id : m.at("split").at(split)) {
    auto s = id.get<std::string>();
    out.push_back({s, LoadDialogue(dir, s).audio});
  }
  return out;
}

}  // namespace mcvap
