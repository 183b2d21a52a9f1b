// tools/mcvap.cpp

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

// Command-line driver: synth-data, train, eval, simulate, stream, bench.
//
// Every command resolves one JSON config (built-in defaults, then --config,
// then flags) and writes it to its output directory as config.json.
// Exit status: 0 success, 2 configuration error, 3 runtime error.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "mcvap/mcvap.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mcvap;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

json SnrToJson(double snr) { return IsClean(snr) ? json("clean") : json(snr); }
double SnrFromJson(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "clean") return kCleanSnr;
    throw ConfigError("SNR must be a number or \"clean\", got " + j.dump());
  }
  return j.get<double>();
}
std::vector<double> SnrListFromJson(const json& j) {
  if (!j.is_array()) return {SnrFromJson(j)};
  std::vector<double> out;
  for (const auto& v : j) out.push_back(SnrFromJson(v));
  return out;
}
json SnrListToJson(const std::vector<double>& v) {
  json a = json::array();
  for (double s : v) a.push_back(SnrToJson(s));
  return a;
}

json DefaultConfig() {
  DialogueScript script;
  script.seed = 1000;
  TrainConfig train;
  json t = train.ToJson();
  t["snr_set"] = SnrListToJson(train.snr_set);
  return {
      {"run_dir", "runs/default"},
      {"data", {{"dir", "data"}, {"n_dialogues", 200}, {"split_seed", 42}, {"script", script.ToJson()}}},
      {"noise", {{"dir", ""}, {"seed", 7}, {"seconds", 8.0}}},
      {"model", ModelConfig{}.ToJson()},
      {"train", t},
      {"eval",
       {{"checkpoints", json::array()}, {"snrs", SnrListToJson(EvalSnrs())}, {"seed", 99},
        {"noise_seed", 99}}},
      {"session", SessionConfig{}.ToJson()},
      {"simulate",
       {{"policies", {"stt", "hybrid", "vap"}},
        {"n_dialogues", 70},
        {"seed", 5000},
        {"snrs", SnrListToJson(SessionSnrs())},
        {"checkpoint", ""}}},
      {"stream",
       {{"input", ""}, {"input_robot", ""}, {"checkpoint", ""}, {"realtime", false},
        {"stdout", false}}},
      {"bench", {{"ticks", 100}, {"checkpoint", ""}, {"max_mean_ms", 100.0}}},
  };
}

/// Sets `path` ("a.b.c") in `j`. The value is parsed as JSON when possible
/// and taken as a string otherwise.
void SetPath(json& j, const std::string& path, const std::string& raw) {
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::exception&) {
    value = raw;
  }
  json* node = &j;
  std::size_t b = 0;
  while (true) {
    auto e = path.find('.', b);
    std::string key = path.substr(b, e == std::string::npos ? std::string::npos : e - b);
    if (key.empty()) throw ConfigError("bad override path '" + path + "'");
    if (e == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
    node = &(*node)[key];
    b = e + 1;
  }
}

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string run_dir;
  std::string data_dir;
};

json ResolveConfig(const Common& c, const std::vector<std::pair<std::string, std::string>>& extra) {
  json cfg = DefaultConfig();
  if (!c.config_path.empty()) {
    std::ifstream is(c.config_path);
    if (!is) throw ConfigError("cannot open config file " + c.config_path);
    json user;
    try {
      user = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("malformed config " + c.config_path + ": " + e.what());
    }
    if (!user.is_object()) throw ConfigError("config root must be an object");
    cfg.merge_patch(user);
  }
  if (!c.run_dir.empty()) cfg["run_dir"] = c.run_dir;
  if (!c.data_dir.empty()) cfg["data"]["dir"] = c.data_dir;
  for (const auto& [k, v] : extra) SetPath(cfg, k, v);
  for (const auto& s : c.sets) {
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    SetPath(cfg, s.substr(0, eq), s.substr(eq + 1));
  }
  return cfg;
}

/// Parsed sections. Any failure here is a configuration error.
struct Resolved {
  json raw;
  fs::path run_dir;
  fs::path data_dir;
  CorpusSpec corpus;
  ModelConfig model;
  TrainConfig train;
  SessionConfig session;
};

Resolved Parse(const json& cfg) {
  try {
    Resolved r;
    r.raw = cfg;
    r.run_dir = cfg.at("run_dir").get<std::string>();
    r.data_dir = cfg.at("data").at("dir").get<std::string>();
    const auto& d = cfg.at("data");
    r.corpus.n_dialogues = d.at("n_dialogues").get<std::size_t>();
    r.corpus.split_seed = d.at("split_seed").get<std::uint64_t>();
    r.corpus.script = DialogueScript::FromJson(d.at("script"));
    r.corpus.script.Validate();
    r.model = ModelConfig::FromJson(cfg.at("model"));
    r.model.Validate();
    json t = cfg.at("train");
    std::vector<double> snrs;
    if (t.contains("snr_set")) {
      snrs = SnrListFromJson(t["snr_set"]);
      t.erase("snr_set");
    }
    r.train = TrainConfig::FromJson(t);
    if (!snrs.empty()) r.train.snr_set = snrs;
    r.session = SessionConfig::FromJson(cfg.at("session"));
    return r;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

void EnsureDir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec || !fs::is_directory(p)) throw Error("cannot create directory " + p.string());
}

void WriteText(const fs::path& p, const std::string& s) {
  std::ofstream os(p);
  os << s;
  if (!os) throw Error("cannot write " + p.string());
}

void WriteConfig(const fs::path& dir, const json& cfg) {
  EnsureDir(dir);
  WriteText(dir / "config.json", cfg.dump(2) + "\n");
}

NoiseBank TrainingNoise(const json& cfg) {
  const auto& n = cfg.at("noise");
  const std::string dir = n.value("dir", "");
  if (!dir.empty()) return LoadNoiseBank(dir);
  return MakeSyntheticNoiseBank(n.at("seed").get<std::uint64_t>(), n.value("seconds", 8.0));
}

/// Test-time noise: same types as training noise, independent realizations.
NoiseBank EvalNoise(const json& cfg) {
  const auto& n = cfg.at("noise");
  const std::string dir = n.value("dir", "");
  if (!dir.empty()) return LoadNoiseBank(dir);
  return MakeSyntheticNoiseBank(cfg.at("eval").at("noise_seed").get<std::uint64_t>(),
                                n.value("seconds", 8.0));
}

std::shared_ptr<const Parameters> LoadModel(const fs::path& path) {
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path.string());
  return std::make_shared<const Parameters>(LoadCheckpoint(path));
}

fs::path CheckpointOr(const json& section, const Resolved& r) {
  std::string c = section.value("checkpoint", "");
  return c.empty() ? r.run_dir / "checkpoint.json" : fs::path(c);
}

// ---------------------------------------------------------------------------

int CmdSynthData(const Resolved& r) {
  std::cerr << "writing " << r.corpus.n_dialogues << " dialogues to " << r.data_dir << "\n";
  auto m = WriteCorpus(r.data_dir, r.corpus);
  WriteConfig(r.data_dir, r.raw);
  std::cerr << "split train/valid/test = " << m["split"]["train"].size() << "/"
            << m["split"]["valid"].size() << "/" << m["split"]["test"].size() << "\n";
  return 0;
}

int CmdTrain(const Resolved& r) {
  if (!fs::exists(r.data_dir / "manifest.json"))
    throw Error("dataset not found in " + r.data_dir.string() + " (run synth-data first)");
  Dataset train = LoadSplit(r.data_dir, "train");
  Dataset valid = LoadSplit(r.data_dir, "valid");
  NoiseBank bank = TrainingNoise(r.raw);
  WriteConfig(r.run_dir, r.raw);
  std::cerr << "training " << ToString(r.train.mode) << " on " << train.size() << " dialogues, "
            << r.train.epochs << " epochs\n";
  auto res = Fit(train, valid, r.model, r.train, bank, [](const EpochRecord& e) {
    std::cerr << "epoch " << e.epoch << " train L_vap " << e.train.vap << " valid L_vap "
              << e.valid.vap << "\n";
  });
  SaveCheckpoint(res.params, r.run_dir / "checkpoint.json");
  std::ofstream h(r.run_dir / "history.csv");
  WriteHistoryCsv(res.history, h);
  const auto& first = res.history.front();
  const auto& last = res.history.back();
  json stats{{"command", "train"},
             {"mode", ToString(r.train.mode)},
             {"best_epoch", res.best_epoch},
             {"initial", {{"train_L_vap", first.train.vap}, {"valid_L_vap", first.valid.vap}}},
             {"final", {{"train_L_vap", last.train.vap}, {"valid_L_vap", last.valid.vap}}},
             {"parameters", res.params.count()}};
  WriteText(r.run_dir / "stats.json", stats.dump(2) + "\n");
  return 0;
}

int CmdEval(const Resolved& r, const std::vector<std::string>& cli_checkpoints) {
  std::vector<std::string> specs = cli_checkpoints;
  if (specs.empty())
    for (const auto& c : r.raw.at("eval").at("checkpoints")) specs.push_back(c.get<std::string>());
  if (specs.empty()) specs.push_back((r.run_dir / "checkpoint.json").string());
  std::vector<std::pair<std::string, fs::path>> cols;
  for (const auto& s : specs) {
    auto eq = s.find('=');
    fs::path p = eq == std::string::npos ? fs::path(s) : fs::path(s.substr(eq + 1));
    std::string name = eq != std::string::npos        ? s.substr(0, eq)
                       : p.filename() == "checkpoint.json" ? p.parent_path().filename().string()
                                                        : p.stem().string();
    cols.emplace_back(name.empty() ? "model" : name, p);
  }
  std::vector<double> snrs;
  try {
    snrs = SnrListFromJson(r.raw.at("eval").at("snrs"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("eval.snrs: ") + e.what());
  }
  std::vector<std::shared_ptr<const Parameters>> models;
  for (const auto& [n, p] : cols) models.push_back(LoadModel(p));
  if (!fs::exists(r.data_dir / "manifest.json"))
    throw Error("dataset not found in " + r.data_dir.string());
  Dataset test = LoadSplit(r.data_dir, "test");
  NoiseBank bank = EvalNoise(r.raw);
  const auto seed = r.raw.at("eval").at("seed").get<std::uint64_t>();

  WriteConfig(r.run_dir, r.raw);
  std::vector<std::vector<SnrRow>> table;
  for (std::size_t i = 0; i < models.size(); ++i) {
    std::cerr << "evaluating " << cols[i].first << "\n";
    table.push_back(EvalPerSnr(*models[i], test, snrs, bank, seed));
  }
  std::ostringstream csv;
  csv << "snr";
  for (const auto& c : cols) csv << ',' << c.first;
  csv << ",uniform\n";
  json stats{{"command", "eval"}, {"columns", json::object()}};
  for (std::size_t k = 0; k < snrs.size(); ++k) {
    csv << SnrLabel(snrs[k]);
    for (const auto& col : table) csv << ',' << col[k].l_vap;
    csv << ',' << std::log(static_cast<double>(kNumStates)) << '\n';
  }
  for (std::size_t i = 0; i < cols.size(); ++i) {
    json col;
    for (const auto& row : table[i]) col[SnrLabel(row.snr_db)] = row.l_vap;
    stats["columns"][cols[i].first] = col;
  }
  WriteText(r.run_dir / "eval.csv", csv.str());
  WriteText(r.run_dir / "stats.json", stats.dump(2) + "\n");
  std::cout << csv.str();
  return 0;
}

int CmdSimulate(const Resolved& r) {
  const auto& sim = r.raw.at("simulate");
  std::vector<Policy> policies;
  std::vector<double> snrs;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  try {
    for (const auto& p : sim.at("policies")) policies.push_back(ParsePolicy(p.get<std::string>()));
    snrs = SnrListFromJson(sim.at("snrs"));
    n = sim.at("n_dialogues").get<std::size_t>();
    seed = sim.at("seed").get<std::uint64_t>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("simulate: ") + e.what());
  }
  if (policies.empty()) throw ConfigError("simulate.policies is empty");
  if (snrs.empty()) throw ConfigError("simulate.snrs is empty");
  const bool needs_model = r.session.vap.enabled &&
                           std::any_of(policies.begin(), policies.end(), UsesVap);
  VapDecider decider;
  if (needs_model) decider = ModelVapDecider(LoadModel(CheckpointOr(sim, r)), r.session.vap);
  NoiseBank bank;
  if (!std::all_of(snrs.begin(), snrs.end(), IsClean)) bank = EvalNoise(r.raw);

  WriteConfig(r.run_dir, r.raw);
  std::vector<ResponseTimeRecord> all;
  for (std::size_t i = 0; i < n; ++i) {
    DialogueScript s = r.corpus.script;
    s.seed = seed + i;
    auto d = GenerateDialogue(s);
    const std::string id = "sim" + std::to_string(i);
    ApplySessionNoise(d, id, bank, snrs, seed);
    auto recs = SimulateDialogue(d, id, policies, decider, r.session);
    all.insert(all.end(), recs.begin(), recs.end());
  }

  std::ofstream jl(r.run_dir / "records.jsonl");
  for (const auto& rec : all) jl << rec.ToJson().dump() << '\n';
  std::ofstream csv(r.run_dir / "records.csv");
  WriteRecordsCsv(all, csv);

  json stats{{"command", "simulate"}, {"policies", json::object()}, {"comparisons", json::array()}};
  std::map<Policy, std::vector<ResponseTimeRecord>> by;
  for (const auto& rec : all) by[rec.policy].push_back(rec);
  for (Policy p : policies) {
    auto st = Summarize(by[p]);
    json block = st.ToJson();
    // The VAP-only system is also reported on the turns where it fired.
    if (p == Policy::kVapOnly) {
      std::vector<ResponseTimeRecord> fired;
      for (const auto& rec : by[p])
        if (rec.decided()) fired.push_back(rec);
      if (!fired.empty()) block["decided_subset"] = Summarize(fired).robot.ToJson();
    }
    stats["policies"][ToString(p)] = block;
    std::ofstream hr(r.run_dir / ("hist_" + ToString(p) + "_robot.csv"));
    st.robot_hist.WriteCsv(hr);
    std::ofstream hu(r.run_dir / ("hist_" + ToString(p) + "_user.csv"));
    st.user_hist.WriteCsv(hu);
    std::cerr << ToString(p) << ": robot response mean " << st.robot.mean << " s over "
              << st.decided << " turns, VAP fraction " << st.vap_source_fraction << "\n";
  }
  for (std::size_t a = 0; a < policies.size(); ++a)
    for (std::size_t b = a + 1; b < policies.size(); ++b) {
      auto ra = RobotResponses(by[policies[a]]), rb = RobotResponses(by[policies[b]]);
      if (ra.empty() || rb.empty()) continue;
      auto t = RankSum(ra, rb);
      json c = t.ToJson();
      c["a"] = ToString(policies[a]);
      c["b"] = ToString(policies[b]);
      stats["comparisons"].push_back(c);
    }
  WriteText(r.run_dir / "stats.json", stats.dump(2) + "\n");
  return 0;
}

int CmdStream(const Resolved& r) {
  const auto& st = r.raw.at("stream");
  const std::string input = st.value("input", "");
  if (input.empty()) throw ConfigError("stream: no input WAV (use --input)");
  auto model = LoadModel(CheckpointOr(st, r));
  Waveform a = LoadWav(input);
  const std::string input_b = st.value("input_robot", "");
  Waveform b = input_b.empty() ? Waveform::Zeros(a.size()) : LoadWav(input_b);
  if (b.size() != a.size()) throw Error("stream: user and robot inputs differ in length");
  const bool realtime = st.value("realtime", false);
  const bool to_stdout = st.value("stdout", false);

  WriteConfig(r.run_dir, r.raw);
  std::ofstream file(r.run_dir / "frames.jsonl");
  std::ostream& out = to_stdout ? std::cout : file;
  StreamContext ctx(model);
  double compute_ms = 0.0;
  std::size_t ticks = 0;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t pos = 0; pos < a.size(); pos += kHopSamples) {
    const std::size_t len = std::min<std::size_t>(kHopSamples, a.size() - pos);
    ctx.PushAudio(a.samples().subspan(pos, len), b.samples().subspan(pos, len));
    while (auto f = ctx.Tick()) {
      out << f->ToJson().dump() << '\n';
      compute_ms += f->compute_ms;
      ++ticks;
    }
    if (realtime)
      std::this_thread::sleep_until(start + std::chrono::microseconds(static_cast<long long>(
                                                (pos + len) * 1e6 / kSampleRate)));
  }
  const double mean_ms = ticks ? compute_ms / static_cast<double>(ticks) : 0.0;
  json stats{{"command", "stream"},
             {"ticks", ticks},
             {"mean_compute_ms", mean_ms},
             {"real_time_factor", mean_ms / (kTickSeconds * 1000.0)}};
  WriteText(r.run_dir / "stats.json", stats.dump(2) + "\n");
  std::cerr << ticks << " frames, real-time factor " << stats["real_time_factor"] << "\n";
  return 0;
}

int CmdBench(const Resolved& r) {
  const auto& bc = r.raw.at("bench");
  const int ticks = bc.value("ticks", 100);
  const double max_ms = bc.value("max_mean_ms", 100.0);
  if (ticks <= 0) throw ConfigError("bench.ticks must be positive");
  const std::string ck = bc.value("checkpoint", "");
  auto model = ck.empty() ? std::make_shared<const Parameters>(InitParameters(r.model))
                          : LoadModel(ck);
  WriteConfig(r.run_dir, r.raw);
  // Non-silent input on both channels so no hop takes the silent-hop shortcut.
  auto noise = MakeSyntheticNoise("pink", ticks * kTickSeconds + 1.0, 3);
  StreamContext ctx(model);
  std::vector<double> ms;
  for (int t = 0; t < ticks; ++t) {
    auto hop = noise.samples().subspan(static_cast<std::size_t>(t) * kHopSamples, kHopSamples);
    ctx.PushAudio(hop, hop);
    ms.push_back(ctx.Tick()->compute_ms);
  }
  auto desc = Describe(ms);
  std::sort(ms.begin(), ms.end());
  json stats{{"command", "bench"},
             {"ticks", ticks},
             {"mean_ms", desc.mean},
             {"median_ms", desc.median},
             {"p95_ms", ms[static_cast<std::size_t>(0.95 * (ms.size() - 1))]},
             {"max_ms", ms.back()},
             {"real_time_factor", desc.mean / (kTickSeconds * 1000.0)},
             {"threshold_ms", max_ms},
             {"within_budget", desc.mean < max_ms}};
  WriteText(r.run_dir / "stats.json", stats.dump(2) + "\n");
  std::cout << stats.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mcvap: noise-robust voice activity projection for turn-taking"};
  app.require_subcommand(1);
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "JSON config file");
    sub->add_option("--set", common.sets, "override a config value: key.path=value");
    sub->add_option("--run-dir", common.run_dir, "output directory");
    sub->add_option("--data", common.data_dir, "dataset directory");
  };
  std::vector<std::pair<std::string, std::string>> extra;
  auto flag_to = [&](CLI::App* sub, const std::string& name, const std::string& path,
                     const std::string& help) {
    sub->add_option_function<std::string>(
        name, [&extra, path](const std::string& v) { extra.emplace_back(path, v); }, help);
  };

  auto* synth = app.add_subcommand("synth-data", "render a synthetic dialogue corpus");
  add_common(synth);
  flag_to(synth, "-n,--n-dialogues", "data.n_dialogues", "number of dialogues");
  flag_to(synth, "--seed", "data.script.seed", "base seed");

  auto* train = app.add_subcommand("train", "train a model");
  add_common(train);
  flag_to(train, "--mode", "train.mode", "clean or mc");
  flag_to(train, "--epochs", "train.epochs", "number of epochs");
  flag_to(train, "--seed", "train.seed", "training seed");

  auto* eval = app.add_subcommand("eval", "per-SNR test loss table");
  add_common(eval);
  std::vector<std::string> eval_checkpoints;
  eval->add_option("--checkpoint", eval_checkpoints, "checkpoint path or name=path (repeatable)");

  auto* simulate = app.add_subcommand("simulate", "response-time simulation");
  add_common(simulate);
  flag_to(simulate, "--checkpoint", "simulate.checkpoint", "model checkpoint");
  std::string policies;
  simulate->add_option("--policies", policies, "comma-separated: stt,hybrid,vap");
  flag_to(simulate, "--snr", "simulate.snrs",
          "user-channel SNR in dB or clean, or a JSON list drawn from per dialogue");
  flag_to(simulate, "-n,--n-dialogues", "simulate.n_dialogues", "number of dialogues");

  auto* stream = app.add_subcommand("stream", "replay a WAV file through the runtime");
  add_common(stream);
  flag_to(stream, "-i,--input", "stream.input", "user-channel WAV");
  flag_to(stream, "--input-robot", "stream.input_robot", "robot-channel WAV (default silent)");
  flag_to(stream, "--checkpoint", "stream.checkpoint", "model checkpoint");
  bool realtime = false, to_stdout = false;
  stream->add_flag("--realtime", realtime, "pace input at real time");
  stream->add_flag("--stdout", to_stdout, "write frames to stdout");

  auto* bench = app.add_subcommand("bench", "per-tick compute benchmark");
  add_common(bench);
  flag_to(bench, "--ticks", "bench.ticks", "number of ticks");
  flag_to(bench, "--checkpoint", "bench.checkpoint", "model checkpoint (default: fresh init)");
  flag_to(bench, "--max-ms", "bench.max_mean_ms", "mean per-tick budget in ms");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  Resolved r;
  try {
    if (!policies.empty()) {
      json list = json::array();
      std::stringstream ss(policies);
      for (std::string p; std::getline(ss, p, ',');) list.push_back(p);
      extra.emplace_back("simulate.policies", list.dump());
    }
    if (realtime) extra.emplace_back("stream.realtime", "true");
    if (to_stdout) extra.emplace_back("stream.stdout", "true");
    r = Parse(ResolveConfig(common, extra));
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (synth->parsed()) return CmdSynthData(r);
    if (train->parsed()) return CmdTrain(r);
    if (eval->parsed()) return CmdEval(r, eval_checkpoints);
    if (simulate->parsed()) return CmdSimulate(r);
    if (stream->parsed()) return CmdStream(r);
    if (bench->parsed()) return CmdBench(r);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitConfig;
}
