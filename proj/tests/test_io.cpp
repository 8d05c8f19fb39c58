#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "etac/etac.hpp"

namespace fs = std::filesystem;
using etac::io::Json;

namespace {

int run_cli(const std::string& args, const fs::path& out_file = "/dev/null") {
  const std::string cmd =
      std::string(ETAC_CLI_PATH) + " " + args + " > " + out_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("etac_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json paper_config() { return etac::io::load_json_file(std::string(ETAC_DATA_DIR) + "/scenario_paper.json"); }

}  // namespace

TEST(Config, PresetPaper) {
  const auto s = etac::io::scenario_from_json(Json{{"preset", "paper"}});
  EXPECT_EQ(s.topology.followers, 8);
  EXPECT_EQ(s.topology.group1_size, 3);
  EXPECT_EQ(s.leader.A0, etac::preset::leader().A0);
  EXPECT_EQ(s.leader.C0(0, 0), 1.0);
  EXPECT_EQ(s.leader.C0(0, 1), 2.0);
  EXPECT_EQ(s.models[4].A(1, 1), 2.6);
  EXPECT_EQ(s.models[4].B(0, 0), 1.77);
  EXPECT_EQ(s.settings.dt, 1e-3);
  EXPECT_TRUE(s.gains.report.passed());
}

TEST(Config, AsymmetricGroupOneRejected) {
  Json j = paper_config();
  j["topology"]["A11"][0][1] = 2.0;
  try {
    etac::io::scenario_from_json(j);
    FAIL() << "expected a config error";
  } catch (const etac::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("Assumption 2"), std::string::npos) << e.what();
  }
}

TEST(Config, DefaultDtApplied) {
  Json j = paper_config();
  j.erase("dt");
  const auto s = etac::io::scenario_from_json(j);
  EXPECT_EQ(s.settings.dt, 1e-3);
}

TEST(Config, FileMatchesPreset) {
  const auto a = etac::io::scenario_from_json(paper_config());
  const auto b = etac::io::scenario_from_json(Json{{"preset", "paper"}});
  EXPECT_EQ(etac::gain_hash(a.gains), etac::gain_hash(b.gains));
  for (const auto& [id, sig] : b.faults.comm) {
    EXPECT_EQ(a.faults.comm.at(id).frequency, sig.frequency) << id;
  }
}

TEST(Config, SeededFrequencies) {
  Json j = Json{{"preset", "paper"},
                {"faults", {{"comm", {{"a1-2", {{"waveform", "cos"},
                                                {"amplitude", 0.1},
                                                {"frequency", "seeded"}}}}}}}};
  const auto s = etac::io::scenario_from_json(j);
  const double f = s.faults.comm.at("a1-2").frequency;
  EXPECT_GE(f, 0.0);
  EXPECT_LT(f, 1.0);
  EXPECT_EQ(s.faults.comm.at("a1-2").amplitude, 0.1);
  EXPECT_EQ(etac::io::scenario_from_json(j).faults.comm.at("a1-2").frequency, f);
}

TEST(Config, Errors) {
  EXPECT_THROW(etac::io::scenario_from_json(Json{{"preset", "nope"}}), etac::ConfigError);
  EXPECT_THROW(etac::io::scenario_from_json(Json{{"preset", "paper"}, {"dt", -1.0}}),
               etac::ConfigError);
  EXPECT_THROW(etac::io::scenario_from_json(Json{{"preset", "paper"}, {"mode", "xyz"}}),
               etac::ConfigError);
  EXPECT_THROW(etac::io::scenario_from_json(Json::object()), etac::ConfigError);
  try {
    etac::io::parse_json("{\n  \"a\": [1, 2,\n}", "cfg.json");
    FAIL();
  } catch (const etac::ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("cfg.json:"), std::string::npos) << e.what();
  }
}

TEST(Gains, JsonRoundTripReverifies) {
  const auto s = etac::io::scenario_from_json(Json{{"preset", "paper"}});
  Json j{{"preset", "paper"}, {"gains", etac::io::to_json(s.gains)}};
  j = Json::parse(j.dump());
  const auto pinned = etac::io::scenario_from_json(j);
  EXPECT_TRUE(pinned.gains.report.passed()) << pinned.gains.report.failures();
  EXPECT_EQ(etac::gain_hash(pinned.gains), etac::gain_hash(s.gains));

  j["gains"]["agents"][1]["N3"][0][0] = 99.0;
  const auto tampered = etac::io::scenario_from_json(j);
  EXPECT_FALSE(tampered.gains.report.passed());
}

TEST(Csv, FormatsAndHeaders) {
  EXPECT_EQ(etac::io::fmt_value(0.1), "0.10000000000000001");
  EXPECT_EQ(etac::io::fmt_time(0.001), "0.001");
  etac::SimSettings st;
  st.t_end = 0.01;
  st.record_stride = 5;
  const auto tr = etac::run(etac::preset::scenario(st));
  std::ostringstream states, events;
  etac::io::write_states_csv(states, tr);
  etac::io::write_events_csv(events, tr);
  const std::string text = states.str();
  const std::string header = text.substr(0, text.find('\n'));
  EXPECT_EQ(header.rfind("t,x0_1,x0_2,y0_1,x1_1", 0), 0u) << header;
  EXPECT_NE(header.find("ua8_2"), std::string::npos);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
  EXPECT_EQ(events.str().rfind("agent_id,family,fire_time\n1,zeta1,0\n", 0), 0u);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run_cli("run --no-such-flag"), 2);
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("run --mode xyz"), 2);
  EXPECT_EQ(run_cli("run --config a.json --preset paper"), 2);
}

TEST(Cli, RuntimeFailureExitsOne) {
  EXPECT_EQ(run_cli("run --config /nonexistent/config.json"), 1);
  const fs::path dir = scratch("bad");
  Json j = paper_config();
  j["topology"]["A22"][0][1] = 0.1;
  std::ofstream(dir / "bad.json") << j.dump();
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string(), dir / "log.txt"), 1);
  EXPECT_NE(slurp(dir / "log.txt").find("Assumption 2"), std::string::npos);
}

TEST(Cli, RunWritesTraceAndSummary) {
  const fs::path dir = scratch("run");
  ASSERT_EQ(run_cli("run --preset paper --seed 42 --t-end 0.5 --out-dir " + (dir / "out").string(),
                    dir / "stdout.json"),
            0);
  for (const char* f : {"states.csv", "observers.csv", "events.csv", "metrics.csv", "summary.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
  const Json summary = Json::parse(slurp(dir / "stdout.json"));
  EXPECT_EQ(summary.at("metadata").at("dt").get<double>(), 1e-3);
  EXPECT_EQ(summary.at("metadata").at("seed").get<int>(), 42);
  EXPECT_EQ(summary.at("metadata").at("steps").get<int>(), 500);
  EXPECT_EQ(summary, Json::parse(slurp(dir / "out" / "summary.json")));
}

TEST(Cli, SynthThenPinnedRun) {
  const fs::path dir = scratch("synth");
  ASSERT_EQ(run_cli("synth --preset paper --out-dir " + dir.string(), dir / "synth.json"), 0);
  const Json rep = Json::parse(slurp(dir / "synth.json"));
  EXPECT_TRUE(rep.at("report").at("passed").get<bool>());
  ASSERT_EQ(run_cli("run --preset paper --t-end 0.2 --out-dir " + (dir / "run").string() +
                        " --gains " + (dir / "gains.json").string(),
                    dir / "run.json"),
            0);
  const Json run = Json::parse(slurp(dir / "run.json"));
  EXPECT_EQ(run.at("metadata").at("gain_hash"), rep.at("gain_hash"));
}

TEST(Cli, ConfigWithoutDtEchoesDefault) {
  const fs::path dir = scratch("nodt");
  Json j = paper_config();
  j.erase("dt");
  j["t_end"] = 0.1;
  std::ofstream(dir / "c.json") << j.dump();
  ASSERT_EQ(run_cli("run --config " + (dir / "c.json").string() + " --out-dir " + dir.string(),
                    dir / "s.json"),
            0);
  EXPECT_EQ(Json::parse(slurp(dir / "s.json")).at("metadata").at("dt").get<double>(), 1e-3);
}

TEST(Cli, AnalyzeAgainstBounds) {
  const fs::path dir = scratch("analyze");
  const fs::path bounds = dir / "b.json";
  std::ofstream(bounds) << Json{{"window", {0.8, 1.0}}, {"bounds", {{"track/1", 1e-9}}}}.dump();
  EXPECT_EQ(run_cli("analyze --preset paper --t-end 1 --factor 100 --bounds " + bounds.string()), 1);
  std::ofstream(bounds) << Json{{"window", {0.8, 1.0}}, {"bounds", {{"track/1", 1e3}}}}.dump();
  EXPECT_EQ(run_cli("analyze --preset paper --t-end 1 --factor 100 --bounds " + bounds.string()), 0);
}
