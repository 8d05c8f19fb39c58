// Command-line front end: synth | run | analyze | compare | sweep | calibrate.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "etac/etac.hpp"

namespace fs = std::filesystem;
using etac::io::Json;

namespace {

struct Common {
  std::string config;
  std::string preset;
  std::string gains;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt, t_end, kappa;
  std::optional<int> record_stride;
  std::string mode;
  std::string out_dir;
  bool no_comm = false;
  bool no_actuator = false;
  bool constant_faults = false;
};

void add_common(CLI::App* app, Common& c) {
  auto* cfg = app->add_option("--config", c.config, "Scenario JSON file");
  auto* pre = app->add_option("--preset", c.preset, "Built-in scenario (paper)");
  cfg->excludes(pre);
  app->add_option("--gains", c.gains, "Pinned gain file (output of synth)");
  app->add_option("--seed", c.seed, "Seed for fault frequencies and initial states");
  app->add_option("--dt", c.dt, "Integration step [s]");
  app->add_option("--t-end", c.t_end, "Horizon [s]");
  app->add_option("--mode", c.mode, "Reference model: crm or orm")
      ->check(CLI::IsMember({"crm", "orm"}));
  app->add_option("--kappa", c.kappa, "Leader feedback scale for CRM");
  app->add_option("--out-dir", c.out_dir, "Output directory");
  app->add_option("--record-stride", c.record_stride, "Steps per recorded sample")
      ->check(CLI::PositiveNumber);
  app->add_flag("--no-comm-faults", c.no_comm, "Disable link disturbances");
  app->add_flag("--no-actuator-faults", c.no_actuator, "Disable actuator faults");
  app->add_flag("--constant-faults", c.constant_faults,
                "Replace actuator sinusoids by constants of the same amplitude");
}

Json config_document(const Common& c) {
  Json j;
  if (!c.config.empty()) {
    j = etac::io::load_json_file(c.config);
  } else if (!c.preset.empty()) {
    j = Json{{"preset", c.preset}};
  } else {
    j = Json{{"preset", etac::preset::kPaper}};
  }
  if (c.seed) j["seed"] = *c.seed;
  if (c.dt) j["dt"] = *c.dt;
  if (c.t_end) j["t_end"] = *c.t_end;
  if (c.record_stride) j["record_stride"] = *c.record_stride;
  if (!c.mode.empty()) j["mode"] = c.mode;
  if (c.kappa) j["kappa"] = *c.kappa;
  if (c.no_comm) j["faults"]["comm_enabled"] = false;
  if (c.no_actuator) j["faults"]["actuator_enabled"] = false;
  if (!c.gains.empty()) {
    const Json g = etac::io::load_json_file(c.gains);
    j["gains"] = g.contains("gains") ? g.at("gains") : g;
  }
  return j;
}

etac::Scenario load(const Common& c) {
  etac::Scenario s = etac::io::scenario_from_json(config_document(c));
  if (c.constant_faults) etac::preset::make_actuator_faults_constant(s.faults);
  return s;
}

fs::path ensure_dir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  fs::create_directories(p);
  return p;
}

template <typename Writer>
void write_file(const fs::path& path, Writer&& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw etac::Error("cannot write '" + path.string() + "'");
  w(out);
}

void write_trace(const fs::path& dir, const etac::SimTrace& tr, const etac::MetricSet& m,
                 const Json& summary) {
  write_file(dir / "states.csv", [&](std::ostream& o) { etac::io::write_states_csv(o, tr); });
  write_file(dir / "observers.csv",
             [&](std::ostream& o) { etac::io::write_observers_csv(o, tr); });
  write_file(dir / "events.csv", [&](std::ostream& o) { etac::io::write_events_csv(o, tr); });
  write_file(dir / "metrics.csv", [&](std::ostream& o) { etac::io::write_metrics_csv(o, m); });
  write_file(dir / "summary.json", [&](std::ostream& o) { o << summary.dump(2) << "\n"; });
}

int cmd_synth(const Common& c) {
  const etac::Scenario s = load(c);
  const Json g = etac::io::to_json(s.gains);
  if (!c.out_dir.empty()) {
    const fs::path dir = ensure_dir(c.out_dir);
    write_file(dir / "gains.json", [&](std::ostream& o) { o << g.dump(2) << "\n"; });
    write_file(dir / "scenario.json",
               [&](std::ostream& o) { o << etac::io::to_json(s).dump(2) << "\n"; });
  }
  std::cout << Json{{"gain_hash", g.at("gain_hash")}, {"report", g.at("report")}}.dump(2) << "\n";
  if (!s.gains.report.passed()) {
    std::cerr << "synthesis failed: " << s.gains.report.failures() << "\n";
    return 1;
  }
  return 0;
}

int cmd_run(const Common& c) {
  const etac::Scenario s = load(c);
  const etac::SimTrace tr = etac::run(s);
  const etac::MetricSet m = etac::metric_set(tr);
  const Json summary = etac::io::run_summary(tr, m);
  write_trace(ensure_dir(c.out_dir), tr, m, summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

/// Relative consensus check: tail sup of each tracking error at most
/// `factor` times its peak over the first 10% of the horizon.
Json relative_check(const etac::SimTrace& tr, double factor, bool& passed) {
  const auto errs = etac::tracking_errors(tr);
  const etac::Window early{0.0, 0.1 * tr.meta.t_end};
  const etac::Window tail = etac::default_window(tr.meta.t_end);
  Json out = Json::array();
  passed = true;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    const double peak = etac::window_sup(tr.time, errs[i], early).first;
    const double sup = etac::window_sup(tr.time, errs[i], tail).first;
    const bool ok = std::isfinite(sup) && sup <= factor * peak;
    passed = passed && ok;
    out.push_back(Json{{"agent", i + 1}, {"peak", peak}, {"tail_sup", sup},
                       {"limit", factor * peak}, {"passed", ok}});
  }
  return out;
}

int cmd_analyze(const Common& c, const std::string& bounds_path, double factor) {
  const etac::Scenario s = load(c);
  const etac::SimTrace tr = etac::run(s);
  const etac::MetricSet m = etac::metric_set(tr);
  Json report{{"metadata", etac::io::to_json(tr.meta)}};
  bool passed = true;
  bool rel_ok = true;
  report["relative_tracking"] = relative_check(tr, factor, rel_ok);
  passed = rel_ok;
  if (!bounds_path.empty()) {
    const etac::io::BoundsFile b = etac::io::bounds_from_json(etac::io::load_json_file(bounds_path));
    const etac::Window w = b.window.value_or(etac::default_window(tr.meta.t_end));
    const etac::UubReport uub = etac::uub_check(m, b.bounds, w);
    report["uub"] = etac::io::to_json(uub);
    passed = passed && uub.passed();
  }
  report["triggers"] = etac::io::to_json(etac::trigger_stats(tr));
  report["passed"] = passed;
  if (!c.out_dir.empty()) {
    const fs::path dir = ensure_dir(c.out_dir);
    write_file(dir / "metrics.csv", [&](std::ostream& o) { etac::io::write_metrics_csv(o, m); });
    write_file(dir / "analysis.json", [&](std::ostream& o) { o << report.dump(2) << "\n"; });
  }
  std::cout << report.dump(2) << "\n";
  return passed ? 0 : 1;
}

int cmd_compare(Common c) {
  c.mode = "crm";
  const etac::Scenario crm = load(c);
  c.mode = "orm";
  const etac::Scenario orm = load(c);
  const etac::SimTrace tc = etac::run(crm);
  const etac::SimTrace to = etac::run(orm);
  const etac::ComparisonReport r = etac::compare_crm_orm(tc, to);
  Json out = etac::io::to_json(r);
  out["kappa"] = crm.synthesis.kappa;
  out["metadata_crm"] = etac::io::to_json(tc.meta);
  out["metadata_orm"] = etac::io::to_json(to.meta);
  if (!c.out_dir.empty()) {
    const fs::path dir = ensure_dir(c.out_dir);
    for (const auto& [name, tr] : {std::pair{"crm", &tc}, std::pair{"orm", &to}}) {
      const fs::path sub = dir / name;
      fs::create_directories(sub);
      const etac::MetricSet m = etac::metric_set(*tr);
      write_trace(sub, *tr, m, etac::io::run_summary(*tr, m));
    }
    write_file(dir / "comparison.json", [&](std::ostream& o) { o << out.dump(2) << "\n"; });
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const Common& c, std::uint64_t first, int count, int jobs) {
  if (count < 1) throw etac::ConfigError("--count must be >= 1");
  std::vector<Json> results(static_cast<std::size_t>(count));
  std::atomic<int> next{0};
  const int workers = std::max(1, std::min(jobs, count));
  auto worker = [&]() {
    for (int k = next++; k < count; k = next++) {
      Common rc = c;
      rc.seed = first + static_cast<std::uint64_t>(k);
      Json r{{"seed", *rc.seed}};
      try {
        const etac::Scenario s = load(rc);
        const etac::SimTrace tr = etac::run(s);
        bool ok = true;
        r["relative_tracking"] = relative_check(tr, 0.1, ok);
        r["passed"] = ok;
        if (!c.out_dir.empty()) {
          const fs::path sub = fs::path(c.out_dir) / ("seed_" + std::to_string(*rc.seed));
          fs::create_directories(sub);
          const etac::MetricSet m = etac::metric_set(tr);
          write_trace(sub, tr, m, etac::io::run_summary(tr, m));
        }
      } catch (const std::exception& e) {
        r["passed"] = false;
        r["error"] = e.what();
      }
      results[static_cast<std::size_t>(k)] = r;
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  bool all = true;
  for (const auto& r : results) all = all && r.at("passed").get<bool>();
  std::cout << Json{{"runs", results}, {"passed", all}}.dump(2) << "\n";
  return all ? 0 : 1;
}

/// Round up to two significant digits.
double round_up_2sig(double v) {
  if (!(v > 0.0)) return 0.0;
  const double p = std::pow(10.0, std::floor(std::log10(v)) - 1.0);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2g", std::ceil(v / p) * p);
  return std::strtod(buf, nullptr);
}

int cmd_calibrate(const Common& c, const std::string& out_path, double slack, double floor) {
  const etac::Scenario s = load(c);
  const etac::SimTrace tr = etac::run(s);
  const etac::MetricSet m = etac::metric_set(tr);
  const etac::Window w = etac::default_window(tr.meta.t_end);
  Json bounds = Json::object();
  for (const auto& [name, series] : m.series) {
    bounds[name] = round_up_2sig(std::max(floor, slack * etac::window_sup(m.time, series, w).first));
  }
  const Json doc{{"window", {w.t0, w.t1}},
                 {"reference", etac::io::to_json(tr.meta)},
                 {"slack", slack},
                 {"bounds", bounds}};
  if (out_path.empty()) {
    std::cout << doc.dump(2) << "\n";
  } else {
    etac::io::write_text(out_path, doc.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-triggered fault-tolerant leader-follower consensus simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(etac::kVersion));

  Common synth_opts, run_opts, analyze_opts, compare_opts, sweep_opts, cal_opts;
  auto* synth = app.add_subcommand("synth", "Synthesise and verify gains");
  add_common(synth, synth_opts);
  auto* run = app.add_subcommand("run", "Simulate and export the trace");
  add_common(run, run_opts);

  auto* analyze = app.add_subcommand("analyze", "Simulate and check tail bounds");
  add_common(analyze, analyze_opts);
  std::string bounds_path;
  double factor = 0.1;
  analyze->add_option("--bounds", bounds_path, "Calibrated bounds JSON");
  analyze->add_option("--factor", factor, "Tail/peak tracking ratio limit");

  auto* compare = app.add_subcommand("compare", "CRM vs ORM comparison");
  add_common(compare, compare_opts);

  auto* sweep = app.add_subcommand("sweep", "Seed sweep, runs in parallel");
  add_common(sweep, sweep_opts);
  std::uint64_t first_seed = 1;
  int count = 10;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  sweep->add_option("--first-seed", first_seed, "First seed of the sweep");
  sweep->add_option("--count", count, "Number of seeds");
  sweep->add_option("--jobs", jobs, "Parallel runs");

  auto* calibrate = app.add_subcommand("calibrate", "Derive tail bounds from a reference run");
  add_common(calibrate, cal_opts);
  std::string bounds_out;
  double slack = 2.0, floor = 1e-9;
  calibrate->add_option("--out", bounds_out, "Bounds file to write");
  calibrate->add_option("--slack", slack, "Multiplier on the reference tail sup");
  calibrate->add_option("--floor", floor, "Smallest bound written");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(synth_opts);
    if (*run) return cmd_run(run_opts);
    if (*analyze) return cmd_analyze(analyze_opts, bounds_path, factor);
    if (*compare) return cmd_compare(compare_opts);
    if (*sweep) {
      if (sweep_opts.seed) first_seed = *sweep_opts.seed;
      return cmd_sweep(sweep_opts, first_seed, count, jobs);
    }
    if (*calibrate) return cmd_calibrate(cal_opts, bounds_out, slack, floor);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
