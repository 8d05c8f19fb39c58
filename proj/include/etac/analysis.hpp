#pragma once

// Post-run metrics over a SimTrace.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "etac/numerics.hpp"
#include "etac/simulator.hpp"
#include "etac/triggers.hpp"

namespace etac {

using Series = std::vector<double>;

/// ‖y_i − y_0‖ per agent per sample.
inline std::vector<Series> tracking_errors(const SimTrace& tr) {
  std::vector<Series> out(tr.agents.size());
  for (std::size_t i = 0; i < tr.agents.size(); ++i) {
    const auto& ys = tr.agents[i].y;
    out[i].reserve(ys.size());
    for (std::size_t k = 0; k < ys.size(); ++k) out[i].push_back((ys[k] - tr.y0[k]).norm());
  }
  return out;
}

struct EstimationErrors {
  std::vector<Series> x_bar;    // ‖x − x̂‖
  std::vector<Series> u_tilde;  // ‖u_a − û‖
  std::vector<Series> x_tilde;  // ‖ζ − x0‖
  std::vector<Series> eps;      // ‖x̂ − Xζ‖
  std::vector<Series> a_tilde;  // ‖Â − vec(A0)‖, empty for group-1 agents
};

inline EstimationErrors estimation_errors(const SimTrace& tr) {
  const std::size_t n = tr.agents.size();
  if (tr.regulator_X.size() != n) {
    throw DimensionError("estimation_errors: trace carries no regulator solutions");
  }
  EstimationErrors e;
  e.x_bar.resize(n);
  e.u_tilde.resize(n);
  e.x_tilde.resize(n);
  e.eps.resize(n);
  e.a_tilde.resize(n);
  const Vector a_r = vec(tr.A0);
  for (std::size_t i = 0; i < n; ++i) {
    const AgentSeries& a = tr.agents[i];
    for (std::size_t k = 0; k < a.x.size(); ++k) {
      e.x_bar[i].push_back((a.x[k] - a.x_hat[k]).norm());
      e.u_tilde[i].push_back((a.u_fault[k] - a.u_hat[k]).norm());
      e.x_tilde[i].push_back((a.zeta[k] - tr.x0[k]).norm());
      e.eps[i].push_back((a.x_hat[k] - tr.regulator_X[i] * a.zeta[k]).norm());
      if (a.a_hat[k].size() > 0) e.a_tilde[i].push_back((a.a_hat[k] - a_r).norm());
    }
  }
  return e;
}

struct Window {
  double t0 = 0.0;
  double t1 = 0.0;
};

/// Final 20% of the horizon.
inline Window default_window(double t_end) { return {0.8 * t_end, t_end}; }

struct TriggerStats {
  std::size_t count = 0;         // events inside the window
  double min_gap = 0.0;          // window length when fewer than two events
  double mean_gap = 0.0;
  double comm_savings = 0.0;     // 1 - count/steps
  bool strictly_increasing = true;
};

/// Events counted over [t0, t1) on the step grid, so firing at every step
/// gives zero savings.
inline TriggerStats trigger_stats(const std::vector<double>& events, double dt, double t0,
                                  double t1) {
  const double slack = 0.5 * dt;
  std::vector<double> in;
  for (double t : events) {
    if (t >= t0 - slack && t < t1 - slack) in.push_back(t);
  }
  const ZenoReport z = zeno_guard(in, dt, t1 - t0);
  TriggerStats s;
  s.count = in.size();
  s.min_gap = z.min_gap;
  s.mean_gap = z.mean_gap;
  s.strictly_increasing = z.strictly_increasing;
  const double steps = std::max(1.0, std::round((t1 - t0) / dt));
  s.comm_savings = 1.0 - static_cast<double>(s.count) / steps;
  return s;
}

struct MachineStats {
  int agent = 0;
  TriggerFamily family = TriggerFamily::Zeta1;
  std::size_t total_events = 0;
  TriggerStats full;
  TriggerStats tail;
};

struct FamilyStats {
  std::size_t machines = 0;
  std::size_t total_events = 0;
  double min_savings_tail = 1.0;
  double mean_savings_full = 0.0;
};

struct TriggerSummary {
  std::vector<MachineStats> machines;
  std::map<std::string, FamilyStats> families;
};

inline TriggerSummary trigger_stats(const SimTrace& tr, const Window& tail) {
  TriggerSummary out;
  const double t_end = tr.time.empty() ? 0.0 : tr.time.back();
  for (std::size_t k = 0; k < tr.machines.size(); ++k) {
    MachineStats m;
    m.agent = tr.machines[k].agent;
    m.family = tr.machines[k].family;
    m.total_events = tr.events[k].size();
    m.full = trigger_stats(tr.events[k], tr.meta.dt, 0.0, t_end);
    m.tail = trigger_stats(tr.events[k], tr.meta.dt, tail.t0, tail.t1);
    FamilyStats& f = out.families[to_string(m.family)];
    f.machines += 1;
    f.total_events += m.total_events;
    f.min_savings_tail = std::min(f.min_savings_tail, m.tail.comm_savings);
    f.mean_savings_full += m.full.comm_savings;
    out.machines.push_back(m);
  }
  for (auto& [name, f] : out.families) {
    if (f.machines > 0) f.mean_savings_full /= static_cast<double>(f.machines);
  }
  return out;
}

inline TriggerSummary trigger_stats(const SimTrace& tr) {
  return trigger_stats(tr, default_window(tr.meta.t_end));
}

/// Named scalar series sharing one time axis.
struct MetricSet {
  Series time;
  std::map<std::string, Series> series;
};

/// Metric names: track/i, x_bar/i, u_tilde/i, x_tilde/i, eps/i, a_tilde/i
/// with 1-based agent ids.
inline MetricSet metric_set(const SimTrace& tr) {
  MetricSet m;
  m.time = tr.time;
  const auto track = tracking_errors(tr);
  const auto est = estimation_errors(tr);
  for (std::size_t i = 0; i < tr.agents.size(); ++i) {
    const std::string id = "/" + std::to_string(i + 1);
    m.series["track" + id] = track[i];
    m.series["x_bar" + id] = est.x_bar[i];
    m.series["u_tilde" + id] = est.u_tilde[i];
    m.series["x_tilde" + id] = est.x_tilde[i];
    m.series["eps" + id] = est.eps[i];
    if (!est.a_tilde[i].empty()) m.series["a_tilde" + id] = est.a_tilde[i];
  }
  return m;
}

struct UubEntry {
  std::string metric;
  double sup = 0.0;
  double t_at_sup = 0.0;
  double bound = 0.0;
  double margin = 0.0;  // bound - sup
  bool passed = true;
  bool missing = false;
};

struct UubReport {
  Window window;
  std::vector<UubEntry> entries;

  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const UubEntry& e) { return e.passed; });
  }

  std::string failures() const {
    std::string out;
    for (const auto& e : entries) {
      if (e.passed) continue;
      if (!out.empty()) out += "; ";
      if (e.missing) {
        out += e.metric + " missing";
      } else {
        out += e.metric + " = " + std::to_string(e.sup) + " > " + std::to_string(e.bound) +
               " at t = " + std::to_string(e.t_at_sup);
      }
    }
    return out;
  }
};

/// Sup and argmax of a series over the window (samples with t0 <= t <= t1).
inline std::pair<double, double> window_sup(const Series& time, const Series& values,
                                            const Window& w) {
  double sup = 0.0, at = w.t0;
  bool first = true;
  for (std::size_t k = 0; k < time.size() && k < values.size(); ++k) {
    if (time[k] < w.t0 - 1e-12 || time[k] > w.t1 + 1e-12) continue;
    if (first || values[k] > sup || std::isnan(values[k])) {
      sup = std::isnan(values[k]) ? std::numeric_limits<double>::infinity() : values[k];
      at = time[k];
      first = false;
    }
  }
  return {sup, at};
}

/// Passes iff every bounded metric stays at or below its bound over the
/// window. Metrics without a bound are ignored; bounds naming an absent
/// metric fail.
inline UubReport uub_check(const MetricSet& metrics, const std::map<std::string, double>& bounds,
                           const Window& window) {
  UubReport r;
  r.window = window;
  for (const auto& [name, bound] : bounds) {
    UubEntry e;
    e.metric = name;
    e.bound = bound;
    auto it = metrics.series.find(name);
    if (it == metrics.series.end()) {
      e.missing = true;
      e.passed = false;
    } else {
      const auto [sup, at] = window_sup(metrics.time, it->second, window);
      e.sup = sup;
      e.t_at_sup = at;
      e.margin = bound - sup;
      e.passed = sup <= bound;
    }
    r.entries.push_back(e);
  }
  return r;
}

struct AgentComparison {
  double peak_crm = 0.0, peak_orm = 0.0;
  double tail_crm = 0.0, tail_orm = 0.0;
  double peak_ratio = 1.0, tail_ratio = 1.0;  // CRM / ORM
};

struct ComparisonReport {
  Window transient;
  Window tail;
  std::vector<AgentComparison> agents;
  double peak_ratio = 1.0;  // max CRM peak / max ORM peak
  double tail_ratio = 1.0;  // max CRM tail / max ORM tail
};

inline double safe_ratio(double a, double b) {
  if (a == b) return 1.0;
  if (b == 0.0) return std::numeric_limits<double>::infinity();
  return a / b;
}

/// Transient peak (first 10% of the horizon) and tail sup of the tracking
/// error for both runs.
inline ComparisonReport compare_crm_orm(const SimTrace& crm, const SimTrace& orm) {
  if (crm.time != orm.time || crm.agents.size() != orm.agents.size() ||
      crm.meta.seed != orm.meta.seed || crm.meta.dt != orm.meta.dt) {
    throw ComparisonError("compare_crm_orm: traces do not share a scenario");
  }
  ComparisonReport r;
  const double t_end = crm.meta.t_end;
  r.transient = {0.0, 0.1 * t_end};
  r.tail = default_window(t_end);
  const auto ec = tracking_errors(crm);
  const auto eo = tracking_errors(orm);
  double pc = 0.0, po = 0.0, tc = 0.0, to = 0.0;
  for (std::size_t i = 0; i < ec.size(); ++i) {
    AgentComparison a;
    a.peak_crm = window_sup(crm.time, ec[i], r.transient).first;
    a.peak_orm = window_sup(orm.time, eo[i], r.transient).first;
    a.tail_crm = window_sup(crm.time, ec[i], r.tail).first;
    a.tail_orm = window_sup(orm.time, eo[i], r.tail).first;
    a.peak_ratio = safe_ratio(a.peak_crm, a.peak_orm);
    a.tail_ratio = safe_ratio(a.tail_crm, a.tail_orm);
    pc = std::max(pc, a.peak_crm);
    po = std::max(po, a.peak_orm);
    tc = std::max(tc, a.tail_crm);
    to = std::max(to, a.tail_orm);
    r.agents.push_back(a);
  }
  r.peak_ratio = safe_ratio(pc, po);
  r.tail_ratio = safe_ratio(tc, to);
  return r;
}

}  // namespace etac
