#pragma once

// JSON scenario/gain documents, CSV trace export and the run summary.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "etac/analysis.hpp"
#include "etac/preset.hpp"
#include "etac/simulator.hpp"
#include "etac/synthesis.hpp"
#include "etac/topology.hpp"

namespace etac::io {

using Json = nlohmann::json;

// ---------------------------------------------------------------- parsing

/// Parses JSON text; syntax errors carry "source:line:column".
inline Json parse_json(const std::string& text, const std::string& source = "<config>") {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < end; ++k) {
      if (text[k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(col) +
                      ": parse error: " + e.what());
  }
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json load_json_file(const std::string& path) { return parse_json(read_file(path), path); }

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

inline double number(const Json& j, const std::string& where) {
  if (!j.is_number()) bad(where, "expected a number");
  return j.get<double>();
}

inline Matrix matrix(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) bad(where, "expected a non-empty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  if (!j[0].is_array()) bad(where, "expected nested arrays");
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Json& row = j[static_cast<std::size_t>(r)];
    const std::string rw = where + "/" + std::to_string(r);
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      bad(rw, "ragged matrix row");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      m(r, c) = number(row[static_cast<std::size_t>(c)], rw + "/" + std::to_string(c));
    }
  }
  return m;
}

/// Empty arrays encode empty matrices (e.g. N4 of a group-2 agent).
inline Matrix matrix_or_empty(const Json& j, const std::string& where) {
  if (j.is_array() && j.empty()) return Matrix();
  return matrix(j, where);
}

inline Vector vector(const Json& j, const std::string& where) {
  if (!j.is_array()) bad(where, "expected an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t k = 0; k < j.size(); ++k) {
    v(static_cast<Eigen::Index>(k)) = number(j[k], where + "/" + std::to_string(k));
  }
  return v;
}

inline const Json& need(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) bad(where, std::string("missing '") + key + "'");
  return j.at(key);
}

template <typename T>
void maybe(const Json& j, const char* key, T& out) {
  if (j.is_object() && j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

inline Json to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

// ---------------------------------------------------------------- triggers

inline Json to_json(const TriggerParams& p) {
  Json j{{"beta", p.beta},   {"gamma", p.gamma},         {"tau", p.tau},
         {"delta", p.delta}, {"sigma", p.sigma},         {"tau_hat", p.tau_hat},
         {"sigma_hat", p.sigma_hat}, {"omega", p.omega}, {"theta", p.theta},
         {"phi0", p.phi0}};
  if (p.weight.size() > 0) j["H"] = to_json(p.weight);
  return j;
}

/// Fields absent from `j` keep the value already in `p`.
inline void merge(TriggerParams& p, const Json& j, const std::string& where) {
  if (!j.is_object()) detail::bad(where, "expected an object");
  for (auto& [key, ptr] :
       std::vector<std::pair<const char*, double*>>{{"beta", &p.beta},
                                                    {"gamma", &p.gamma},
                                                    {"tau", &p.tau},
                                                    {"delta", &p.delta},
                                                    {"sigma", &p.sigma},
                                                    {"tau_hat", &p.tau_hat},
                                                    {"sigma_hat", &p.sigma_hat},
                                                    {"omega", &p.omega},
                                                    {"theta", &p.theta},
                                                    {"phi0", &p.phi0}}) {
    if (j.contains(key)) *ptr = detail::number(j.at(key), where + "/" + key);
  }
  if (j.contains("H")) p.weight = detail::matrix(j.at("H"), where + "/H");
}

// ---------------------------------------------------------------- synthesis defaults

inline Json to_json(const SynthesisDefaults& d) {
  return Json{{"plant_poles", d.plant_poles},
              {"observer_poles", d.observer_poles},
              {"n11_scale", d.n11_scale},
              {"fault_lyapunov_weight", d.fault_lyapunov_weight},
              {"alpha2", d.alpha2},
              {"alpha3", d.alpha3},
              {"m11", d.m11},
              {"m12", d.m12},
              {"m1", d.m1},
              {"m13", d.m13},
              {"m21", d.m21},
              {"m22", d.m22},
              {"m23", d.m23},
              {"m3", d.m3},
              {"kappa", d.kappa},
              {"estimator_gain", d.estimator_gain},
              {"residual_tol", d.residual_tol},
              {"network_margin_min", d.network_margin_min},
              {"network_samples", d.network_samples},
              {"network_horizon", d.network_horizon},
              {"triggers",
               {{"zeta1", to_json(d.zeta1_trigger)},
                {"ahat", to_json(d.ahat_trigger)},
                {"zeta2", to_json(d.zeta2_trigger)}}}};
}

inline void merge(SynthesisDefaults& d, const Json& j, const std::string& where) {
  if (!j.is_object()) detail::bad(where, "expected an object");
  try {
    detail::maybe(j, "plant_poles", d.plant_poles);
    detail::maybe(j, "observer_poles", d.observer_poles);
    for (auto& [key, ptr] : std::vector<std::pair<const char*, double*>>{
             {"n11_scale", &d.n11_scale},
             {"fault_lyapunov_weight", &d.fault_lyapunov_weight},
             {"alpha2", &d.alpha2},
             {"alpha3", &d.alpha3},
             {"m11", &d.m11},
             {"m12", &d.m12},
             {"m1", &d.m1},
             {"m13", &d.m13},
             {"m21", &d.m21},
             {"m22", &d.m22},
             {"m23", &d.m23},
             {"m3", &d.m3},
             {"kappa", &d.kappa},
             {"estimator_gain", &d.estimator_gain},
             {"residual_tol", &d.residual_tol},
             {"network_margin_min", &d.network_margin_min},
             {"network_horizon", &d.network_horizon}}) {
      if (j.contains(key)) *ptr = detail::number(j.at(key), where + "/" + key);
    }
    detail::maybe(j, "network_samples", d.network_samples);
  } catch (const Json::exception& e) {
    detail::bad(where, e.what());
  }
  if (j.contains("triggers")) {
    const Json& t = j.at("triggers");
    const std::string tw = where + "/triggers";
    if (t.contains("zeta1")) merge(d.zeta1_trigger, t.at("zeta1"), tw + "/zeta1");
    if (t.contains("ahat")) merge(d.ahat_trigger, t.at("ahat"), tw + "/ahat");
    if (t.contains("zeta2")) merge(d.zeta2_trigger, t.at("zeta2"), tw + "/zeta2");
  }
}

// ---------------------------------------------------------------- gains

inline Json to_json(const VerificationReport& r) {
  Json items = Json::array();
  for (const auto& i : r.items) {
    Json it{{"name", i.name}, {"value", i.value}, {"limit", i.limit}, {"passed", i.passed}};
    if (i.agent >= 0) it["agent"] = i.agent + 1;
    if (!i.detail.empty()) it["detail"] = i.detail;
    items.push_back(it);
  }
  return Json{{"passed", r.passed()}, {"items", items}};
}

inline Json to_json(const AgentGains& g) {
  Json j{{"group", g.group == Group::One ? 1 : 2},
         {"T1", to_json(g.T1)},
         {"T2", to_json(g.T2)},
         {"X", to_json(g.X)},
         {"Y", to_json(g.Y)},
         {"W", to_json(g.W)},
         {"N11", to_json(g.N11)},
         {"N12", to_json(g.N12)},
         {"Q", to_json(g.Q)},
         {"M_outer", to_json(g.m_outer)},
         {"M_group", to_json(g.m_group)},
         {"M_leader", to_json(g.m_leader)},
         {"M_cross", to_json(g.m_cross)},
         {"M3", to_json(g.M3)},
         {"N3", to_json(g.N3)},
         {"N4", to_json(g.N4)},
         {"K", to_json(g.K)},
         {"estimator_gain", g.estimator_gain},
         {"leader_trigger", to_json(g.leader_trigger)}};
  if (g.group == Group::Two) j["matrix_trigger"] = to_json(g.matrix_trigger);
  return j;
}

inline AgentGains agent_gains_from_json(const Json& j, const std::string& where) {
  AgentGains g;
  const double group = detail::number(detail::need(j, "group", where), where + "/group");
  if (group != 1.0 && group != 2.0) detail::bad(where + "/group", "must be 1 or 2");
  g.group = group == 1.0 ? Group::One : Group::Two;
  auto m = [&](const char* key) {
    return detail::matrix_or_empty(detail::need(j, key, where), where + "/" + key);
  };
  g.T1 = m("T1");
  g.T2 = m("T2");
  g.X = m("X");
  g.Y = m("Y");
  g.W = m("W");
  g.N11 = m("N11");
  g.N12 = m("N12");
  g.Q = m("Q");
  g.m_outer = m("M_outer");
  g.m_group = m("M_group");
  g.m_leader = m("M_leader");
  g.m_cross = m("M_cross");
  g.M3 = m("M3");
  g.N3 = m("N3");
  g.N4 = m("N4");
  g.K = m("K");
  g.estimator_gain =
      detail::number(detail::need(j, "estimator_gain", where), where + "/estimator_gain");
  merge(g.leader_trigger, detail::need(j, "leader_trigger", where), where + "/leader_trigger");
  if (j.contains("matrix_trigger")) {
    merge(g.matrix_trigger, j.at("matrix_trigger"), where + "/matrix_trigger");
  }
  return g;
}

inline Json to_json(const GainBundle& b) {
  Json agents = Json::array();
  for (const auto& g : b.agents) agents.push_back(to_json(g));
  return Json{{"gain_hash", gain_hash(b)}, {"agents", agents}, {"report", to_json(b.report)}};
}

// ---------------------------------------------------------------- faults

inline Json to_json(const Signal& s) {
  return Json{{"waveform", to_string(s.waveform)},
              {"amplitude", s.amplitude},
              {"frequency", s.frequency},
              {"phase", s.phase}};
}

/// A frequency given as the string "seeded" is drawn from `rng`.
inline Signal signal_from_json(const Json& j, Xoshiro256& rng, const std::string& where) {
  Signal s;
  s.waveform = waveform_from_string(detail::need(j, "waveform", where).get<std::string>());
  s.amplitude = detail::number(detail::need(j, "amplitude", where), where + "/amplitude");
  if (j.contains("frequency")) {
    const Json& f = j.at("frequency");
    if (f.is_string()) {
      if (f.get<std::string>() != "seeded") detail::bad(where + "/frequency", "unknown value");
      s.frequency = rng.uniform();
    } else {
      s.frequency = detail::number(f, where + "/frequency");
    }
  }
  if (j.contains("phase")) s.phase = detail::number(j.at("phase"), where + "/phase");
  return s;
}

inline Json to_json(const FaultSet& f) {
  Json comm = Json::object();
  for (const auto& [id, s] : f.comm) comm[id] = to_json(s);
  Json act = Json::array();
  for (const auto& a : f.actuator) {
    Json ch = Json::array();
    for (const auto& s : a.channels) ch.push_back(to_json(s));
    act.push_back(ch);
  }
  return Json{{"comm_enabled", f.comm_enabled},
              {"actuator_enabled", f.actuator_enabled},
              {"comm", comm},
              {"actuator", act}};
}

/// Merges a faults section onto `f`: "comm" and "actuator" replace the
/// corresponding part, the enable flags override.
inline void merge(FaultSet& f, const Json& j, std::uint64_t seed, const std::string& where) {
  if (!j.is_object()) detail::bad(where, "expected an object");
  Xoshiro256 rng(seed);
  if (j.contains("comm")) {
    f.comm.clear();
    for (const auto& [id, s] : j.at("comm").items()) {
      f.comm[id] = signal_from_json(s, rng, where + "/comm/" + id);
    }
  }
  if (j.contains("actuator")) {
    f.actuator.clear();
    const Json& a = j.at("actuator");
    for (std::size_t i = 0; i < a.size(); ++i) {
      ActuatorFaultSpec spec;
      for (std::size_t k = 0; k < a[i].size(); ++k) {
        spec.channels.push_back(signal_from_json(
            a[i][k], rng, where + "/actuator/" + std::to_string(i) + "/" + std::to_string(k)));
      }
      f.actuator.push_back(spec);
    }
  }
  if (j.contains("comm_enabled")) f.comm_enabled = j.at("comm_enabled").get<bool>();
  if (j.contains("actuator_enabled")) f.actuator_enabled = j.at("actuator_enabled").get<bool>();
}

// ---------------------------------------------------------------- topology

inline const char* to_string(LinkKind k) {
  switch (k) {
    case LinkKind::Follower:
      return "follower";
    case LinkKind::LeaderToFollower:
      return "leader_to_follower";
    case LinkKind::FollowerToLeader:
      return "follower_to_leader";
  }
  return "?";
}

inline LinkKind link_kind_from_string(const std::string& s, const std::string& where) {
  if (s == "follower") return LinkKind::Follower;
  if (s == "leader_to_follower") return LinkKind::LeaderToFollower;
  if (s == "follower_to_leader") return LinkKind::FollowerToLeader;
  detail::bad(where, "unknown link kind '" + s + "'");
}

inline Json to_json(const TopologySpec& t) {
  Json links = Json::array();
  for (const auto& [id, ch] : t.fault_refs) {
    Json l{{"kind", to_string(id.kind)}, {"to", id.to + 1}, {"channel", ch}};
    if (id.kind == LinkKind::Follower) l["from"] = id.from + 1;
    links.push_back(l);
  }
  return Json{{"followers", t.followers}, {"group1_size", t.group1_size},
              {"A11", to_json(t.a11)},     {"A12", to_json(t.a12)},
              {"A21", to_json(t.a21)},     {"A22", to_json(t.a22)},
              {"g0", to_json(t.g0)},       {"gL", to_json(t.gl)},
              {"fault_links", links}};
}

inline TopologySpec topology_from_json(const Json& j, const std::string& where) {
  TopologySpec t;
  t.followers = detail::need(j, "followers", where).get<int>();
  t.group1_size = detail::need(j, "group1_size", where).get<int>();
  const int m = t.group1_size, r = t.followers - m;
  auto block = [&](const char* key, int rows, int cols) {
    if (rows == 0 || cols == 0) return Matrix(Matrix::Zero(rows, cols));
    return detail::matrix(detail::need(j, key, where), where + "/" + key);
  };
  t.a11 = block("A11", m, m);
  t.a12 = block("A12", m, r);
  t.a21 = block("A21", r, m);
  t.a22 = block("A22", r, r);
  t.g0 = detail::vector(detail::need(j, "g0", where), where + "/g0");
  t.gl = detail::vector(detail::need(j, "gL", where), where + "/gL");
  try {
    t.check_shapes();
  } catch (const DimensionError& e) {
    detail::bad(where, e.what());
  }
  if (j.contains("fault_links")) {
    const Json& links = j.at("fault_links");
    for (std::size_t k = 0; k < links.size(); ++k) {
      const std::string lw = where + "/fault_links/" + std::to_string(k);
      LinkId id;
      id.kind = link_kind_from_string(detail::need(links[k], "kind", lw).get<std::string>(), lw);
      id.to = detail::need(links[k], "to", lw).get<int>() - 1;
      id.from = id.kind == LinkKind::Follower ? detail::need(links[k], "from", lw).get<int>() - 1
                                              : -1;
      t.fault_refs[id] = detail::need(links[k], "channel", lw).get<std::string>();
    }
  }
  return t;
}

// ---------------------------------------------------------------- scenario

inline Json to_json(const Scenario& s, bool include_gains = true) {
  Json agents = Json::array();
  for (std::size_t i = 0; i < s.models.size(); ++i) {
    const AgentModel& m = s.models[i];
    Json a{{"A", to_json(m.A)}, {"B", to_json(m.B)}, {"C", to_json(m.C)}};
    if (!s.settings.initial.plants.empty()) a["x0"] = to_json(s.settings.initial.plants[i]);
    agents.push_back(a);
  }
  Json leader{{"A0", to_json(s.leader.A0)}, {"C0", to_json(s.leader.C0)}};
  if (s.settings.initial.leader) leader["x0"] = to_json(*s.settings.initial.leader);
  Json j{{"seed", s.settings.seed},
         {"dt", s.settings.dt},
         {"t_end", s.settings.t_end},
         {"mode", to_string(s.settings.mode)},
         {"record_stride", s.settings.record_stride},
         {"divergence_cap", s.settings.divergence_cap},
         {"leader", leader},
         {"agents", agents},
         {"topology", to_json(s.topology)},
         {"faults", to_json(s.faults)},
         {"synthesis", to_json(s.synthesis)}};
  if (include_gains) j["gains"] = to_json(s.gains);
  return j;
}

/// Builds and validates a scenario from a config document. With "preset"
/// set, every omitted section comes from that preset. Gains are loaded and
/// re-verified when a "gains" section is present, synthesised otherwise.
inline Scenario scenario_from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  Scenario s;
  bool from_preset = false;
  if (j.contains("preset")) {
    const std::string name = j.at("preset").get<std::string>();
    if (name != preset::kPaper) throw ConfigError("config/preset: unknown preset '" + name + "'");
    from_preset = true;
  }
  SimSettings& st = s.settings;
  try {
    detail::maybe(j, "seed", st.seed);
    detail::maybe(j, "dt", st.dt);
    detail::maybe(j, "t_end", st.t_end);
    detail::maybe(j, "record_stride", st.record_stride);
    detail::maybe(j, "divergence_cap", st.divergence_cap);
    if (j.contains("mode")) st.mode = reference_mode_from_string(j.at("mode").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(st.dt > 0.0)) throw ConfigError("config/dt: must be positive");
  if (!(st.t_end >= st.dt)) throw ConfigError("config/t_end: must be at least dt");
  if (st.record_stride < 1) throw ConfigError("config/record_stride: must be >= 1");

  if (from_preset) {
    s.leader = preset::leader();
    s.models = preset::models();
    s.topology = preset::topology();
    s.faults = preset::faults(s.topology, st.seed);
    s.synthesis = preset::defaults();
  }
  if (j.contains("leader")) {
    const Json& l = j.at("leader");
    s.leader.A0 = detail::matrix(detail::need(l, "A0", "config/leader"), "config/leader/A0");
    s.leader.C0 = detail::matrix(detail::need(l, "C0", "config/leader"), "config/leader/C0");
  }
  if (j.contains("leader") && j.at("leader").contains("x0")) {
    st.initial.leader = detail::vector(j.at("leader").at("x0"), "config/leader/x0");
  }
  if (j.contains("topology")) s.topology = topology_from_json(j.at("topology"), "config/topology");
  if (j.contains("agents")) {
    s.models.clear();
    const Json& a = j.at("agents");
    std::vector<Vector> plants;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const std::string w = "config/agents/" + std::to_string(i);
      AgentModel m;
      m.A = detail::matrix(detail::need(a[i], "A", w), w + "/A");
      m.B = detail::matrix(detail::need(a[i], "B", w), w + "/B");
      m.C = detail::matrix(detail::need(a[i], "C", w), w + "/C");
      if (a[i].contains("x0")) plants.push_back(detail::vector(a[i].at("x0"), w + "/x0"));
      s.models.push_back(m);
    }
    if (!plants.empty()) {
      if (plants.size() != a.size()) {
        throw ConfigError("config/agents: x0 must be given for all agents or none");
      }
      st.initial.plants = plants;
    }
  }
  if (s.models.empty() || s.leader.A0.size() == 0 || s.topology.followers == 0) {
    throw ConfigError("config: need leader, agents and topology (or a preset)");
  }
  if (j.contains("faults")) merge(s.faults, j.at("faults"), st.seed, "config/faults");
  if (j.contains("synthesis")) merge(s.synthesis, j.at("synthesis"), "config/synthesis");
  if (j.contains("kappa")) s.synthesis.kappa = detail::number(j.at("kappa"), "config/kappa");

  // Model invariants.
  if (static_cast<int>(s.models.size()) != s.topology.followers) {
    throw ConfigError("config/agents: " + std::to_string(s.models.size()) + " agents for " +
                      std::to_string(s.topology.followers) + " followers");
  }
  const Eigen::Index n0 = s.leader.A0.rows();
  if (s.leader.A0.cols() != n0 || s.leader.C0.cols() != n0) {
    throw ConfigError("config/leader: inconsistent A0/C0 dimensions");
  }
  for (std::size_t i = 0; i < s.models.size(); ++i) {
    AgentModel& m = s.models[i];
    m.group = s.topology.group_of(static_cast<int>(i));
    const std::string w = "config/agents/" + std::to_string(i);
    if (m.A.rows() != m.A.cols() || m.B.rows() != m.A.rows() || m.C.cols() != m.A.cols() ||
        m.C.rows() != s.leader.C0.rows()) {
      throw ConfigError(w + ": inconsistent A/B/C dimensions");
    }
  }
  if (!s.faults.actuator.empty() && s.faults.actuator.size() != s.models.size()) {
    throw ConfigError("config/faults/actuator: one entry per agent required");
  }
  const ValidationReport vr = validate(s.topology, s.faults);
  if (!vr.passed()) throw ConfigError("config/topology: " + vr.failures());

  if (j.contains("gains")) {
    const Json& g = j.at("gains");
    const Json& agents = detail::need(g, "agents", "config/gains");
    for (std::size_t i = 0; i < agents.size(); ++i) {
      s.gains.agents.push_back(
          agent_gains_from_json(agents[i], "config/gains/agents/" + std::to_string(i)));
    }
    s.gains.report =
        verify_gains(s.models, s.leader, s.topology, s.faults, s.gains.agents, s.synthesis);
  } else {
    s.gains = synthesize_all(s.models, s.leader, s.topology, s.faults, st.mode, s.synthesis);
  }
  return s;
}

// ---------------------------------------------------------------- CSV

inline std::string fmt_time(double t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", t);
  return buf;
}

inline std::string fmt_value(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline void header(std::string& line, const std::string& name, Eigen::Index n) {
  for (Eigen::Index k = 0; k < n; ++k) line += "," + name + "_" + std::to_string(k + 1);
}

inline void values(std::string& line, const Vector& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k) line += "," + fmt_value(v(k));
}

}  // namespace detail

/// t, leader state and output, then per agent x, y, commanded and fault input.
inline void write_states_csv(std::ostream& os, const SimTrace& tr) {
  std::string h = "t";
  if (tr.time.empty()) {
    os << h << "\n";
    return;
  }
  detail::header(h, "x0", tr.x0[0].size());
  detail::header(h, "y0", tr.y0[0].size());
  for (std::size_t i = 0; i < tr.agents.size(); ++i) {
    const std::string id = std::to_string(i + 1);
    const AgentSeries& a = tr.agents[i];
    detail::header(h, "x" + id, a.x[0].size());
    detail::header(h, "y" + id, a.y[0].size());
    detail::header(h, "u" + id, a.u_cmd[0].size());
    detail::header(h, "ua" + id, a.u_fault[0].size());
  }
  os << h << "\n";
  for (std::size_t k = 0; k < tr.time.size(); ++k) {
    std::string line = fmt_time(tr.time[k]);
    detail::values(line, tr.x0[k]);
    detail::values(line, tr.y0[k]);
    for (const auto& a : tr.agents) {
      detail::values(line, a.x[k]);
      detail::values(line, a.y[k]);
      detail::values(line, a.u_cmd[k]);
      detail::values(line, a.u_fault[k]);
    }
    os << line << "\n";
  }
}

/// t, per agent x_hat, u_hat, zeta, a_hat (group 2), then every threshold.
inline void write_observers_csv(std::ostream& os, const SimTrace& tr) {
  std::string h = "t";
  if (tr.time.empty()) {
    os << h << "\n";
    return;
  }
  for (std::size_t i = 0; i < tr.agents.size(); ++i) {
    const std::string id = std::to_string(i + 1);
    const AgentSeries& a = tr.agents[i];
    detail::header(h, "xhat" + id, a.x_hat[0].size());
    detail::header(h, "uhat" + id, a.u_hat[0].size());
    detail::header(h, "zeta" + id, a.zeta[0].size());
    detail::header(h, "ahat" + id, a.a_hat[0].size());
  }
  for (const auto& m : tr.machines) h += std::string(",phi_") + to_string(m.family) + "_" +
                                         std::to_string(m.agent + 1);
  os << h << "\n";
  for (std::size_t k = 0; k < tr.time.size(); ++k) {
    std::string line = fmt_time(tr.time[k]);
    for (const auto& a : tr.agents) {
      detail::values(line, a.x_hat[k]);
      detail::values(line, a.u_hat[k]);
      detail::values(line, a.zeta[k]);
      detail::values(line, a.a_hat[k]);
    }
    for (const auto& phi : tr.phi) line += "," + fmt_value(phi[k]);
    os << line << "\n";
  }
}

/// One row per fire, ordered by time then machine.
inline void write_events_csv(std::ostream& os, const SimTrace& tr) {
  struct Row {
    double t;
    std::size_t machine;
  };
  std::vector<Row> rows;
  for (std::size_t m = 0; m < tr.events.size(); ++m) {
    for (double t : tr.events[m]) rows.push_back({t, m});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return a.t < b.t || (a.t == b.t && a.machine < b.machine);
  });
  os << "agent_id,family,fire_time\n";
  for (const auto& r : rows) {
    const MachineInfo& mi = tr.machines[r.machine];
    os << mi.agent + 1 << "," << to_string(mi.family) << "," << fmt_time(r.t) << "\n";
  }
}

inline void write_metrics_csv(std::ostream& os, const MetricSet& m) {
  os << "t";
  for (const auto& [name, s] : m.series) os << "," << name;
  os << "\n";
  for (std::size_t k = 0; k < m.time.size(); ++k) {
    os << fmt_time(m.time[k]);
    for (const auto& [name, s] : m.series) os << "," << fmt_value(s[k]);
    os << "\n";
  }
}

// ---------------------------------------------------------------- summary

inline Json to_json(const RunMetadata& m) {
  return Json{{"seed", m.seed},
              {"prng", m.prng},
              {"dt", m.dt},
              {"t_end", m.t_end},
              {"steps", m.steps},
              {"mode", to_string(m.mode)},
              {"record_stride", m.record_stride},
              {"gain_hash", m.gain_hash},
              {"version", m.version}};
}

inline Json to_json(const UubReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json x{{"metric", e.metric}, {"bound", e.bound}, {"passed", e.passed}};
    if (e.missing) {
      x["missing"] = true;
    } else {
      x["sup"] = e.sup;
      x["t_at_sup"] = e.t_at_sup;
      x["margin"] = e.margin;
    }
    entries.push_back(x);
  }
  return Json{{"window", {r.window.t0, r.window.t1}}, {"passed", r.passed()}, {"entries", entries}};
}

inline Json to_json(const TriggerSummary& s) {
  Json machines = Json::array();
  for (const auto& m : s.machines) {
    machines.push_back(Json{{"agent", m.agent + 1},
                            {"family", to_string(m.family)},
                            {"events", m.total_events},
                            {"min_gap", m.full.min_gap},
                            {"mean_gap", m.full.mean_gap},
                            {"comm_savings", m.full.comm_savings},
                            {"tail_events", m.tail.count},
                            {"tail_comm_savings", m.tail.comm_savings}});
  }
  Json families = Json::object();
  for (const auto& [name, f] : s.families) {
    families[name] = Json{{"machines", f.machines},
                          {"events", f.total_events},
                          {"min_tail_comm_savings", f.min_savings_tail},
                          {"mean_comm_savings", f.mean_savings_full}};
  }
  return Json{{"machines", machines}, {"families", families}};
}

inline Json to_json(const ComparisonReport& r) {
  Json agents = Json::array();
  for (std::size_t i = 0; i < r.agents.size(); ++i) {
    const auto& a = r.agents[i];
    agents.push_back(Json{{"agent", i + 1},
                          {"peak_crm", a.peak_crm},
                          {"peak_orm", a.peak_orm},
                          {"tail_crm", a.tail_crm},
                          {"tail_orm", a.tail_orm},
                          {"peak_ratio", a.peak_ratio},
                          {"tail_ratio", a.tail_ratio}});
  }
  return Json{{"transient_window", {r.transient.t0, r.transient.t1}},
              {"tail_window", {r.tail.t0, r.tail.t1}},
              {"peak_ratio", r.peak_ratio},
              {"tail_ratio", r.tail_ratio},
              {"agents", agents}};
}

/// Tail sup of every metric over the default window.
inline Json tail_metrics(const MetricSet& m, const Window& w) {
  Json out = Json::object();
  for (const auto& [name, s] : m.series) out[name] = window_sup(m.time, s, w).first;
  return out;
}

inline Json run_summary(const SimTrace& tr, const MetricSet& metrics) {
  const Window w = default_window(tr.meta.t_end);
  return Json{{"metadata", to_json(tr.meta)},
              {"tail_window", {w.t0, w.t1}},
              {"tail_sup", tail_metrics(metrics, w)},
              {"triggers", to_json(trigger_stats(tr, w))}};
}

// ---------------------------------------------------------------- bounds

struct BoundsFile {
  std::optional<Window> window;
  std::map<std::string, double> bounds;
};

inline BoundsFile bounds_from_json(const Json& j) {
  BoundsFile b;
  if (j.contains("window")) {
    const Json& w = j.at("window");
    if (!w.is_array() || w.size() != 2) throw ConfigError("bounds/window: expected [t0, t1]");
    b.window = Window{w[0].get<double>(), w[1].get<double>()};
  }
  for (const auto& [name, v] : detail::need(j, "bounds", "bounds").items()) {
    b.bounds[name] = detail::number(v, "bounds/" + name);
  }
  return b;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

}  // namespace etac::io
