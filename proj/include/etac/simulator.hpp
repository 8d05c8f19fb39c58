#pragma once

// Deterministic fixed-step RK4 integration of the coupled leader, plants,
// observers and trigger thresholds, with trigger evaluation on the grid.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "etac/faults.hpp"
#include "etac/numerics.hpp"
#include "etac/runtime.hpp"
#include "etac/synthesis.hpp"
#include "etac/topology.hpp"
#include "etac/triggers.hpp"

namespace etac {

inline constexpr const char* kVersion = "0.1.0";

struct InitialConditions {
  std::optional<Vector> leader;  // default e_1, i.e. (1, 0) for a planar leader
  std::vector<Vector> plants;    // empty: uniform in [-1, 1]^n from the seed
};

struct SimSettings {
  double dt = 1e-3;
  double t_end = 20.0;
  std::uint64_t seed = 42;
  ReferenceMode mode = ReferenceMode::CRM;
  int record_stride = 10;
  double divergence_cap = 1e6;
  InitialConditions initial;
};

struct Scenario {
  TopologySpec topology;
  std::vector<AgentModel> models;
  LeaderModel leader;
  GainBundle gains;
  FaultSet faults;
  SimSettings settings;
  SynthesisDefaults synthesis;  // design choices the gains were verified against
};

/// Broadcasts, weights and trigger inputs frozen over one integration step.
struct StepInputs {
  Broadcasts broadcasts;
  WeightSnapshot snapshot;
  std::vector<Vector> leader_error, leader_psi;  // per leader-state machine
  std::vector<Vector> matrix_error, matrix_psi;  // per leader-matrix machine
};

struct WorldState {
  long step = 0;
  double t = 0.0;
  Vector x0;
  std::vector<AgentState> agents;
  std::vector<TriggerMachine> leader_triggers;  // one per follower (Zeta1 / Zeta2)
  std::vector<TriggerMachine> matrix_triggers;  // one per group-2 follower (AHat)
  StepInputs inputs;
};

struct MachineInfo {
  int agent = 0;
  TriggerFamily family = TriggerFamily::Zeta1;
};

struct AgentSeries {
  std::vector<Vector> x, x_hat, u_hat, u_fault, zeta, a_hat, u_cmd, y;
};

struct RunMetadata {
  std::uint64_t seed = 0;
  std::string prng = Xoshiro256::kId;
  double dt = 0.0;
  double t_end = 0.0;
  long steps = 0;
  ReferenceMode mode = ReferenceMode::CRM;
  int record_stride = 1;
  std::string gain_hash;
  std::string version = kVersion;
};

struct SimTrace {
  std::vector<double> time;
  std::vector<Vector> x0, y0;
  std::vector<AgentSeries> agents;
  std::vector<MachineInfo> machines;
  std::vector<std::vector<double>> phi;     // [machine][sample]
  std::vector<std::vector<double>> events;  // [machine]
  std::vector<Matrix> regulator_X;
  Matrix A0;
  int group1_size = 0;
  RunMetadata meta;
};

/// 64-bit FNV-1a over the bit patterns of every gain entry.
inline std::string gain_hash(const GainBundle& gains) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  };
  auto mix = [&](const Matrix& m) {
    mix_bytes(static_cast<std::uint64_t>(m.rows()));
    mix_bytes(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index k = 0; k < m.size(); ++k) mix_bytes(std::bit_cast<std::uint64_t>(m.data()[k]));
  };
  auto mix_trigger = [&](const TriggerParams& p) {
    for (double v : {p.beta, p.gamma, p.tau, p.delta, p.sigma, p.tau_hat, p.sigma_hat, p.omega,
                     p.theta, p.phi0}) {
      mix_bytes(std::bit_cast<std::uint64_t>(v));
    }
    mix(p.weight);
  };
  for (const auto& g : gains.agents) {
    for (const Matrix* m : {&g.T1, &g.T2, &g.X, &g.Y, &g.W, &g.N11, &g.N12, &g.Q, &g.m_outer,
                            &g.m_group, &g.m_leader, &g.m_cross, &g.M3, &g.N3, &g.N4, &g.K}) {
      mix(*m);
    }
    mix_bytes(std::bit_cast<std::uint64_t>(g.estimator_gain));
    mix_trigger(g.leader_trigger);
    mix_trigger(g.matrix_trigger);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Classical RK4 step of y' = f(t, y).
template <typename F>
Vector rk4_step(F&& f, double t, const Vector& y, double dt) {
  const Vector k1 = f(t, y);
  const Vector k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1);
  const Vector k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2);
  const Vector k4 = f(t + dt, y + dt * k3);
  return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

class Simulator {
 public:
  explicit Simulator(const Scenario& scenario) : sc_(scenario) {
    const int n = sc_.topology.followers;
    if (static_cast<int>(sc_.models.size()) != n ||
        static_cast<int>(sc_.gains.agents.size()) != n) {
      throw DimensionError("Simulator: models/gains do not match the follower count");
    }
    if (!(sc_.settings.dt > 0.0) || !(sc_.settings.t_end >= sc_.settings.dt)) {
      throw ConfigError("Simulator: need dt > 0 and t_end >= dt");
    }
    if (sc_.settings.record_stride < 1) throw ConfigError("Simulator: record_stride must be >= 1");
    a_r_ = vec(sc_.leader.A0);
    n0_ = sc_.leader.states();
    // Flat state layout.
    Eigen::Index off = n0_;
    for (int i = 0; i < n; ++i) {
      const AgentModel& m = sc_.models[static_cast<std::size_t>(i)];
      Offsets o;
      o.x = off;
      off += m.states();
      o.x_hat = off;
      off += m.states();
      o.u_hat = off;
      off += m.inputs();
      o.zeta = off;
      off += n0_;
      o.a_hat = off;
      if (sc_.topology.group_of(i) == Group::Two) off += n0_ * n0_;
      offsets_.push_back(o);
    }
    phi_offset_ = off;
    off += n + sc_.topology.group2_size();
    size_ = off;
  }

  long total_steps() const {
    return static_cast<long>(std::ceil(sc_.settings.t_end / sc_.settings.dt - 1e-9));
  }

  double time_of(long step) const { return static_cast<double>(step) * sc_.settings.dt; }

  WorldState initial_world() const {
    const int n = sc_.topology.followers, m = sc_.topology.group1_size;
    WorldState w;
    w.step = 0;
    w.t = 0.0;
    const InitialConditions& ic = sc_.settings.initial;
    if (ic.leader) {
      if (ic.leader->size() != n0_) throw DimensionError("initial leader state dimension");
      w.x0 = *ic.leader;
    } else {
      w.x0 = Vector::Unit(n0_, 0);
    }
    // Plant initial states draw from a stream separate from the fault frequencies.
    Xoshiro256 rng(sc_.settings.seed ^ 0x5deece66dULL);
    for (int i = 0; i < n; ++i) {
      const AgentModel& mdl = sc_.models[static_cast<std::size_t>(i)];
      AgentState s;
      if (!ic.plants.empty()) {
        if (static_cast<int>(ic.plants.size()) != n ||
            ic.plants[static_cast<std::size_t>(i)].size() != mdl.states()) {
          throw DimensionError("initial plant states do not match the models");
        }
        s.x = ic.plants[static_cast<std::size_t>(i)];
      } else {
        s.x.resize(mdl.states());
        for (Eigen::Index k = 0; k < mdl.states(); ++k) s.x(k) = rng.uniform(-1.0, 1.0);
      }
      s.x_hat = Vector::Zero(mdl.states());
      s.u_hat = Vector::Zero(mdl.inputs());
      s.zeta = Vector::Zero(n0_);
      if (i >= m) s.a_hat = Vector::Zero(n0_ * n0_);
      w.agents.push_back(std::move(s));
    }
    for (int i = 0; i < n; ++i) {
      const AgentGains& g = sc_.gains.agents[static_cast<std::size_t>(i)];
      const TriggerFamily fam = i < m ? TriggerFamily::Zeta1 : TriggerFamily::Zeta2;
      w.leader_triggers.emplace_back(fam, g.leader_trigger, i);
      if (i >= m) w.matrix_triggers.emplace_back(TriggerFamily::AHat, g.matrix_trigger, i);
    }
    w.inputs.snapshot = effective_weights(sc_.topology, sc_.faults, 0.0);
    // Mandatory initial broadcast of every machine.
    for (auto& mach : w.leader_triggers) fire(mach, w.agents[static_cast<std::size_t>(mach.agent)].zeta, 0.0);
    for (auto& mach : w.matrix_triggers) fire(mach, w.agents[static_cast<std::size_t>(mach.agent)].a_hat, 0.0);
    refresh_inputs(w);
    return w;
  }

  /// Advances one step: RK4 with frozen inputs, weight refresh, then
  /// trigger evaluation in agent order.
  void step(WorldState& w) const {
    const Vector y = pack(w);
    const StepInputs& in = w.inputs;
    auto f = [&](double t, const Vector& state) { return derivative(t, state, w, in); };
    const Vector next = rk4_step(f, w.t, y, sc_.settings.dt);
    unpack(next, w);
    check_divergence(w, next);
    w.step += 1;
    w.t = time_of(w.step);
    w.inputs.snapshot = effective_weights(sc_.topology, sc_.faults, w.t);
    refresh_inputs(w);

    bool fired = false;
    for (std::size_t k = 0; k < w.leader_triggers.size(); ++k) {
      TriggerMachine& mach = w.leader_triggers[k];
      if (predicate(mach, w.inputs.leader_error[k], w.inputs.leader_psi[k], w.t)) {
        fire(mach, w.agents[static_cast<std::size_t>(mach.agent)].zeta, w.t);
        fired = true;
      }
    }
    for (std::size_t k = 0; k < w.matrix_triggers.size(); ++k) {
      TriggerMachine& mach = w.matrix_triggers[k];
      if (predicate(mach, w.inputs.matrix_error[k], w.inputs.matrix_psi[k], w.t)) {
        fire(mach, w.agents[static_cast<std::size_t>(mach.agent)].a_hat, w.t);
        fired = true;
      }
    }
    if (fired) refresh_inputs(w);
  }

  /// Control commands at the world's current time and inputs.
  std::vector<Vector> controls(const WorldState& w) const {
    std::vector<Vector> out;
    for (int i = 0; i < sc_.topology.followers; ++i) {
      const AgentState& s = w.agents[static_cast<std::size_t>(i)];
      out.push_back(control(i, s.x_hat, s.zeta, s.u_hat, w.x0, w.inputs));
    }
    return out;
  }

  SimTrace run() const {
    if (!sc_.gains.report.passed()) {
      throw SynthesisError("run: gain verification failed: " + sc_.gains.report.failures());
    }
    SimTrace tr;
    const int n = sc_.topology.followers;
    tr.agents.resize(static_cast<std::size_t>(n));
    tr.A0 = sc_.leader.A0;
    tr.group1_size = sc_.topology.group1_size;
    for (const auto& g : sc_.gains.agents) tr.regulator_X.push_back(g.X);
    tr.meta.seed = sc_.settings.seed;
    tr.meta.dt = sc_.settings.dt;
    tr.meta.t_end = sc_.settings.t_end;
    tr.meta.mode = sc_.settings.mode;
    tr.meta.record_stride = sc_.settings.record_stride;
    tr.meta.gain_hash = gain_hash(sc_.gains);
    const long steps = total_steps();
    tr.meta.steps = steps;

    WorldState w = initial_world();
    for (const auto& mach : w.leader_triggers) tr.machines.push_back({mach.agent, mach.family});
    for (const auto& mach : w.matrix_triggers) tr.machines.push_back({mach.agent, mach.family});
    tr.phi.resize(tr.machines.size());

    record(w, tr);
    for (long k = 0; k < steps; ++k) {
      try {
        step(w);
      } catch (const Error& e) {
        throw DivergenceError(std::string(e.what()) + " (step " + std::to_string(k + 1) +
                              ", t = " + std::to_string(time_of(k + 1)) + ")");
      }
      if (w.step % sc_.settings.record_stride == 0 || w.step == steps) record(w, tr);
    }
    for (const auto& mach : w.leader_triggers) tr.events.push_back(mach.events);
    for (const auto& mach : w.matrix_triggers) tr.events.push_back(mach.events);
    return tr;
  }

 private:
  struct Offsets {
    Eigen::Index x, x_hat, u_hat, zeta, a_hat;
  };

  Vector pack(const WorldState& w) const {
    Vector y(size_);
    y.head(n0_) = w.x0;
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
      const Offsets& o = offsets_[i];
      const AgentState& s = w.agents[i];
      y.segment(o.x, s.x.size()) = s.x;
      y.segment(o.x_hat, s.x_hat.size()) = s.x_hat;
      y.segment(o.u_hat, s.u_hat.size()) = s.u_hat;
      y.segment(o.zeta, s.zeta.size()) = s.zeta;
      if (s.a_hat.size() > 0) y.segment(o.a_hat, s.a_hat.size()) = s.a_hat;
    }
    Eigen::Index k = phi_offset_;
    for (const auto& m : w.leader_triggers) y(k++) = m.phi;
    for (const auto& m : w.matrix_triggers) y(k++) = m.phi;
    return y;
  }

  void unpack(const Vector& y, WorldState& w) const {
    w.x0 = y.head(n0_);
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
      const Offsets& o = offsets_[i];
      AgentState& s = w.agents[i];
      s.x = y.segment(o.x, s.x.size());
      s.x_hat = y.segment(o.x_hat, s.x_hat.size());
      s.u_hat = y.segment(o.u_hat, s.u_hat.size());
      s.zeta = y.segment(o.zeta, s.zeta.size());
      if (s.a_hat.size() > 0) s.a_hat = y.segment(o.a_hat, s.a_hat.size());
    }
    Eigen::Index k = phi_offset_;
    for (auto& m : w.leader_triggers) m.phi = y(k++);
    for (auto& m : w.matrix_triggers) m.phi = y(k++);
  }

  void check_divergence(const WorldState& w, const Vector& y) const {
    const double cap = sc_.settings.divergence_cap;
    auto bad = [&](const Vector& v) { return !v.allFinite() || v.norm() > cap; };
    if (!bad(y)) return;
    auto fail = [&](const std::string& what) {
      throw DivergenceError("state diverged: " + what);
    };
    if (bad(w.x0)) fail("leader x0");
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      const AgentState& s = w.agents[i];
      const std::string id = " of agent " + std::to_string(i + 1);
      if (bad(s.x)) fail("x" + id);
      if (bad(s.x_hat)) fail("x_hat" + id);
      if (bad(s.u_hat)) fail("u_hat" + id);
      if (bad(s.zeta)) fail("zeta" + id);
      if (s.a_hat.size() > 0 && bad(s.a_hat)) fail("a_hat" + id);
    }
    if (bad(y.tail(size_ - phi_offset_))) fail("trigger threshold");
    fail("combined state norm");
  }

  /// Broadcasts, trigger errors and consensus terms at w.t with the current
  /// machine snapshots and w.inputs.snapshot.
  void refresh_inputs(WorldState& w) const {
    const int n = sc_.topology.followers, m = sc_.topology.group1_size;
    StepInputs& in = w.inputs;
    const WeightSnapshot& snap = in.snapshot;
    in.broadcasts.leader_estimate.assign(static_cast<std::size_t>(n), std::nullopt);
    in.broadcasts.matrix_estimate.assign(static_cast<std::size_t>(n), std::nullopt);
    for (const auto& mach : w.leader_triggers) {
      in.broadcasts.leader_estimate[static_cast<std::size_t>(mach.agent)] =
          broadcast_value(mach, sc_.leader.A0, w.t);
    }
    for (const auto& mach : w.matrix_triggers) {
      in.broadcasts.matrix_estimate[static_cast<std::size_t>(mach.agent)] =
          broadcast_value(mach, sc_.leader.A0, w.t);
    }
    std::span<const std::optional<Vector>> lead(in.broadcasts.leader_estimate);
    std::span<const std::optional<Vector>> matr(in.broadcasts.matrix_estimate);

    in.leader_error.clear();
    in.leader_psi.clear();
    for (auto& mach : w.leader_triggers) {
      const int i = mach.agent;
      const Vector& own = *lead[static_cast<std::size_t>(i)];
      if (i < m) {
        mach.theta = theta_adaptive(snap.self_degree(i));
        in.leader_psi.push_back(adjacency_sum(snap, Block::B11, i, own, lead));
      } else {
        in.leader_psi.push_back(adjacency_sum(snap, Block::B22, i, own, lead));
      }
      in.leader_error.push_back(own - w.agents[static_cast<std::size_t>(i)].zeta);
    }
    in.matrix_error.clear();
    in.matrix_psi.clear();
    for (const auto& mach : w.matrix_triggers) {
      const int i = mach.agent;
      const Vector& own = *matr[static_cast<std::size_t>(i)];
      in.matrix_psi.push_back(adjacency_sum(snap, Block::B22, i, own, matr) +
                              snap.cross_degree(i) * (a_r_ - own));
      in.matrix_error.push_back(w.agents[static_cast<std::size_t>(i)].a_hat - own);
    }
  }

  Vector control(int i, const Vector& x_hat, const Vector& zeta, const Vector& u_hat,
                 const Vector& x0, const StepInputs& in) const {
    const AgentGains& g = sc_.gains.agents[static_cast<std::size_t>(i)];
    if (i < sc_.topology.group1_size) {
      return control1(g, i, x_hat, zeta, x0, u_hat, in.broadcasts, in.snapshot);
    }
    return control2(g, i, x_hat, zeta, u_hat, in.broadcasts, in.snapshot);
  }

  Vector derivative(double t, const Vector& y, const WorldState& w, const StepInputs& in) const {
    const int n = sc_.topology.followers, m = sc_.topology.group1_size;
    Vector dy(size_);
    const Vector x0 = y.head(n0_);
    std::vector<std::optional<DirectFeedback>> direct(static_cast<std::size_t>(m));
    for (int i = 0; i < n; ++i) {
      const auto idx = static_cast<std::size_t>(i);
      const Offsets& o = offsets_[idx];
      const AgentModel& mdl = sc_.models[idx];
      const AgentGains& g = sc_.gains.agents[idx];
      const Vector x = y.segment(o.x, mdl.states());
      const Vector x_hat = y.segment(o.x_hat, mdl.states());
      const Vector u_hat = y.segment(o.u_hat, mdl.inputs());
      const Vector zeta = y.segment(o.zeta, n0_);

      const Vector u_cmd = control(i, x_hat, zeta, u_hat, x0, in);
      const Vector u_a = sc_.faults.actuator_value(idx, mdl.inputs(), t);
      dy.segment(o.x, mdl.states()) = plant_deriv(mdl, x, u_cmd, u_a);
      const FaultObserverRates r = fault_observer_deriv(mdl, g, x, x_hat, u_hat, u_cmd);
      dy.segment(o.x_hat, mdl.states()) = r.x_hat;
      dy.segment(o.u_hat, mdl.inputs()) = r.u_hat;
      if (i < m) {
        dy.segment(o.zeta, n0_) =
            zeta1_deriv(g, sc_.leader.A0, i, zeta, x0, in.broadcasts, in.snapshot);
        direct[idx] = DirectFeedback{x, g.X, g.K, in.snapshot.gl(i)};
      } else {
        const Vector a_hat = y.segment(o.a_hat, n0_ * n0_);
        dy.segment(o.zeta, n0_) = zeta2_deriv(g, i, zeta, a_hat, in.broadcasts, in.snapshot);
        dy.segment(o.a_hat, n0_ * n0_) =
            ahat_deriv(g.estimator_gain, i, in.broadcasts, a_r_, in.snapshot);
      }
    }
    dy.head(n0_) = leader_deriv(sc_.leader, sc_.settings.mode, x0, direct);

    Eigen::Index k = phi_offset_;
    for (std::size_t j = 0; j < w.leader_triggers.size(); ++j, ++k) {
      dy(k) = phi_deriv(w.leader_triggers[j], y(k), in.leader_error[j], in.leader_psi[j], t);
    }
    for (std::size_t j = 0; j < w.matrix_triggers.size(); ++j, ++k) {
      dy(k) = phi_deriv(w.matrix_triggers[j], y(k), in.matrix_error[j], in.matrix_psi[j], t);
    }
    return dy;
  }

  void record(const WorldState& w, SimTrace& tr) const {
    tr.time.push_back(w.t);
    tr.x0.push_back(w.x0);
    tr.y0.push_back(sc_.leader.C0 * w.x0);
    const std::vector<Vector> u = controls(w);
    for (std::size_t i = 0; i < w.agents.size(); ++i) {
      const AgentState& s = w.agents[i];
      const AgentModel& mdl = sc_.models[i];
      AgentSeries& a = tr.agents[i];
      a.x.push_back(s.x);
      a.x_hat.push_back(s.x_hat);
      a.u_hat.push_back(s.u_hat);
      a.u_fault.push_back(sc_.faults.actuator_value(i, mdl.inputs(), w.t));
      a.zeta.push_back(s.zeta);
      a.a_hat.push_back(s.a_hat);
      a.u_cmd.push_back(u[i]);
      a.y.push_back(output(mdl, s.x));
    }
    std::size_t k = 0;
    for (const auto& mach : w.leader_triggers) tr.phi[k++].push_back(mach.phi);
    for (const auto& mach : w.matrix_triggers) tr.phi[k++].push_back(mach.phi);
  }

  const Scenario& sc_;
  Vector a_r_;
  Eigen::Index n0_ = 0;
  std::vector<Offsets> offsets_;
  Eigen::Index phi_offset_ = 0;
  Eigen::Index size_ = 0;
};

inline WorldState initial_world(const Scenario& scenario) {
  return Simulator(scenario).initial_world();
}

inline void step(WorldState& world, const Scenario& scenario) { Simulator(scenario).step(world); }

inline SimTrace run(const Scenario& scenario) { return Simulator(scenario).run(); }

}  // namespace etac
