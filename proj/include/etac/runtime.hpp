#pragma once

// Continuous-time vector fields of the leader, the plants and every
// per-agent observer, plus both control laws.

#include <optional>
#include <span>
#include <vector>

#include "etac/numerics.hpp"
#include "etac/synthesis.hpp"
#include "etac/topology.hpp"

namespace etac {

struct AgentState {
  Vector x;      // plant state
  Vector x_hat;  // state estimate
  Vector u_hat;  // actuator fault estimate
  Vector zeta;   // leader-state estimate
  Vector a_hat;  // vec of the leader-matrix estimate (group 2 only, else empty)
};

struct LeaderState {
  Vector x0;
};

/// Broadcast values currently visible on the network, indexed by global
/// follower id. `leader_estimate[i]` is the flowed group-1 or held group-2
/// leader-state broadcast of agent i; `matrix_estimate[i]` is the held
/// leader-matrix broadcast of a group-2 agent.
struct Broadcasts {
  std::vector<std::optional<Vector>> leader_estimate;
  std::vector<std::optional<Vector>> matrix_estimate;
};

namespace detail {

inline const Vector& own_value(std::span<const std::optional<Vector>> values, int agent,
                               const char* what) {
  const auto idx = static_cast<std::size_t>(agent);
  if (idx >= values.size() || !values[idx]) {
    throw MissingValueError(std::string(what) + ": agent " + std::to_string(agent + 1) +
                            " has no broadcast of its own");
  }
  return *values[idx];
}

}  // namespace detail

inline Vector plant_deriv(const AgentModel& model, const Vector& x, const Vector& u_cmd,
                          const Vector& u_a) {
  if (x.size() != model.states() || u_cmd.size() != model.inputs() ||
      u_a.size() != model.inputs()) {
    throw DimensionError("plant_deriv: dimension mismatch");
  }
  return model.A * x + model.B * (u_cmd + u_a);
}

inline Vector output(const AgentModel& model, const Vector& x) { return model.C * x; }

struct FaultObserverRates {
  Vector x_hat;
  Vector u_hat;
};

inline FaultObserverRates fault_observer_deriv(const AgentModel& model, const AgentGains& g,
                                               const Vector& x, const Vector& x_hat,
                                               const Vector& u_hat, const Vector& u_cmd) {
  if (x.size() != x_hat.size() || u_hat.size() != model.inputs() ||
      u_cmd.size() != model.inputs()) {
    throw DimensionError("fault_observer_deriv: dimension mismatch");
  }
  const Vector innovation = x - x_hat;
  return {model.A * x_hat + model.B * (u_cmd + u_hat) + g.W * innovation,
          -g.N11 * u_hat + g.N12 * innovation};
}

/// What the leader hears from one direct follower in CRM mode.
struct DirectFeedback {
  Vector x;    // follower plant state
  Matrix X;    // its regulator solution
  Matrix K;    // its leader feedback gain
  double weight = 0.0;  // perturbed follower -> leader weight
};

inline Vector leader_deriv(const LeaderModel& leader, ReferenceMode mode, const Vector& x0,
                           std::span<const std::optional<DirectFeedback>> direct) {
  Vector dx = leader.A0 * x0;
  if (mode == ReferenceMode::ORM) return dx;
  for (std::size_t j = 0; j < direct.size(); ++j) {
    if (!direct[j]) {
      throw MissingValueError("leader_deriv: no feedback from direct follower " +
                              std::to_string(j + 1));
    }
    const DirectFeedback& f = *direct[j];
    dx += f.weight * f.K * (f.x - f.X * x0);
  }
  return dx;
}

/// Group-1 leader-state observer:
///   zeta' = A0 zeta + M11 (M12 sum_11 a_ij (zb_j - zb_i) + g0_i M1 (x0 - zeta)
///                          + M13 sum_12 a_ij (zb_j - zb_i))
inline Vector zeta1_deriv(const AgentGains& g, const Matrix& a0, int agent, const Vector& zeta,
                          const Vector& x0, const Broadcasts& b, const WeightSnapshot& snap) {
  std::span<const std::optional<Vector>> values(b.leader_estimate);
  const Vector& own = detail::own_value(values, agent, "zeta1_deriv");
  const Vector xi = g.m_group * adjacency_sum(snap, Block::B11, agent, own, values) +
                    snap.g0(agent) * g.m_leader * (x0 - zeta) +
                    g.m_cross * adjacency_sum(snap, Block::B12, agent, own, values);
  return a0 * zeta + g.m_outer * xi;
}

/// Group-2 leader-matrix estimator. `relay` is the exact vec(A0) group-1
/// neighbors pass along their links.
inline Vector ahat_deriv(double gain, int agent, const Broadcasts& b, const Vector& relay,
                         const WeightSnapshot& snap) {
  std::span<const std::optional<Vector>> values(b.matrix_estimate);
  const Vector& own = detail::own_value(values, agent, "ahat_deriv");
  if (relay.size() != own.size()) throw DimensionError("ahat_deriv: relay dimension mismatch");
  const Vector group = adjacency_sum(snap, Block::B22, agent, own, values);
  const Vector leader_path = snap.cross_degree(agent) * (relay - own);
  return gain * (group + leader_path);
}

/// Group-2 leader-state observer driven by the agent's own matrix estimate;
/// no access to the leader state or the leader matrix.
inline Vector zeta2_deriv(const AgentGains& g, int agent, const Vector& zeta,
                          const Vector& a_hat, const Broadcasts& b,
                          const WeightSnapshot& snap) {
  std::span<const std::optional<Vector>> values(b.leader_estimate);
  const Vector& own = detail::own_value(values, agent, "zeta2_deriv");
  const Matrix a_est = mat(a_hat, zeta.size(), zeta.size());
  const Vector xi = g.m_group * adjacency_sum(snap, Block::B22, agent, own, values) +
                    g.m_cross * adjacency_sum(snap, Block::B21, agent, own, values);
  return a_est * zeta + g.m_outer * xi;
}

/// Group-1 control law.
inline Vector control1(const AgentGains& g, int agent, const Vector& x_hat, const Vector& zeta,
                       const Vector& x0, const Vector& u_hat, const Broadcasts& b,
                       const WeightSnapshot& snap) {
  std::span<const std::optional<Vector>> values(b.leader_estimate);
  const Vector& own = detail::own_value(values, agent, "control1");
  const Vector psi = adjacency_sum(snap, Block::B11, agent, own, values);
  return -u_hat + g.T1 * x_hat + g.T2 * zeta + g.M3 * (x_hat - g.X * zeta) + g.N3 * psi +
         g.N4 * (zeta - x0);
}

/// Group-2 control law.
inline Vector control2(const AgentGains& g, int agent, const Vector& x_hat, const Vector& zeta,
                       const Vector& u_hat, const Broadcasts& b, const WeightSnapshot& snap) {
  std::span<const std::optional<Vector>> values(b.leader_estimate);
  const Vector& own = detail::own_value(values, agent, "control2");
  const Vector psi = adjacency_sum(snap, Block::B22, agent, own, values);
  return -u_hat + g.T1 * x_hat + g.T2 * zeta + g.M3 * (x_hat - g.X * zeta) + g.N3 * psi;
}

}  // namespace etac
