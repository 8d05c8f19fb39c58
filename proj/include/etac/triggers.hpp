#pragma once

// Event-trigger state machines with dynamic thresholds.
//
// Three families share one threshold law
//   phi' = -beta phi - gamma e'He + (1/theta)|psi|^2 + tau exp(-delta/(sigma+t)) + decay(t)
// and fire when
//   omega (gamma e'He - (1/theta)|psi|^2 - tau exp(-delta/(sigma+t)) - decay(t)) >= phi.
// decay(t) is tau_hat/(sigma_hat+t) for the two leader-state families and the
// constant tau_hat for the leader-matrix family.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "etac/numerics.hpp"

namespace etac {

enum class TriggerFamily {
  Zeta1,  // group-1 leader-state estimate, broadcast flowed by e^{A0 (t - t_k)}
  AHat,   // group-2 leader-matrix estimate, broadcast held
  Zeta2,  // group-2 leader-state estimate, broadcast held
};

inline const char* to_string(TriggerFamily f) {
  switch (f) {
    case TriggerFamily::Zeta1:
      return "zeta1";
    case TriggerFamily::AHat:
      return "ahat";
    case TriggerFamily::Zeta2:
      return "zeta2";
  }
  return "?";
}

struct TriggerParams {
  double beta = 1.0;
  double gamma = 1.0;
  double tau = 0.1;
  double delta = 1.0;
  double sigma = 1.0;
  double tau_hat = 0.1;
  double sigma_hat = 1.0;
  double omega = 1.0;
  double theta = 1.0;  // fixed for AHat/Zeta2; recomputed from the degree for Zeta1
  double phi0 = 1.0;
  Matrix weight;  // H; empty means identity

  /// Sign constraints the threshold lower bound relies on.
  std::string check() const {
    std::string bad;
    auto need = [&](bool ok, const char* what) {
      if (!ok) bad += (bad.empty() ? "" : ", ") + std::string(what);
    };
    need(beta > 0.0, "beta > 0");
    need(gamma > 0.0, "gamma > 0");
    need(tau >= 0.0, "tau >= 0");
    need(delta > 0.0, "delta > 0");
    need(sigma > 0.0, "sigma > 0");
    need(tau_hat >= 0.0, "tau_hat >= 0");
    need(sigma_hat > 0.0, "sigma_hat > 0");
    need(omega > 0.0, "omega > 0");
    need(beta + 1.0 / omega > 0.0, "beta + 1/omega > 0");
    need(theta > 0.0, "theta > 0");
    need(phi0 > 0.0, "phi(0) > 0");
    return bad;
  }
};

struct TriggerMachine {
  TriggerFamily family = TriggerFamily::Zeta1;
  TriggerParams params;
  int agent = 0;  // global follower index
  double phi = 1.0;
  double theta = 1.0;
  double t_last = 0.0;
  Vector snapshot;
  std::vector<double> events;

  TriggerMachine() = default;
  TriggerMachine(TriggerFamily fam, const TriggerParams& p, int agent_index)
      : family(fam), params(p), agent(agent_index), phi(p.phi0), theta(p.theta) {}

  bool flowed() const { return family == TriggerFamily::Zeta1; }
  bool has_fired() const { return !events.empty(); }
};

inline double theta_adaptive(double degree) {
  if (!(degree > 0.0)) {
    throw AssumptionViolation("theta_adaptive: agent has non-positive in-group degree " +
                              std::to_string(degree));
  }
  return 1.0 / degree;
}

/// Value neighbors see at time t.
inline Vector broadcast_value(const TriggerMachine& m, const Matrix& a0, double t) {
  if (!m.has_fired()) {
    throw OrderingError("broadcast_value: trigger of agent " + std::to_string(m.agent + 1) +
                        " has not fired yet");
  }
  if (t < m.t_last) {
    throw OrderingError("broadcast_value: t = " + std::to_string(t) +
                        " precedes last fire at " + std::to_string(m.t_last));
  }
  if (m.flowed()) return expm(a0, t - m.t_last) * m.snapshot;
  return m.snapshot;
}

/// Broadcast minus current value for the leader-state families, current
/// minus broadcast for the matrix family. Only e'He enters the trigger.
inline Vector measurement_error(const TriggerMachine& m, const Vector& current,
                                const Matrix& a0, double t) {
  const Vector b = broadcast_value(m, a0, t);
  if (b.size() != current.size()) {
    throw DimensionError("measurement_error: payload dimension mismatch");
  }
  if (m.family == TriggerFamily::AHat) return current - b;
  return b - current;
}

namespace detail {

inline double weighted_square(const TriggerMachine& m, const Vector& e) {
  if (m.family == TriggerFamily::AHat || m.params.weight.size() == 0) return e.squaredNorm();
  if (m.params.weight.rows() != e.size() || m.params.weight.cols() != e.size()) {
    throw DimensionError("trigger weight H does not match the payload dimension");
  }
  return e.dot(m.params.weight * e);
}

inline double time_terms(const TriggerMachine& m, double t) {
  const TriggerParams& p = m.params;
  const double slow = p.tau * std::exp(-p.delta / (p.sigma + t));
  const double fast = m.family == TriggerFamily::AHat ? p.tau_hat : p.tau_hat / (p.sigma_hat + t);
  return slow + fast;
}

inline void require_theta(double theta) {
  if (!(theta > 0.0)) {
    throw AssumptionViolation("trigger theta must be positive, got " + std::to_string(theta));
  }
}

}  // namespace detail

/// Threshold rate evaluated at an arbitrary phi (used by the integrator stages).
inline double phi_deriv(const TriggerMachine& m, double phi, const Vector& e_v, const Vector& psi,
                        double t) {
  detail::require_theta(m.theta);
  const TriggerParams& p = m.params;
  return -p.beta * phi - p.gamma * detail::weighted_square(m, e_v) +
         psi.squaredNorm() / m.theta + detail::time_terms(m, t);
}

/// Threshold rate at the machine's current phi.
inline double phi_deriv(const TriggerMachine& m, const Vector& e_v, const Vector& psi, double t) {
  return phi_deriv(m, m.phi, e_v, psi, t);
}

inline bool predicate(const TriggerMachine& m, const Vector& e_v, const Vector& psi, double t) {
  detail::require_theta(m.theta);
  const TriggerParams& p = m.params;
  const double lhs = p.omega * (p.gamma * detail::weighted_square(m, e_v) -
                                psi.squaredNorm() / m.theta - detail::time_terms(m, t));
  return lhs >= m.phi;
}

/// Installs `current` as the broadcast. The first fire may happen at any
/// time; later fires must be strictly later than the previous one.
inline void fire(TriggerMachine& m, const Vector& current, double t) {
  if (m.has_fired() && !(t > m.t_last)) {
    throw OrderingError("fire: agent " + std::to_string(m.agent + 1) + " " +
                        to_string(m.family) + " at t = " + std::to_string(t) +
                        " not after previous fire at " + std::to_string(m.t_last));
  }
  m.snapshot = current;
  m.t_last = t;
  m.events.push_back(t);
}

struct ZenoReport {
  std::size_t count = 0;
  double min_gap = 0.0;   // the horizon when fewer than two events
  double mean_gap = 0.0;  // the horizon when fewer than two events
  double events_per_step = 0.0;
  bool strictly_increasing = true;
  bool min_gap_at_least_dt = true;
};

inline ZenoReport zeno_guard(const std::vector<double>& events, double dt, double horizon) {
  ZenoReport r;
  r.count = events.size();
  r.min_gap = horizon;
  r.mean_gap = horizon;
  const double steps = std::max(1.0, std::round(horizon / dt));
  r.events_per_step = static_cast<double>(events.size()) / steps;
  if (events.size() >= 2) {
    double min_gap = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < events.size(); ++k) {
      const double gap = events[k] - events[k - 1];
      if (!(gap > 0.0)) r.strictly_increasing = false;
      min_gap = std::min(min_gap, gap);
    }
    r.min_gap = min_gap;
    r.mean_gap = (events.back() - events.front()) / static_cast<double>(events.size() - 1);
    // Grid times are k*dt, so allow for rounding in the subtraction.
    r.min_gap_at_least_dt = min_gap >= dt * (1.0 - 1e-9);
  }
  return r;
}

}  // namespace etac
