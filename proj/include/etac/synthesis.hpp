#pragma once

// Offline gain synthesis and numeric verification of the solvability and
// stability conditions the runtime relies on.

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "etac/faults.hpp"
#include "etac/numerics.hpp"
#include "etac/topology.hpp"
#include "etac/triggers.hpp"

namespace etac {

enum class ReferenceMode { CRM, ORM };

inline const char* to_string(ReferenceMode m) { return m == ReferenceMode::CRM ? "crm" : "orm"; }

inline ReferenceMode reference_mode_from_string(const std::string& s) {
  if (s == "crm") return ReferenceMode::CRM;
  if (s == "orm") return ReferenceMode::ORM;
  throw ConfigError("unknown reference mode '" + s + "' (expected crm|orm)");
}

struct AgentModel {
  Matrix A, B, C;
  Group group = Group::One;

  Eigen::Index states() const { return A.rows(); }
  Eigen::Index inputs() const { return B.cols(); }
  Eigen::Index outputs() const { return C.rows(); }
};

struct LeaderModel {
  Matrix A0, C0;
  Eigen::Index states() const { return A0.rows(); }
};

/// Everything the runtime needs for one follower.
struct AgentGains {
  Group group = Group::One;
  Matrix T1, T2, X, Y;    // tracking / regulation
  Matrix W, N11, N12, Q;  // fault and state observer
  // Leader-state observer. Group 1 uses M11, M12, M1, M13; group 2 uses
  // M21 (stored in m_outer), M22 (m_group) and M23 (m_cross).
  Matrix m_outer, m_group, m_leader, m_cross;
  Matrix M3;
  Matrix N3;  // consensus matching (N3 for group 1, N^3 hat for group 2)
  Matrix N4;  // leader-error matching, group 1 only
  Matrix K;   // leader feedback gain of a direct follower (zero in ORM)
  double estimator_gain = 0.0;  // leader-matrix estimator rate, group 2 only
  TriggerParams leader_trigger;  // Zeta1 for group 1, Zeta2 for group 2
  TriggerParams matrix_trigger;  // AHat, group 2 only
};

struct VerificationItem {
  std::string name;
  int agent = -1;  // -1 for network-wide checks
  double value = 0.0;
  double limit = 0.0;
  bool passed = true;
  std::string detail;
};

struct VerificationReport {
  std::vector<VerificationItem> items;

  bool passed() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
  }

  void add(std::string name, int agent, double value, double limit, bool ok,
           std::string detail = {}) {
    items.push_back({std::move(name), agent, value, limit, ok, std::move(detail)});
  }

  std::vector<VerificationItem> select(const std::string& name) const {
    std::vector<VerificationItem> out;
    for (const auto& i : items) {
      if (i.name == name) out.push_back(i);
    }
    return out;
  }

  std::string failures() const {
    std::string out;
    for (const auto& i : items) {
      if (i.passed) continue;
      out += (out.empty() ? "" : "; ") + i.name;
      if (i.agent >= 0) out += " (agent " + std::to_string(i.agent + 1) + ")";
      if (!i.detail.empty()) out += ": " + i.detail;
    }
    return out;
  }
};

struct GainBundle {
  std::vector<AgentGains> agents;
  VerificationReport report;
};

struct SynthesisDefaults {
  std::vector<double> plant_poles{-2.0, -3.0};
  std::vector<double> observer_poles{-5.0, -6.0};
  double n11_scale = 5.0;
  double fault_lyapunov_weight = 1.0;  // Q solves (A-W)'Q + Q(A-W) = -weight I
  double alpha2 = 1.0;
  double alpha3 = 0.5;
  double m11 = 1.0, m12 = 2.0, m1 = 2.0, m13 = 0.5;
  double m21 = 1.0, m22 = 2.0, m23 = 0.5;
  double m3 = 0.0;
  double kappa = 0.2;
  double estimator_gain = 10.0;
  TriggerParams zeta1_trigger;
  TriggerParams ahat_trigger;
  TriggerParams zeta2_trigger;
  double residual_tol = 1e-8;
  double network_margin_min = 0.1;
  int network_samples = 100;
  double network_horizon = 20.0;
};

// Check names used in VerificationReport.
inline constexpr const char* kCheckControllable = "controllability";
inline constexpr const char* kCheckRegulator = "regulator residual";
inline constexpr const char* kCheckTrackingPoles = "tracking margin";
inline constexpr const char* kCheckObserverPoles = "observer margin";
inline constexpr const char* kCheckFaultLyapunov = "fault observer Lyapunov residual";
inline constexpr const char* kCheckFaultInequality = "fault observer inequality";
inline constexpr const char* kCheckFaultCoupling = "fault observer coupling N12 = Q'B";
inline constexpr const char* kCheckFeedforward = "feedforward identity";
inline constexpr const char* kCheckEstimator = "estimator gain";
inline constexpr const char* kCheckMatchingN3 = "matching residual N3";
inline constexpr const char* kCheckMatchingN4 = "matching residual N4";
inline constexpr const char* kCheckDecay = "decay rate";
inline constexpr const char* kCheckNetwork1 = "group-1 observer network margin";
inline constexpr const char* kCheckNetwork2 = "group-2 observer network margin";
inline constexpr const char* kCheckLeader = "leader model";
inline constexpr const char* kCheckTrigger = "trigger parameters";
inline constexpr const char* kCheckSynthesis = "synthesis";

inline Matrix diagonal_of(const std::vector<double>& values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k) v(static_cast<Eigen::Index>(k)) = values[k];
  return v.asDiagonal();
}

namespace detail {

// Coefficients of prod (s - p_k), highest power first.
inline std::vector<double> poly_from_roots(const std::vector<double>& roots) {
  std::vector<double> c{1.0};
  for (double r : roots) {
    std::vector<double> next(c.size() + 1, 0.0);
    for (std::size_t k = 0; k < c.size(); ++k) {
      next[k] += c[k];
      next[k + 1] -= r * c[k];
    }
    c = std::move(next);
  }
  return c;
}

// Ackermann's formula for a single-input pair: A - b k has the given poles.
inline std::optional<Matrix> ackermann(const Matrix& a, const Vector& b,
                                       const std::vector<double>& poles) {
  const Eigen::Index n = a.rows();
  Matrix ctrb(n, n);
  Vector col = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.col(k) = col;
    col = a * col;
  }
  Eigen::FullPivLU<Matrix> lu(ctrb);
  if (!lu.isInvertible()) return std::nullopt;
  const std::vector<double> c = poly_from_roots(poles);
  Matrix p_of_a = Matrix::Zero(n, n);
  for (double coeff : c) p_of_a = p_of_a * a + coeff * Matrix::Identity(n, n);
  Vector e_last = Vector::Zero(n);
  e_last(n - 1) = 1.0;
  const Matrix row = e_last.transpose() * lu.inverse() * p_of_a;
  return row;
}

}  // namespace detail

/// Feedback T1 with eig(A + B T1) at the requested real poles.
inline Matrix stabilize(const Matrix& a, const Matrix& b, const std::vector<double>& poles) {
  detail::require_square(a, "stabilize");
  if (b.rows() != a.rows()) throw DimensionError("stabilize: B rows must match A");
  const Eigen::Index n = a.rows();
  if (static_cast<Eigen::Index>(poles.size()) != n) {
    throw SynthesisError("stabilize: need " + std::to_string(n) + " target poles, got " +
                         std::to_string(poles.size()));
  }
  for (double p : poles) {
    if (!(p < 0.0)) throw SynthesisError("stabilize: target poles must be negative");
  }
  if (!is_controllable(a, b)) throw SynthesisError("stabilize: (A, B) is not controllable");

  const double target = *std::max_element(poles.begin(), poles.end());
  Matrix t1;
  if (b.rows() == b.cols() && Eigen::FullPivLU<Matrix>(b).isInvertible()) {
    // Square invertible input matrix: assign A + B T1 = diag(poles) directly.
    t1 = b.fullPivLu().solve(diagonal_of(poles) - a);
  } else {
    // Reduce to a single input u = v w and use Ackermann on (A, B v).
    std::vector<Vector> directions;
    directions.push_back(Vector::Ones(b.cols()));
    for (Eigen::Index k = 0; k < b.cols(); ++k) directions.push_back(Vector::Unit(b.cols(), k));
    for (Eigen::Index k = 0; k < b.cols(); ++k) {
      Vector v = Vector::LinSpaced(b.cols(), 1.0, static_cast<double>(b.cols()));
      v(k) = -v(k);
      directions.push_back(v);
    }
    for (const auto& v : directions) {
      const auto k = detail::ackermann(a, b * v, poles);
      if (!k) continue;
      Matrix candidate = -v * (*k);
      if (hurwitz_margin(a + b * candidate) <= target + 1e-6) {
        t1 = candidate;
        break;
      }
    }
    if (t1.size() == 0) {
      throw SynthesisError("stabilize: no single-input reduction reached the target poles");
    }
  }
  if (hurwitz_margin(a + b * t1) > target + 1e-6) {
    throw SynthesisError("stabilize: pole assignment missed the target margin");
  }
  return t1;
}

struct RegulatorSolution {
  Matrix X, Y;
  double residual = 0.0;
};

/// Minimum-norm solution of X A0 = A X + B Y, C X = C0.
inline RegulatorSolution solve_regulator(const Matrix& a, const Matrix& b, const Matrix& c,
                                         const Matrix& a0, const Matrix& c0, double tol = 1e-8,
                                         int agent = -1) {
  detail::require_square(a, "solve_regulator");
  detail::require_square(a0, "solve_regulator");
  const Eigen::Index n = a.rows(), p = b.cols(), q = c.rows(), n0 = a0.rows();
  if (b.rows() != n || c.cols() != n || c0.rows() != q || c0.cols() != n0) {
    throw DimensionError("solve_regulator: inconsistent dimensions");
  }
  const Matrix in = Matrix::Identity(n, n);
  const Matrix in0 = Matrix::Identity(n0, n0);
  Matrix lhs = Matrix::Zero(n * n0 + q * n0, n * n0 + p * n0);
  lhs.topLeftCorner(n * n0, n * n0) = kron(a0.transpose(), in) - kron(in0, a);
  lhs.topRightCorner(n * n0, p * n0) = -kron(in0, b);
  lhs.bottomLeftCorner(q * n0, n * n0) = kron(in0, c);
  Vector rhs = Vector::Zero(lhs.rows());
  rhs.tail(q * n0) = vec(c0);

  const LeastNormSolution sol = solve_least_norm(lhs, rhs);
  RegulatorSolution out;
  out.X = mat(sol.x.head(n * n0), n, n0);
  out.Y = mat(sol.x.tail(p * n0), p, n0);
  out.residual = sol.residual;
  if (!(out.residual <= tol)) {
    throw SynthesisError("regulator equations unsolvable" +
                         (agent >= 0 ? " for agent " + std::to_string(agent + 1) : std::string{}) +
                         " (residual " + std::to_string(out.residual) + ")");
  }
  return out;
}

inline Matrix feedforward(const Matrix& t1, const Matrix& x, const Matrix& y) {
  if (t1.cols() != x.rows() || t1.rows() != y.rows() || x.cols() != y.cols()) {
    throw DimensionError("feedforward: shape mismatch");
  }
  return y - t1 * x;
}

struct FaultObserverGains {
  Matrix W, N11, N12, Q;
  double inequality = 0.0;  // alpha2 + alpha3 n11 - n11, must be negative
  double lyapunov_residual = 0.0;
};

inline FaultObserverGains design_fault_observer(const Matrix& a, const Matrix& b,
                                                const std::vector<double>& observer_poles,
                                                double n11_scale, double alpha2 = 1.0,
                                                double alpha3 = 0.5,
                                                double lyapunov_weight = 1.0) {
  const Eigen::Index n = a.rows();
  FaultObserverGains g;
  // A - W = A + T with T placing eig(A + I T) at the observer poles.
  g.W = -stabilize(a, Matrix::Identity(n, n), observer_poles);
  const Matrix closed = a - g.W;
  const Matrix weight = lyapunov_weight * Matrix::Identity(n, n);
  g.Q = lyapunov_solve(closed, weight);
  g.lyapunov_residual = lyapunov_residual(closed, g.Q, weight);
  g.N12 = g.Q.transpose() * b;
  g.N11 = n11_scale * Matrix::Identity(b.cols(), b.cols());
  g.inequality = alpha2 + alpha3 * n11_scale - n11_scale;
  return g;
}

struct MatchingSolution {
  Matrix N3, N4;  // N4 empty for group 2
  double residual_n3 = 0.0;
  double residual_n4 = 0.0;
};

namespace detail {

inline Matrix solve_columns(const Matrix& b, const Matrix& rhs, double& residual) {
  Matrix out(b.cols(), rhs.cols());
  for (Eigen::Index k = 0; k < rhs.cols(); ++k) {
    out.col(k) = solve_least_norm(b, rhs.col(k)).x;
  }
  residual = (b * out - rhs).norm();
  return out;
}

}  // namespace detail

/// X M_outer M_group = B N3 and, for group 1, X M_outer M_leader g0 = -B N4.
inline MatchingSolution solve_matching(const Matrix& x, const Matrix& m_outer,
                                       const Matrix& m_group, const Matrix& m_leader,
                                       double leader_weight, const Matrix& b, Group group,
                                       double tol = 1e-8, int agent = -1) {
  MatchingSolution out;
  out.N3 = detail::solve_columns(b, x * m_outer * m_group, out.residual_n3);
  if (group == Group::One) {
    out.N4 = detail::solve_columns(b, -leader_weight * x * m_outer * m_leader, out.residual_n4);
  }
  if (!(std::max(out.residual_n3, out.residual_n4) <= tol)) {
    throw SynthesisError("matching infeasible" +
                         (agent >= 0 ? " for agent " + std::to_string(agent + 1) : std::string{}) +
                         "; adjust the observer gain scalars");
  }
  return out;
}

struct DecayCertificate {
  double rate = 0.0;  // -2 x spectral abscissa of A + B (T1 + M3)
  Matrix P;
};

inline DecayCertificate verify_decay(const Matrix& a, const Matrix& b, const Matrix& t1,
                                     const Matrix& m3) {
  const Matrix closed = a + b * (t1 + m3);
  const double margin = hurwitz_margin(closed);
  if (!(margin < 0.0)) {
    throw SynthesisError("verify_decay: A + B (T1 + M3) is not Hurwitz (abscissa " +
                         std::to_string(margin) + ")");
  }
  DecayCertificate out;
  out.rate = -2.0 * margin;
  out.P = lyapunov_solve(closed, Matrix::Identity(a.rows(), a.rows()));
  return out;
}

/// Stacked group-1 leader-observer error matrix
///   I (x) A0 - M11 M1 (G1 (x) I) - M11 M12 (L_D1 (x) I) - M11 M13 (D12 (x) I)
/// with block-diagonal per-agent gains.
inline Matrix observer_network_matrix1(const WeightSnapshot& snap, const Matrix& a0,
                                       const std::vector<AgentGains>& gains) {
  const int m = snap.group1_size;
  const Eigen::Index n0 = a0.rows();
  const Matrix lap = snap.laplacian1();
  Matrix e = Matrix::Zero(m * n0, m * n0);
  for (int i = 0; i < m; ++i) {
    const AgentGains& g = gains[static_cast<std::size_t>(i)];
    for (int j = 0; j < m; ++j) {
      Matrix blk = -lap(i, j) * g.m_outer * g.m_group;
      if (i == j) {
        blk += a0 - snap.g0(i) * g.m_outer * g.m_leader -
               snap.cross_degree(i) * g.m_outer * g.m_cross;
      }
      e.block(i * n0, j * n0, n0, n0) = blk;
    }
  }
  return e;
}

/// Group-2 counterpart with the exact leader matrix:
///   I (x) A0 - M21 M22 (L_D2 (x) I) - M21 M23 (D21 (x) I).
inline Matrix observer_network_matrix2(const WeightSnapshot& snap, const Matrix& a0,
                                       const std::vector<AgentGains>& gains) {
  const int m = snap.group1_size, r = snap.group2_size();
  const Eigen::Index n0 = a0.rows();
  const Matrix lap = snap.laplacian2();
  Matrix e = Matrix::Zero(r * n0, r * n0);
  for (int i = 0; i < r; ++i) {
    const AgentGains& g = gains[static_cast<std::size_t>(m + i)];
    for (int j = 0; j < r; ++j) {
      Matrix blk = -lap(i, j) * g.m_outer * g.m_group;
      if (i == j) blk += a0 - snap.cross_degree(m + i) * g.m_outer * g.m_cross;
      e.block(i * n0, j * n0, n0, n0) = blk;
    }
  }
  return e;
}

struct NetworkMargin {
  double group1 = 0.0;
  double group2 = 0.0;
};

/// Worst spectral abscissa of the stacked observer error matrices over the
/// sampled weight snapshots.
inline NetworkMargin verify_observer_network(const std::vector<WeightSnapshot>& samples,
                                             const Matrix& a0,
                                             const std::vector<AgentGains>& gains) {
  NetworkMargin out{-std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity()};
  for (const auto& s : samples) {
    out.group1 = std::max(out.group1, hurwitz_margin(observer_network_matrix1(s, a0, gains)));
    if (s.group2_size() > 0) {
      out.group2 = std::max(out.group2, hurwitz_margin(observer_network_matrix2(s, a0, gains)));
    }
  }
  return out;
}

inline Matrix design_leader_feedback(const Matrix& x, double kappa) {
  if (kappa == 0.0) return Matrix::Zero(x.cols(), x.rows());
  return kappa * pinv(x);
}

/// Leader model assumptions: (A0, C0) observable; eigenvalues of A0 on the
/// imaginary axis and away from zero.
inline ValidationCheck check_leader(const LeaderModel& leader, double tol = 1e-9) {
  ValidationCheck c{kCheckLeader, true, ""};
  if (leader.A0.rows() != leader.A0.cols() || leader.C0.cols() != leader.A0.cols()) {
    c.passed = false;
    c.detail = "inconsistent leader dimensions";
    return c;
  }
  if (!is_observable(leader.A0, leader.C0)) {
    c.passed = false;
    c.detail = "(A0, C0) not observable";
  }
  const Eigen::VectorXcd ev = eigenvalues(leader.A0);
  for (Eigen::Index k = 0; k < ev.size(); ++k) {
    if (std::abs(ev(k).real()) > tol || std::abs(ev(k)) <= tol) {
      c.passed = false;
      c.detail += (c.detail.empty() ? "" : "; ") +
                  std::string("A0 eigenvalues must be nonzero and purely imaginary");
      break;
    }
  }
  return c;
}

namespace detail {

inline double regulator_residual(const AgentModel& m, const Matrix& x, const Matrix& y,
                                 const LeaderModel& leader) {
  const double r1 = (x * leader.A0 - m.A * x - m.B * y).norm();
  const double r2 = (m.C * x - leader.C0).norm();
  return std::max(r1, r2);
}

/// Relative residual of (A-W)'Q + Q(A-W) = -w I with w taken from the trace.
inline double fault_lyapunov_residual(const Matrix& closed, const Matrix& q) {
  const Matrix r = -(closed.transpose() * q + q * closed);
  const double w = r.trace() / static_cast<double>(r.rows());
  if (!(w > 0.0)) return std::numeric_limits<double>::infinity();
  return (r - w * Matrix::Identity(r.rows(), r.cols())).norm() / w;
}

inline double min_sym_eig(const Matrix& m) {
  const Matrix s = 0.5 * (m + m.transpose());
  return Eigen::SelfAdjointEigenSolver<Matrix>(s, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
}

}  // namespace detail

/// Re-derives every residual and margin from a populated gain set. Used for
/// freshly synthesised gains and for gains loaded from a file.
inline VerificationReport verify_gains(const std::vector<AgentModel>& models,
                                       const LeaderModel& leader, const TopologySpec& topology,
                                       const FaultSet& faults,
                                       const std::vector<AgentGains>& gains,
                                       const SynthesisDefaults& d) {
  topology.check_shapes();
  VerificationReport rep;
  const double tol = d.residual_tol;
  if (gains.size() != models.size() || static_cast<int>(models.size()) != topology.followers) {
    rep.add(kCheckSynthesis, -1, 0.0, 0.0, false, "gain set does not match the follower count");
    return rep;
  }
  const ValidationCheck leader_check = check_leader(leader);
  rep.add(kCheckLeader, -1, 0.0, 0.0, leader_check.passed, leader_check.detail);

  FaultSet nominal = faults;
  nominal.comm_enabled = false;
  const WeightSnapshot nominal_snap = effective_weights(topology, nominal, 0.0);
  const double track_limit = *std::max_element(d.plant_poles.begin(), d.plant_poles.end());
  const double obs_limit = *std::max_element(d.observer_poles.begin(), d.observer_poles.end());

  bool agents_ok = true;
  for (std::size_t idx = 0; idx < models.size(); ++idx) {
    const int agent = static_cast<int>(idx);
    const AgentModel& mdl = models[idx];
    const AgentGains& g = gains[idx];
    const std::size_t before = rep.items.size();
    try {
      std::string bad = g.leader_trigger.check();
      if (g.group == Group::Two) bad += g.matrix_trigger.check();
      rep.add(kCheckTrigger, agent, 0.0, 0.0, bad.empty(), bad);
      rep.add(kCheckControllable, agent, 0.0, 0.0, is_controllable(mdl.A, mdl.B),
              "(A, B) not controllable");

      const double track = hurwitz_margin(mdl.A + mdl.B * g.T1);
      rep.add(kCheckTrackingPoles, agent, track, track_limit, track <= track_limit + 1e-6);

      const double reg = detail::regulator_residual(mdl, g.X, g.Y, leader);
      rep.add(kCheckRegulator, agent, reg, tol, reg <= tol);
      const double ff = (g.T2 - (g.Y - g.T1 * g.X)).norm();
      rep.add(kCheckFeedforward, agent, ff, tol, ff <= tol);

      const Matrix closed = mdl.A - g.W;
      const double obs = hurwitz_margin(closed);
      rep.add(kCheckObserverPoles, agent, obs, obs_limit, obs <= obs_limit + 1e-6);
      const double lyap = detail::fault_lyapunov_residual(closed, g.Q);
      rep.add(kCheckFaultLyapunov, agent, lyap, 1e-9,
              lyap <= 1e-9 && is_positive_definite(g.Q));
      const double coupling = (g.N12 - g.Q.transpose() * mdl.B).norm() /
                              std::max(1.0, g.N12.norm());
      rep.add(kCheckFaultCoupling, agent, coupling, tol, coupling <= tol);
      const double n11 = detail::min_sym_eig(g.N11);
      const double ineq = d.alpha2 + d.alpha3 * n11 - n11;
      rep.add(kCheckFaultInequality, agent, ineq, 0.0, ineq < 0.0);

      const Matrix lhs3 = g.X * g.m_outer * g.m_group;
      const double r3 = (lhs3 - mdl.B * g.N3).norm();
      rep.add(kCheckMatchingN3, agent, r3, tol, r3 <= tol);
      if (g.group == Group::One) {
        const double r4 =
            (nominal_snap.g0(agent) * g.X * g.m_outer * g.m_leader + mdl.B * g.N4).norm();
        rep.add(kCheckMatchingN4, agent, r4, tol, r4 <= tol);
      } else {
        rep.add(kCheckEstimator, agent, g.estimator_gain, 0.0, g.estimator_gain > 0.0);
      }

      const DecayCertificate dc = verify_decay(mdl.A, mdl.B, g.T1, g.M3);
      rep.add(kCheckDecay, agent, dc.rate, 0.0, dc.rate > 0.0);
    } catch (const Error& e) {
      rep.add(kCheckSynthesis, agent, 0.0, 0.0, false, e.what());
    }
    for (std::size_t k = before; k < rep.items.size(); ++k) agents_ok &= rep.items[k].passed;
  }

  if (agents_ok) {
    std::vector<WeightSnapshot> samples;
    const int count = std::max(1, d.network_samples);
    for (int k = 0; k < count; ++k) {
      const double t = count == 1 ? 0.0 : d.network_horizon * k / (count - 1);
      samples.push_back(effective_weights(topology, faults, t));
    }
    const NetworkMargin nm = verify_observer_network(samples, leader.A0, gains);
    rep.add(kCheckNetwork1, -1, nm.group1, -d.network_margin_min,
            nm.group1 <= -d.network_margin_min);
    if (topology.group2_size() > 0) {
      rep.add(kCheckNetwork2, -1, nm.group2, -d.network_margin_min,
              nm.group2 <= -d.network_margin_min);
    }
  }
  return rep;
}

/// Full pipeline. Per-agent design failures are recorded in the report (with
/// the agent id) instead of aborting, so one bad model does not hide the rest.
inline GainBundle synthesize_all(const std::vector<AgentModel>& models, const LeaderModel& leader,
                                 const TopologySpec& topology, const FaultSet& faults,
                                 ReferenceMode mode, const SynthesisDefaults& d) {
  topology.check_shapes();
  if (static_cast<int>(models.size()) != topology.followers) {
    throw DimensionError("synthesize_all: " + std::to_string(models.size()) +
                         " models for " + std::to_string(topology.followers) + " followers");
  }
  GainBundle bundle;
  VerificationReport design;
  const double tol = d.residual_tol;
  const Eigen::Index n0 = leader.states();

  FaultSet nominal = faults;
  nominal.comm_enabled = false;
  const WeightSnapshot nominal_snap = effective_weights(topology, nominal, 0.0);
  const Matrix i0 = Matrix::Identity(n0, n0);

  bundle.agents.resize(models.size());
  for (std::size_t idx = 0; idx < models.size(); ++idx) {
    const int agent = static_cast<int>(idx);
    const AgentModel& mdl = models[idx];
    AgentGains& g = bundle.agents[idx];
    g.group = topology.group_of(agent);
    try {
      if (!is_controllable(mdl.A, mdl.B)) {
        design.add(kCheckControllable, agent, 0.0, 0.0, false, "(A, B) not controllable");
        continue;
      }
      g.T1 = stabilize(mdl.A, mdl.B, d.plant_poles);
      const RegulatorSolution reg = solve_regulator(mdl.A, mdl.B, mdl.C, leader.A0, leader.C0,
                                                    tol, agent);
      g.X = reg.X;
      g.Y = reg.Y;
      g.T2 = feedforward(g.T1, g.X, g.Y);

      const FaultObserverGains fo =
          design_fault_observer(mdl.A, mdl.B, d.observer_poles, d.n11_scale, d.alpha2, d.alpha3,
                                d.fault_lyapunov_weight);
      g.W = fo.W;
      g.N11 = fo.N11;
      g.N12 = fo.N12;
      g.Q = fo.Q;

      g.M3 = d.m3 * Matrix::Identity(mdl.inputs(), mdl.states());
      if (g.group == Group::One) {
        g.m_outer = d.m11 * i0;
        g.m_group = d.m12 * i0;
        g.m_leader = d.m1 * i0;
        g.m_cross = d.m13 * i0;
        g.leader_trigger = d.zeta1_trigger;
        const MatchingSolution ms = solve_matching(g.X, g.m_outer, g.m_group, g.m_leader,
                                                   nominal_snap.g0(agent), mdl.B, g.group,
                                                   tol, agent);
        g.N3 = ms.N3;
        g.N4 = ms.N4;
        g.K = design_leader_feedback(g.X, mode == ReferenceMode::CRM ? d.kappa : 0.0);
      } else {
        g.m_outer = d.m21 * i0;
        g.m_group = d.m22 * i0;
        g.m_cross = d.m23 * i0;
        g.leader_trigger = d.zeta2_trigger;
        g.matrix_trigger = d.ahat_trigger;
        g.estimator_gain = d.estimator_gain;
        const MatchingSolution ms = solve_matching(g.X, g.m_outer, g.m_group, Matrix{}, 0.0,
                                                   mdl.B, g.group, tol, agent);
        g.N3 = ms.N3;
      }
    } catch (const Error& e) {
      design.add(kCheckSynthesis, agent, 0.0, 0.0, false, e.what());
    }
  }

  if (!design.passed()) {
    const ValidationCheck leader_check = check_leader(leader);
    design.items.insert(design.items.begin(),
                        {kCheckLeader, -1, 0.0, 0.0, leader_check.passed, leader_check.detail});
    bundle.report = design;
    return bundle;
  }
  bundle.report = verify_gains(models, leader, topology, faults, bundle.agents, d);
  return bundle;
}

}  // namespace etac
