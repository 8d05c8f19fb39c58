#pragma once

// Two-group weighted communication graph. Followers 0..m-1 form group 1
// (directly linked with the leader), followers m..N-1 form group 2.

#include <compare>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "etac/faults.hpp"
#include "etac/numerics.hpp"

namespace etac {

enum class Group { One, Two };

/// Adjacency block selector; the first group receives from the second.
///   Block11: group 1 <- group 1      Block12: group 1 <- group 2
///   Block21: group 2 <- group 1      Block22: group 2 <- group 2
enum class Block { B11, B12, B21, B22 };

enum class LinkKind { Follower, LeaderToFollower, FollowerToLeader };

/// Identifies one declared weight. For Follower links `to` receives from
/// `from` (weight a_{to,from}); leader links use `to` as the follower index.
struct LinkId {
  LinkKind kind = LinkKind::Follower;
  int to = 0;
  int from = 0;
  auto operator<=>(const LinkId&) const = default;
};

struct TopologySpec {
  int followers = 0;     // N
  int group1_size = 0;   // m
  Matrix a11, a12, a21, a22;
  Vector g0;  // leader -> follower k weights, length m
  Vector gl;  // follower k -> leader weights, length m
  std::map<LinkId, std::string> fault_refs;

  int group2_size() const { return followers - group1_size; }

  Group group_of(int i) const { return i < group1_size ? Group::One : Group::Two; }

  /// Full N x N nominal adjacency assembled from the four blocks.
  Matrix adjacency() const {
    const int m = group1_size, r = group2_size();
    Matrix a = Matrix::Zero(followers, followers);
    a.topLeftCorner(m, m) = a11;
    a.topRightCorner(m, r) = a12;
    a.bottomLeftCorner(r, m) = a21;
    a.bottomRightCorner(r, r) = a22;
    return a;
  }

  /// Every declared (nonzero nominal) link in a canonical order.
  std::vector<LinkId> links() const {
    std::vector<LinkId> out;
    const Matrix a = adjacency();
    for (int i = 0; i < followers; ++i) {
      for (int j = 0; j < followers; ++j) {
        if (i != j && a(i, j) != 0.0) out.push_back({LinkKind::Follower, i, j});
      }
    }
    for (int k = 0; k < group1_size; ++k) {
      if (g0(k) != 0.0) out.push_back({LinkKind::LeaderToFollower, k, -1});
    }
    for (int k = 0; k < group1_size; ++k) {
      if (gl(k) != 0.0) out.push_back({LinkKind::FollowerToLeader, k, -1});
    }
    return out;
  }

  double nominal(const LinkId& id) const {
    switch (id.kind) {
      case LinkKind::Follower:
        return adjacency()(id.to, id.from);
      case LinkKind::LeaderToFollower:
        return g0(id.to);
      case LinkKind::FollowerToLeader:
        return gl(id.to);
    }
    return 0.0;
  }

  std::string fault_ref(const LinkId& id) const {
    auto it = fault_refs.find(id);
    return it == fault_refs.end() ? std::string{} : it->second;
  }

  void check_shapes() const {
    const int m = group1_size, r = group2_size();
    auto expect = [](const Matrix& x, int rows, int cols, const char* name) {
      if (x.rows() != rows || x.cols() != cols) {
        throw DimensionError(std::string("topology: ") + name + " is " + detail::shape(x) +
                             ", expected " + std::to_string(rows) + "x" +
                             std::to_string(cols));
      }
    };
    if (followers <= 0 || m <= 0 || m > followers) {
      throw DimensionError("topology: need 0 < m <= N, got N=" + std::to_string(followers) +
                           " m=" + std::to_string(m));
    }
    expect(a11, m, m, "A11");
    expect(a12, m, r, "A12");
    expect(a21, r, m, "A21");
    expect(a22, r, r, "A22");
    if (g0.size() != m || gl.size() != m) {
      throw DimensionError("topology: leader weight vectors must have length m");
    }
  }
};

inline std::string describe(const LinkId& id) {
  switch (id.kind) {
    case LinkKind::Follower:
      return "a(" + std::to_string(id.to + 1) + "," + std::to_string(id.from + 1) + ")";
    case LinkKind::LeaderToFollower:
      return "g0(" + std::to_string(id.to + 1) + ")";
    case LinkKind::FollowerToLeader:
      return "gL(" + std::to_string(id.to + 1) + ")";
  }
  return "?";
}

struct ValidationCheck {
  std::string name;
  bool passed = true;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;

  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return true;
  }

  const ValidationCheck* find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  std::string failures() const {
    std::string out;
    for (const auto& c : checks) {
      if (!c.passed) out += (out.empty() ? "" : "; ") + c.name + ": " + c.detail;
    }
    return out;
  }
};

inline constexpr const char* kAssumptionPath = "Assumption 1 (path to leader)";
inline constexpr const char* kAssumptionSymmetry = "Assumption 2 (symmetric in-group links)";
inline constexpr const char* kAssumptionPositive = "Assumption 3 (positive perturbed weights)";

/// Graph assumptions. `faults` supplies the per-link disturbance amplitudes.
inline ValidationReport validate(const TopologySpec& spec, const FaultSet& faults) {
  spec.check_shapes();
  ValidationReport report;
  const Matrix a = spec.adjacency();
  const int n = spec.followers;

  {
    ValidationCheck c{kAssumptionSymmetry, true, ""};
    auto check_sym = [&](const Matrix& x, const char* name) {
      if ((x - x.transpose()).cwiseAbs().maxCoeff() > 0.0) {
        c.passed = false;
        c.detail += std::string(c.detail.empty() ? "" : ", ") + name + " is not symmetric";
      }
    };
    check_sym(spec.a11, "A11");
    if (spec.group2_size() > 0) check_sym(spec.a22, "A22");
    report.checks.push_back(c);
  }

  {
    ValidationCheck c{"Well-formed weights", true, ""};
    for (int i = 0; i < n; ++i) {
      if (a(i, i) != 0.0) {
        c.passed = false;
        c.detail += "nonzero self-loop at " + std::to_string(i + 1) + " ";
      }
    }
    if ((a.array() < 0.0).any() || (spec.g0.array() < 0.0).any() ||
        (spec.gl.array() < 0.0).any()) {
      c.passed = false;
      c.detail += "negative nominal weight";
    }
    report.checks.push_back(c);
  }

  {
    ValidationCheck c{kAssumptionPositive, true, ""};
    for (const auto& id : spec.links()) {
      const double lower = spec.nominal(id) - faults.amplitude(spec.fault_ref(id));
      if (!(lower > 0.0)) {
        c.passed = false;
        c.detail += (c.detail.empty() ? "" : ", ") + describe(id) +
                    " lower bound " + std::to_string(lower);
      }
    }
    if (spec.links().empty()) {
      c.passed = false;
      c.detail = "no declared links";
    }
    report.checks.push_back(c);
  }

  {
    // Breadth-first search from the leader along the information flow.
    ValidationCheck c{kAssumptionPath, true, ""};
    std::vector<bool> reached(static_cast<std::size_t>(n), false);
    std::deque<int> queue;
    for (int k = 0; k < spec.group1_size; ++k) {
      if (spec.g0(k) > 0.0) {
        reached[static_cast<std::size_t>(k)] = true;
        queue.push_back(k);
      }
    }
    while (!queue.empty()) {
      const int j = queue.front();
      queue.pop_front();
      for (int i = 0; i < n; ++i) {
        if (!reached[static_cast<std::size_t>(i)] && a(i, j) > 0.0) {
          reached[static_cast<std::size_t>(i)] = true;
          queue.push_back(i);
        }
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!reached[static_cast<std::size_t>(i)]) {
        c.passed = false;
        c.detail += (c.detail.empty() ? "follower " : ", ") + std::to_string(i + 1);
      }
    }
    if (!c.passed) c.detail += " without a path from the leader";
    report.checks.push_back(c);
  }
  return report;
}

/// Fault-perturbed weights frozen at one time instant plus the derived
/// degree and Laplacian blocks.
struct WeightSnapshot {
  double t = 0.0;
  int group1_size = 0;
  Matrix a;   // N x N perturbed adjacency
  Vector g0;  // perturbed leader -> follower weights
  Vector gl;  // perturbed follower -> leader weights
  Vector self_degree;   // d^1_i for group 1, d^2_k for group 2 (in-group row sums)
  Vector cross_degree;  // d^12_i for group 1, d^21_k for group 2

  int followers() const { return static_cast<int>(a.rows()); }
  int group2_size() const { return followers() - group1_size; }

  Matrix block(Block b) const {
    const int m = group1_size, r = group2_size();
    switch (b) {
      case Block::B11:
        return a.topLeftCorner(m, m);
      case Block::B12:
        return a.topRightCorner(m, r);
      case Block::B21:
        return a.bottomLeftCorner(r, m);
      case Block::B22:
        return a.bottomRightCorner(r, r);
    }
    return {};
  }

  Matrix laplacian1() const {
    return Matrix(self_degree.head(group1_size).asDiagonal()) - block(Block::B11);
  }
  Matrix laplacian2() const {
    return Matrix(self_degree.tail(group2_size()).asDiagonal()) - block(Block::B22);
  }
  Matrix d12() const { return cross_degree.head(group1_size).asDiagonal(); }
  Matrix d21() const { return cross_degree.tail(group2_size()).asDiagonal(); }
  Matrix g1_diag() const { return g0.asDiagonal(); }
  Matrix g2_diag() const { return gl.asDiagonal(); }
};

inline WeightSnapshot effective_weights(const TopologySpec& spec, const FaultSet& faults,
                                        double t) {
  spec.check_shapes();
  WeightSnapshot s;
  s.t = t;
  s.group1_size = spec.group1_size;
  s.a = spec.adjacency();
  s.g0 = spec.g0;
  s.gl = spec.gl;
  for (const auto& id : spec.links()) {
    const double w = spec.nominal(id) + faults.delta(spec.fault_ref(id), t);
    if (!(w > 0.0)) {
      throw AssumptionViolation("perturbed weight " + describe(id) + " = " +
                                std::to_string(w) + " at t = " + std::to_string(t));
    }
    switch (id.kind) {
      case LinkKind::Follower:
        s.a(id.to, id.from) = w;
        break;
      case LinkKind::LeaderToFollower:
        s.g0(id.to) = w;
        break;
      case LinkKind::FollowerToLeader:
        s.gl(id.to) = w;
        break;
    }
  }
  const int n = spec.followers, m = spec.group1_size;
  s.self_degree.resize(n);
  s.cross_degree.resize(n);
  for (int i = 0; i < n; ++i) {
    const double first = s.a.row(i).head(m).sum();
    const double second = s.a.row(i).tail(n - m).sum();
    s.self_degree(i) = i < m ? first : second;
    s.cross_degree(i) = i < m ? second : first;
  }
  return s;
}

/// Sum over neighbors j of the selected block of a_ij (v_j - own).
/// `agent` and the indices of `values` are global follower indices.
inline Vector adjacency_sum(const WeightSnapshot& snap, Block block, int agent,
                            const Vector& own, std::span<const std::optional<Vector>> values) {
  const int m = snap.group1_size, n = snap.followers();
  const bool row_group1 = block == Block::B11 || block == Block::B12;
  const bool col_group1 = block == Block::B11 || block == Block::B21;
  if ((agent < m) != row_group1 || agent < 0 || agent >= n) {
    throw DimensionError("adjacency_sum: agent " + std::to_string(agent + 1) +
                         " is not a row of the requested block");
  }
  const int lo = col_group1 ? 0 : m;
  const int hi = col_group1 ? m : n;
  Vector sum = Vector::Zero(own.size());
  for (int j = lo; j < hi; ++j) {
    const double w = snap.a(agent, j);
    if (j == agent || w == 0.0) continue;
    const auto idx = static_cast<std::size_t>(j);
    if (idx >= values.size() || !values[idx]) {
      throw MissingValueError("adjacency_sum: no value from neighbor " + std::to_string(j + 1) +
                              " of agent " + std::to_string(agent + 1));
    }
    const Vector& v = *values[idx];
    if (v.size() != own.size()) {
      throw DimensionError("adjacency_sum: neighbor value dimension mismatch");
    }
    sum += w * (v - own);
  }
  return sum;
}

}  // namespace etac
