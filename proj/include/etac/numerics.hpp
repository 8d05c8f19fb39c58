#pragma once

// Dense small-matrix primitives: matrix exponential, minimum-norm least
// squares, Lyapunov equations, spectral abscissa and vec/mat reshaping.

#include <cmath>
#include <complex>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "etac/error.hpp"

namespace etac {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

namespace detail {

inline std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_square(const Matrix& a, const char* what) {
  if (a.rows() != a.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " + shape(a));
  }
}

}  // namespace detail

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

/// Column-stacking vectorization: vec([x1 ... xN]) = [x1; ...; xN].
inline Vector vec(const Matrix& m) {
  return Eigen::Map<const Vector>(m.data(), m.size());
}

/// Inverse of vec().
inline Matrix mat(const Vector& v, Eigen::Index rows, Eigen::Index cols) {
  if (rows < 0 || cols < 0 || v.size() != rows * cols) {
    throw DimensionError("mat: vector of length " + std::to_string(v.size()) +
                         " cannot be reshaped to " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
  return Eigen::Map<const Matrix>(v.data(), rows, cols);
}

/// e^{A dt} by scaling and squaring with a degree-13 Pade approximant.
inline Matrix expm(const Matrix& a, double dt) {
  detail::require_square(a, "expm");
  if (!std::isfinite(dt)) throw DimensionError("expm: non-finite time step");
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  if (n == 0 || dt == 0.0) return ident;

  static constexpr double kCoeff[14] = {
      64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
      1187353796428800.0,  129060195264000.0,   10559470521600.0,
      670442572800.0,      33522128640.0,       1323241920.0,
      40840800.0,          960960.0,            16380.0,
      182.0,               1.0};
  constexpr double kTheta13 = 5.371920351148152;

  Matrix x = a * dt;
  const double norm1 = x.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > kTheta13) {
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / kTheta13)));
    x /= std::ldexp(1.0, squarings);
  }

  const Matrix x2 = x * x;
  const Matrix x4 = x2 * x2;
  const Matrix x6 = x4 * x2;
  const Matrix u_inner = kCoeff[13] * x6 + kCoeff[11] * x4 + kCoeff[9] * x2;
  const Matrix u = x * (x6 * u_inner + kCoeff[7] * x6 + kCoeff[5] * x4 + kCoeff[3] * x2 +
                        kCoeff[1] * ident);
  const Matrix v_inner = kCoeff[12] * x6 + kCoeff[10] * x4 + kCoeff[8] * x2;
  const Matrix v =
      x6 * v_inner + kCoeff[6] * x6 + kCoeff[4] * x4 + kCoeff[2] * x2 + kCoeff[0] * ident;

  Matrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  return r;
}

struct LeastNormSolution {
  Vector x;
  double residual = 0.0;  // ||M x - b||_2
};

/// Minimum-norm minimizer of ||M x - b||_2.
inline LeastNormSolution solve_least_norm(const Matrix& m, const Vector& b) {
  if (b.size() != m.rows()) {
    throw DimensionError("solve_least_norm: rhs length " + std::to_string(b.size()) +
                         " does not match " + detail::shape(m));
  }
  LeastNormSolution out;
  if (m.cols() == 0) {
    out.x = Vector(0);
    out.residual = b.norm();
    return out;
  }
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
  out.x = cod.solve(b);
  out.residual = (m * out.x - b).norm();
  return out;
}

/// Moore-Penrose pseudo-inverse (minimum-norm solve against the identity).
inline Matrix pinv(const Matrix& m) {
  if (m.size() == 0) return Matrix::Zero(m.cols(), m.rows());
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(m).pseudoInverse();
}

inline Eigen::VectorXcd eigenvalues(const Matrix& a) {
  detail::require_square(a, "eigenvalues");
  const Eigen::Index n = a.rows();
  Eigen::VectorXcd out(n);
  if (n == 0) return out;
  if (n == 1) {
    out(0) = a(0, 0);
    return out;
  }
  if (n == 2) {
    // Roots of lambda^2 - tr lambda + det.
    const double tr = a(0, 0) + a(1, 1);
    const double det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    const double disc = tr * tr - 4.0 * det;
    if (disc >= 0.0) {
      const double s = std::sqrt(disc);
      out(0) = 0.5 * (tr + s);
      out(1) = 0.5 * (tr - s);
    } else {
      const double s = std::sqrt(-disc);
      out(0) = std::complex<double>(0.5 * tr, 0.5 * s);
      out(1) = std::complex<double>(0.5 * tr, -0.5 * s);
    }
    return out;
  }
  Eigen::EigenSolver<Matrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    throw InfeasibleError("eigenvalues: QR iteration did not converge");
  }
  return solver.eigenvalues();
}

/// Spectral abscissa: the largest real part over the eigenvalues of A.
inline double hurwitz_margin(const Matrix& a) {
  detail::require_square(a, "hurwitz_margin");
  if (a.rows() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(a).real().maxCoeff();
}

/// Solves A^T P + P A = -Q for symmetric P > 0. A must be Hurwitz.
inline Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
  detail::require_square(a, "lyapunov_solve");
  if (q.rows() != a.rows() || q.cols() != a.cols()) {
    throw DimensionError("lyapunov_solve: Q is " + detail::shape(q) + ", A is " +
                         detail::shape(a));
  }
  const double margin = hurwitz_margin(a);
  if (!(margin < 0.0)) {
    throw InfeasibleError("lyapunov_solve: A is not Hurwitz (spectral abscissa " +
                          std::to_string(margin) + ")");
  }
  const Eigen::Index n = a.rows();
  const Matrix ident = Matrix::Identity(n, n);
  // vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P)
  const Matrix op = kron(ident, a.transpose()) + kron(a.transpose(), ident);
  const Vector p = op.fullPivLu().solve(-vec(q));
  Matrix out = mat(p, n, n);
  return 0.5 * (out + out.transpose()).eval();
}

inline double lyapunov_residual(const Matrix& a, const Matrix& p, const Matrix& q) {
  return (a.transpose() * p + p * a + q).norm();
}

inline bool is_positive_definite(const Matrix& p) {
  if (p.rows() != p.cols()) return false;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(p, Eigen::EigenvaluesOnly);
  return solver.info() == Eigen::Success && solver.eigenvalues().minCoeff() > 0.0;
}

/// Rank of [B, AB, ..., A^{n-1}B] equals n.
inline bool is_controllable(const Matrix& a, const Matrix& b, double tol = 1e-9) {
  detail::require_square(a, "is_controllable");
  if (b.rows() != a.rows()) {
    throw DimensionError("is_controllable: B is " + detail::shape(b) + ", A is " +
                         detail::shape(a));
  }
  const Eigen::Index n = a.rows();
  if (n == 0) return true;
  Matrix ctrb(n, n * b.cols());
  Matrix block = b;
  for (Eigen::Index k = 0; k < n; ++k) {
    ctrb.middleCols(k * b.cols(), b.cols()) = block;
    block = a * block;
  }
  Eigen::FullPivLU<Matrix> lu(ctrb);
  lu.setThreshold(tol);
  return lu.rank() == n;
}

inline bool is_observable(const Matrix& a, const Matrix& c, double tol = 1e-9) {
  return is_controllable(a.transpose(), c.transpose(), tol);
}

}  // namespace etac
