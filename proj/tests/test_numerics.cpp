#include <gtest/gtest.h>

#include <cmath>

#include "etac/error.hpp"
#include "etac/numerics.hpp"
#include "oracles.hpp"

using etac::Matrix;
using etac::Vector;

namespace {

Matrix leader_a0() {
  Matrix a(2, 2);
  a << 0.0, 2.0, -1.5, 0.0;
  return a;
}

}  // namespace

TEST(Expm, ZeroTimeIsIdentity) {
  const Matrix a = oracle::random_matrix(3, 3, 1);
  EXPECT_EQ(etac::expm(a, 0.0), Matrix::Identity(3, 3));
}

TEST(Expm, HalfPeriodRotationIsMinusIdentity) {
  const Matrix a0 = leader_a0();
  const double t = M_PI / std::sqrt(3.0);
  const Matrix e = etac::expm(a0, t);
  EXPECT_LE((e + Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((e - oracle::expm_series(a0, t)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Expm, MatchesSeriesOracle) {
  const Matrix a0 = leader_a0();
  EXPECT_LE((etac::expm(a0, 0.5) - oracle::expm_series(a0, 0.5)).cwiseAbs().maxCoeff(), 1e-12);
  for (unsigned s = 0; s < 10; ++s) {
    const Matrix a = 2.0 * oracle::random_matrix(4, 4, 100 + s);
    EXPECT_LE((etac::expm(a, 0.7) - oracle::expm_series(a, 0.7)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Expm, NonSquareThrows) {
  EXPECT_THROW(etac::expm(Matrix::Zero(2, 3), 1.0), etac::DimensionError);
}

TEST(Expm, SemigroupProperty) {
  for (unsigned s = 0; s < 20; ++s) {
    const Matrix a = oracle::random_matrix(2, 2, 200 + s);
    const Matrix st = oracle::random_matrix(1, 2, 300 + s);
    const double t1 = st(0, 0), t2 = st(0, 1);
    const Matrix lhs = etac::expm(a, t1 + t2);
    const Matrix rhs = etac::expm(a, t1) * etac::expm(a, t2);
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Expm, Deterministic) {
  const Matrix a = oracle::random_matrix(3, 3, 9);
  EXPECT_EQ(etac::expm(a, 0.3), etac::expm(a, 0.3));
}

TEST(LeastNorm, Identity) {
  Vector b(2);
  b << 1.0, 2.0;
  const auto s = etac::solve_least_norm(Matrix::Identity(2, 2), b);
  EXPECT_EQ(s.x, b);
  EXPECT_EQ(s.residual, 0.0);
}

TEST(LeastNorm, FreeCoordinateIsZero) {
  Matrix m(2, 2);
  m << 1.0, 0.0, 0.0, 0.0;
  Vector b(2);
  b << 3.0, 0.0;
  const auto s = etac::solve_least_norm(m, b);
  EXPECT_NEAR(s.x(0), 3.0, 1e-15);
  EXPECT_NEAR(s.x(1), 0.0, 1e-15);
  EXPECT_NEAR(s.residual, 0.0, 1e-15);
}

TEST(LeastNorm, RandomUnderdeterminedMatchesPinv) {
  for (unsigned k = 0; k < 5; ++k) {
    const Matrix m = oracle::random_matrix(6, 8, 10 + k);
    const Vector b = m * oracle::random_matrix(8, 1, 20 + k);
    const auto s = etac::solve_least_norm(m, b);
    EXPECT_LE(s.residual, 1e-10);
    EXPECT_LE((s.x - oracle::pinv_svd(m) * b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(LeastNorm, InconsistentReportsResidual) {
  Matrix m(2, 1);
  m << 1.0, 1.0;
  Vector b(2);
  b << 1.0, -1.0;
  const auto s = etac::solve_least_norm(m, b);
  EXPECT_NEAR(s.x(0), 0.0, 1e-15);
  EXPECT_NEAR(s.residual, std::sqrt(2.0), 1e-12);
}

TEST(LeastNorm, LengthMismatchThrows) {
  EXPECT_THROW(etac::solve_least_norm(Matrix::Identity(2, 2), Vector::Zero(3)),
               etac::DimensionError);
}

TEST(Lyapunov, ScaledIdentity) {
  const Matrix p = etac::lyapunov_solve(-Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2));
  EXPECT_LE((p - Matrix::Identity(2, 2)).norm(), 1e-12);
}

TEST(Lyapunov, Diagonal) {
  Matrix a = Matrix::Zero(2, 2);
  a.diagonal() << -1.0, -2.0;
  const Matrix p = etac::lyapunov_solve(a, Matrix::Identity(2, 2));
  Matrix want = Matrix::Zero(2, 2);
  want.diagonal() << 0.5, 0.25;
  EXPECT_LE((p - want).norm(), 1e-12);
}

TEST(Lyapunov, MarginallyStableThrows) {
  EXPECT_THROW(etac::lyapunov_solve(leader_a0(), Matrix::Identity(2, 2)), etac::InfeasibleError);
}

TEST(Lyapunov, RandomHurwitzSymmetricPositive) {
  for (unsigned k = 0; k < 10; ++k) {
    Matrix a = oracle::random_matrix(3, 3, 40 + k);
    a -= (etac::hurwitz_margin(a) + 0.5) * Matrix::Identity(3, 3);
    const Matrix q = Matrix::Identity(3, 3);
    const Matrix p = etac::lyapunov_solve(a, q);
    EXPECT_LE((p - p.transpose()).norm(), 1e-12);
    EXPECT_TRUE(etac::is_positive_definite(p));
    EXPECT_LE(etac::lyapunov_residual(a, p, q), 1e-9);
  }
}

TEST(Hurwitz, Examples) {
  EXPECT_NEAR(etac::hurwitz_margin(-3.0 * Matrix::Identity(2, 2)), -3.0, 1e-15);
  EXPECT_NEAR(etac::hurwitz_margin(leader_a0()), 0.0, 1e-12);
  Matrix a1(2, 2);
  a1 << 1.0, -1.0, -2.0, 3.0;
  // (4 ± sqrt(4 + 8)) / 2 from the characteristic polynomial.
  EXPECT_NEAR(etac::hurwitz_margin(a1), 2.0 + std::sqrt(3.0), 1e-12);
}

TEST(Hurwitz, ShiftProperty) {
  for (unsigned k = 0; k < 10; ++k) {
    const Matrix a = oracle::random_matrix(4, 4, 60 + k);
    const double c = 0.37 * static_cast<double>(k) - 1.5;
    EXPECT_NEAR(etac::hurwitz_margin(a + c * Matrix::Identity(4, 4)),
                etac::hurwitz_margin(a) + c, 1e-9);
  }
}

TEST(VecMat, ColumnStacking) {
  Matrix m(2, 2);
  m << 1.0, 2.0, 3.0, 4.0;
  Vector want(4);
  want << 1.0, 3.0, 2.0, 4.0;
  EXPECT_EQ(etac::vec(m), want);
  Vector id(4);
  id << 1.0, 0.0, 0.0, 1.0;
  EXPECT_EQ(etac::vec(Matrix::Identity(2, 2)), id);
}

TEST(VecMat, RoundtripBitExact) {
  EXPECT_EQ(etac::mat(etac::vec(leader_a0()), 2, 2), leader_a0());
  for (Eigen::Index r = 1; r <= 4; ++r) {
    for (Eigen::Index c = 1; c <= 4; ++c) {
      const Matrix m = oracle::random_matrix(r, c, static_cast<unsigned>(r * 10 + c));
      EXPECT_EQ(etac::mat(etac::vec(m), r, c), m);
    }
  }
}

TEST(VecMat, LengthMismatchThrows) {
  EXPECT_THROW(etac::mat(Vector::Zero(5), 2, 2), etac::DimensionError);
}

TEST(Kron, VecIdentity) {
  // vec(A X B) = (B' kron A) vec(X)
  const Matrix a = oracle::random_matrix(2, 3, 1), x = oracle::random_matrix(3, 2, 2),
               b = oracle::random_matrix(2, 4, 3);
  const Vector lhs = etac::vec(a * x * b);
  const Vector rhs = etac::kron(b.transpose(), a) * etac::vec(x);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Controllability, Examples) {
  EXPECT_TRUE(etac::is_controllable(Matrix::Zero(2, 2), Matrix::Identity(2, 2)));
  EXPECT_FALSE(etac::is_controllable(Matrix::Identity(2, 2), Matrix::Zero(2, 2)));
  Matrix c(1, 2);
  c << 1.0, 2.0;
  EXPECT_TRUE(etac::is_observable(leader_a0(), c));
}
