// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qpspec/error.hpp"
#include "qpspec/operator.hpp"

using namespace qpspec;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

FourierCoefficientGrid random_grid(int N, int d, std::mt19937_64& rng) {
  return grid_from_values(N, Eigen::VectorXd::Constant(d, kTwoPi),
                          oracle::random_hermitian_coefficients(N, d, rng), false);
}

Eigen::MatrixXcd oracle_mass(const FourierCoefficientGrid& g) {
  const int N = g.N;
  const int d = g.dim;
  return oracle::dense_wrap_mass(N, d, [&](const std::vector<int>& diff) {
    std::size_t p = 0;
    for (int m = 0; m < d; ++m) p = p * (2 * N) + static_cast<std::size_t>(diff[m] + N);
    return g.values[p];
  });
}

}  // namespace

TEST(Stiffness, MatchesOracle) {
  for (const char* name : {"golden-1d", "example1-4d", "example3-4d"}) {
    const auto geom = ProjectionGeometry::from_catalog(name);
    const int N = geom.d_high == 2 ? 5 : 2;
    const FourierIndexSet idx(N, geom.T);
    Eigen::VectorXd k(geom.d_high);
    for (int m = 0; m < geom.d_high; ++m) k(m) = 0.1 * (m + 1) + 0.05;
    const auto K = assemble_stiffness(geom, k, idx);
    const auto mi = oracle::multi_indices(N, geom.d_high);
    for (std::size_t p = 0; p < idx.size(); ++p) {
      const double expect = oracle::stiffness_entry(geom.P, geom.T, k, mi[p]);
      EXPECT_NEAR(K.values(p), expect, 1e-12 * std::max(1.0, expect)) << name << " " << p;
    }
  }
}

TEST(Stiffness, ZeroBlochDeflatesOneMode) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(8, geom.T);
  const auto K = assemble_stiffness(geom, Eigen::Vector2d::Zero(), idx);
  const auto rep = deflation_report(K);
  ASSERT_EQ(rep.count, 1u);
  EXPECT_EQ(idx.multi_index(rep.indices[0]), (MultiIndex{0, 0, 0, 0}));
  EXPECT_EQ(rep.total, idx.size());
}

TEST(Stiffness, IrrationalShiftDeflatesNothing) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(8, geom.T);
  const auto K = assemble_stiffness(geom, Eigen::Vector2d(0.35, 0.0), idx, 1e-12);
  EXPECT_EQ(K.deflated_count(), 0u);
  EXPECT_GT(K.values.minCoeff(), 1e-12);
}

TEST(Stiffness, EverythingDeflatedIsEmptyPencil) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(2, geom.T);
  const auto K = assemble_stiffness(geom, Eigen::Vector2d(0.35, 0.0), idx,
                                    std::numeric_limits<double>::infinity());
  EXPECT_EQ(K.deflated_count(), idx.size());
}

TEST(Stiffness, InvariantUnderKernelShift) {
  // Adding a vector in ker(P^T) to k leaves K unchanged.
  const auto geom = ProjectionGeometry::from_catalog("example3-4d");
  const FourierIndexSet idx(2, geom.T);
  const Eigen::Vector4d k(0.35, 0.2, 0.1, 0.5);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(geom.P.transpose());
  const Eigen::MatrixXd ker = lu.kernel();
  ASSERT_EQ(ker.cols(), 2);
  const Eigen::Vector4d k2 = k + 0.7 * ker.col(0) - 1.3 * ker.col(1);
  const auto K1 = assemble_stiffness(geom, k, idx);
  const auto K2 = assemble_stiffness(geom, k2, idx);
  EXPECT_LT((K1.values - K2.values).cwiseAbs().maxCoeff(), 1e-12 * K1.values.maxCoeff());
}

TEST(MassOperator, FftMatchesDenseWrap) {
  std::mt19937_64 rng(11);
  for (int d : {2, 4}) {
    for (int N : {1, 2, 3}) {
      if (d == 4 && N == 3) continue;  // 1296 modes, still cheap but skip
      const auto g = random_grid(N, d, rng);
      const FourierIndexSet idx(N, g.periods);
      const MassOperator M(g, idx);
      const Eigen::MatrixXcd D = oracle_mass(g);
      for (int t = 0; t < 3; ++t) {
        const auto U = oracle::random_cvector(static_cast<Eigen::Index>(idx.size()), rng);
        const CVector V = M.apply(U);
        const CVector W = D * U;
        EXPECT_LE((V - W).norm(), 1e-12 * W.norm()) << d << " " << N;
      }
      for (std::size_t r = 0; r < idx.size(); r += 3) {
        for (std::size_t c = 0; c < idx.size(); c += 5) {
          EXPECT_EQ(M.entry(r, c), D(r, c));
        }
      }
    }
  }
}

TEST(MassOperator, FftMatchesDenseWrap4dN3) {
  std::mt19937_64 rng(12);
  const auto g = random_grid(3, 4, rng);
  const FourierIndexSet idx(3, g.periods);
  const MassOperator M(g, idx);
  const Eigen::MatrixXcd D = oracle_mass(g);
  const auto U = oracle::random_cvector(static_cast<Eigen::Index>(idx.size()), rng);
  const CVector W = D * U;
  EXPECT_LE((M.apply(U) - W).norm(), 1e-12 * W.norm());
}

TEST(MassOperator, HermitianLinearPositive) {
  std::mt19937_64 rng(5);
  const auto g = random_grid(4, 2, rng);
  const FourierIndexSet idx(4, g.periods);
  const MassOperator M(g, idx);
  MassOperator::Workspace ws(M);
  const auto n = static_cast<Eigen::Index>(idx.size());
  for (int t = 0; t < 20; ++t) {
    const auto u = oracle::random_cvector(n, rng);
    const auto v = oracle::random_cvector(n, rng);
    CVector Mu, Mv;
    M.apply(u, Mu, ws);
    M.apply(v, Mv, ws);
    const cplx lhs = v.dot(Mu);
    const cplx rhs = Mv.dot(u);
    EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::abs(lhs) + 1e-12);
    const cplx alpha(0.3, -1.7);
    CVector Mw;
    M.apply(u + alpha * v, Mw, ws);
    EXPECT_LE((Mw - Mu - alpha * Mv).norm(), 1e-12 * Mw.norm());
    // margin 1 in the generator: <u, M u> >= ||u||^2
    EXPECT_GE(u.dot(Mu).real(), (1.0 - 1e-12) * u.squaredNorm());
    EXPECT_LE(std::abs(u.dot(Mu).imag()), 1e-12 * u.squaredNorm() * M.norm_bound());
  }
}

TEST(MassOperator, NormBoundDominatesSpectrum) {
  std::mt19937_64 rng(6);
  const auto g = random_grid(3, 2, rng);
  const FourierIndexSet idx(3, g.periods);
  const MassOperator M(g, idx);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(oracle_mass(g), Eigen::EigenvaluesOnly);
  EXPECT_LE(es.eigenvalues().cwiseAbs().maxCoeff(), M.norm_bound() * (1 + 1e-12));
  EXPECT_GE(es.eigenvalues().minCoeff(), 1.0 - 1e-10);
}

TEST(MassOperator, ConstantCoefficientIsScaledIdentity) {
  const auto geom = ProjectionGeometry::from_catalog("example3-4d");
  const auto g = sample_to_fourier(PeriodicCoefficient::constant(2.5, geom.T), 2, geom);
  const FourierIndexSet idx(2, geom.T);
  const MassOperator M(g, idx);
  std::mt19937_64 rng(2);
  const auto U = oracle::random_cvector(static_cast<Eigen::Index>(idx.size()), rng);
  EXPECT_LE((M.apply(U) - 2.5 * U).norm(), 1e-13 * U.norm());
  EXPECT_NEAR(M.norm_bound(), 2.5, 1e-13);
}

TEST(MassOperator, MismatchedGridRejected) {
  std::mt19937_64 rng(1);
  const auto g = random_grid(2, 2, rng);
  EXPECT_THROW(MassOperator(g, FourierIndexSet(3, g.periods)), Error);
}
