// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qpspec/eigensolve.hpp"
#include "qpspec/error.hpp"

using namespace qpspec;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

struct Problem {
  ProjectionGeometry geom;
  FourierIndexSet idx;
  FourierCoefficientGrid grid;
  StiffnessDiagonal K;
  BlochVector k;
};

Problem random_problem(const char* geometry, int N, const BlochVector& k, std::mt19937_64& rng) {
  auto geom = ProjectionGeometry::from_catalog(geometry);
  FourierIndexSet idx(N, geom.T);
  auto grid = grid_from_values(N, geom.T, oracle::random_hermitian_coefficients(N, geom.d_high, rng), false);
  auto K = assemble_stiffness(geom, k, idx);
  return {geom, idx, grid, K, k};
}

Eigen::MatrixXcd oracle_mass(const FourierCoefficientGrid& g) {
  return oracle::dense_wrap_mass(g.N, g.dim, [&](const std::vector<int>& diff) {
    std::size_t p = 0;
    for (int m = 0; m < g.dim; ++m) p = p * (2 * g.N) + static_cast<std::size_t>(diff[m] + g.N);
    return g.values[p];
  });
}

// Finite eigenvalues of the pencil: with a deflated mode the oracle gets an
// extra zero eigenvalue, dropped here.
Eigen::VectorXd oracle_positive(const Problem& p) {
  Eigen::VectorXd K = p.K.values;
  for (std::size_t i = 0; i < p.K.deflated.size(); ++i) {
    if (p.K.deflated[i]) K(i) = 0.0;
  }
  const Eigen::VectorXd all = oracle::dense_generalized_eigenvalues(K, oracle_mass(p.grid));
  std::vector<double> pos;
  for (double v : all) {
    if (v > 1e-9) pos.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXd>(pos.data(), static_cast<Eigen::Index>(pos.size()));
}

}  // namespace

TEST(Eigensolve, ConstantCoefficientGivesStiffnessOverMean) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(6, geom.T);
  const auto grid = sample_to_fourier(PeriodicCoefficient::constant(4.0, geom.T), 6, geom);
  const MassOperator M(grid, idx);
  const BlochVector k = Eigen::Vector2d(0.35, 0.0);
  const auto K = assemble_stiffness(geom, k, idx);
  SolverConfig cfg;
  cfg.n_eig = 8;
  const auto sp = solve_embedded(K, M, k, cfg);
  std::vector<double> sorted(K.values.data(), K.values.data() + K.values.size());
  std::sort(sorted.begin(), sorted.end());
  ASSERT_EQ(sp.pairs.size(), 8u);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(sp.pairs[i].lambda, sorted[i] / 4.0, 1e-12 * std::max(1.0, sorted[i]));
    EXPECT_NEAR(sp.pairs[i].U.norm(), 1.0, 1e-14);
  }
  EXPECT_EQ(sp.method, "dense");
}

class EigensolveOracle : public ::testing::TestWithParam<std::tuple<const char*, std::size_t, bool>> {};

TEST_P(EigensolveOracle, MatchesDenseCholeskyReduction) {
  const auto [geometry, threshold, zero_k] = GetParam();
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const auto geom = ProjectionGeometry::from_catalog(geometry);
    BlochVector k = BlochVector::Zero(geom.d_high);
    if (!zero_k) {
      for (int m = 0; m < geom.d_high; ++m) k(m) = 0.13 * (m + 1) + 0.02 * trial;
    }
    const int N = geom.d_high == 2 ? 4 : 2;
    const Problem p = random_problem(geometry, N, k, rng);
    const MassOperator M(p.grid, p.idx);
    SolverConfig cfg;
    cfg.n_eig = 6;
    cfg.dense_threshold = threshold;
    const auto sp = solve_embedded(p.K, M, k, cfg);
    EXPECT_EQ(sp.n_deflated, zero_k ? 1u : 0u);
    const Eigen::VectorXd ref = oracle_positive(p);
    ASSERT_EQ(sp.pairs.size(), 6u);
    for (int i = 0; i < 6; ++i) {
      EXPECT_NEAR(sp.pairs[i].lambda, ref(i), 1e-10 * std::max(1.0, ref(i))) << trial << " " << i;
      EXPECT_LE(sp.pairs[i].residual, 1e-9 * std::max(1.0, ref(i)));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(
    Paths, EigensolveOracle,
    ::testing::Values(std::make_tuple("golden-1d", std::size_t{4096}, false),
                      std::make_tuple("golden-1d", std::size_t{0}, false),
                      std::make_tuple("golden-1d", std::size_t{4096}, true),
                      std::make_tuple("golden-1d", std::size_t{0}, true),
                      std::make_tuple("example3-4d", std::size_t{4096}, false),
                      std::make_tuple("example3-4d", std::size_t{0}, false),
                      std::make_tuple("example3-4d", std::size_t{0}, true)));

TEST(Eigensolve, ResidualOfExactAndPerturbedPairs) {
  std::mt19937_64 rng(23);
  const Problem p = random_problem("golden-1d", 4, Eigen::Vector2d(0.21, 0.4), rng);
  const MassOperator M(p.grid, p.idx);
  SolverConfig cfg;
  cfg.n_eig = 3;
  auto sp = solve_embedded(p.K, M, p.k, cfg);
  auto pair = sp.pairs[0];
  EXPECT_LE(residual(pair, p.K, M), 1e-11 * std::max(1.0, pair.lambda) * M.norm_bound());
  const auto noise = oracle::random_cvector(pair.U.size(), rng);
  pair.U += 1e-6 * noise / noise.norm();
  const double r = residual(pair, p.K, M);
  EXPECT_GT(r, 1e-9);
  EXPECT_LT(r, 1e-6 * (p.K.values.maxCoeff() + pair.lambda * M.norm_bound()));
}

TEST(Eigensolve, ScalingCoefficientScalesEigenvalues) {
  std::mt19937_64 rng(29);
  const Problem p = random_problem("golden-1d", 4, Eigen::Vector2d(0.3, 0.1), rng);
  auto scaled = p.grid;
  for (auto& v : scaled.values) v *= 3.0;
  SolverConfig cfg;
  cfg.n_eig = 5;
  const auto a = solve_embedded(p.K, MassOperator(p.grid, p.idx), p.k, cfg);
  const auto b = solve_embedded(p.K, MassOperator(scaled, p.idx), p.k, cfg);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(b.pairs[i].lambda * 3.0, a.pairs[i].lambda, 1e-12 * a.pairs[i].lambda);
}

TEST(Eigensolve, LanczosIsDeterministic) {
  std::mt19937_64 rng(31);
  const Problem p = random_problem("golden-1d", 8, Eigen::Vector2d(0.3, 0.1), rng);
  const MassOperator M(p.grid, p.idx);
  SolverConfig cfg;
  cfg.n_eig = 4;
  cfg.dense_threshold = 0;
  cfg.seed = 99;
  const auto a = solve_embedded(p.K, M, p.k, cfg);
  const auto b = solve_embedded(p.K, M, p.k, cfg);
  EXPECT_EQ(a.method, "lanczos");
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(a.pairs[i].lambda, b.pairs[i].lambda);
    EXPECT_EQ((a.pairs[i].U - b.pairs[i].U).norm(), 0.0);
  }
}

TEST(Eigensolve, DenseAndLanczosAgree) {
  std::mt19937_64 rng(37);
  const Problem p = random_problem("golden-1d", 10, Eigen::Vector2d(0.35, 0.0), rng);
  const MassOperator M(p.grid, p.idx);
  SolverConfig cfg;
  cfg.n_eig = 10;
  const auto a = solve_embedded(p.K, M, p.k, cfg);
  cfg.dense_threshold = 0;
  const auto b = solve_embedded(p.K, M, p.k, cfg);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(a.pairs[i].lambda, b.pairs[i].lambda, 1e-10 * a.pairs[i].lambda);
    EXPECT_NEAR(std::abs(a.pairs[i].U.dot(b.pairs[i].U)), 1.0, 1e-8);
  }
}

TEST(Eigensolve, EmptyPencilAndBadConfig) {
  std::mt19937_64 rng(41);
  Problem p = random_problem("golden-1d", 2, Eigen::Vector2d(0.35, 0.0), rng);
  const MassOperator M(p.grid, p.idx);
  SolverConfig cfg;
  cfg.n_eig = 0;
  EXPECT_THROW(solve_embedded(p.K, M, p.k, cfg), Error);
  cfg.n_eig = 2;
  p.K = assemble_stiffness(p.geom, p.k, p.idx, std::numeric_limits<double>::infinity());
  try {
    solve_embedded(p.K, M, p.k, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyPencil);
  }
}

TEST(Eigensolve, LanczosNonConvergenceCarriesResiduals) {
  std::mt19937_64 rng(43);
  const Problem p = random_problem("golden-1d", 16, Eigen::Vector2d(0.35, 0.0), rng);
  const MassOperator M(p.grid, p.idx);
  SolverConfig cfg;
  cfg.n_eig = 20;
  cfg.dense_threshold = 0;
  cfg.max_iter = 0;
  cfg.tol = 1e-300;
  try {
    solve_embedded(p.K, M, p.k, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConvergence);
    EXPECT_EQ(e.residuals().size(), 25u);
  }
}

TEST(Eigensolve, SidecarRoundTripAndMissingFile) {
  std::mt19937_64 rng(47);
  const Problem p = random_problem("golden-1d", 3, Eigen::Vector2d(0.35, 0.0), rng);
  SolverConfig cfg;
  cfg.n_eig = 3;
  const auto sp = solve_embedded(p.K, MassOperator(p.grid, p.idx), p.k, cfg);
  const auto path = (std::filesystem::temp_directory_path() / "qpspec_ev_test.qpev").string();
  write_eigenvectors(path, 3, 2, sp.pairs);
  int N = 0, d = 0;
  const auto back = read_eigenvectors(path, &N, &d);
  EXPECT_EQ(N, 3);
  EXPECT_EQ(d, 2);
  ASSERT_EQ(back.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(back[i].lambda, sp.pairs[i].lambda);
    EXPECT_EQ((back[i].U - sp.pairs[i].U).norm(), 0.0);
    EXPECT_EQ((back[i].k - sp.pairs[i].k).norm(), 0.0);
  }
  std::filesystem::remove(path);
  try {
    read_eigenvectors(path, nullptr, nullptr);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
    EXPECT_NE(std::string(e.what()).find("solve"), std::string::npos);
  }
}
