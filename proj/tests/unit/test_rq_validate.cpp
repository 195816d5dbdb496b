// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qpspec/error.hpp"
#include "qpspec/rq_validate.hpp"

using namespace qpspec;

namespace {

PhysicalSamplingGrid grid1(double h, int n) {
  return PhysicalSamplingGrid::make(1, Eigen::VectorXd::Zero(1), h, n);
}

PhysicalSamplingGrid grid2(double h, int n) {
  return PhysicalSamplingGrid::make(2, Eigen::Vector2d::Zero(), h, n);
}

std::vector<cplx> plane_wave(const PhysicalSamplingGrid& g, const Eigen::VectorXd& w) {
  std::vector<cplx> u(g.ext_count());
  for (std::size_t e = 0; e < u.size(); ++e) {
    const double ph = w.dot(g.ext_point(e));
    u[e] = cplx(std::cos(ph), std::sin(ph));
  }
  return u;
}

std::vector<double> random_eps(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.5, 12.0);
  std::vector<double> e(n);
  for (auto& v : e) v = u(rng);
  return e;
}

std::vector<cplx> random_field(std::size_t n, std::mt19937_64& rng) {
  const auto v = oracle::random_cvector(static_cast<Eigen::Index>(n), rng);
  return {v.data(), v.data() + v.size()};
}

}  // namespace

TEST(FDOperator, MatchesDenseStencil1d) {
  for (int n : {1, 4}) {
    const double h = n == 1 ? 1.0 : 0.3;
    const auto g = grid1(h, n);
    const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
    const Eigen::MatrixXd A = oracle::fd_matrix_1d(n, h);
    if (n == 1) {
      ASSERT_EQ(A.rows(), 3);
      ASSERT_EQ(A.cols(), 5);
    }
    std::mt19937_64 rng(1);
    const auto u = random_field(g.ext_count(), rng);
    const Eigen::VectorXcd ref = A.cast<cplx>() * Eigen::Map<const Eigen::VectorXcd>(u.data(), u.size());
    const auto got = pair.apply_A(u);
    for (std::size_t s = 0; s < got.size(); ++s) EXPECT_LE(std::abs(got[s] - ref(s)), 1e-12 * ref.norm());
  }
}

TEST(FDOperator, ConstantFieldMapsToZero) {
  for (const auto& g : {grid1(0.1, 7), grid2(0.1, 7)}) {
    const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 2.0));
    const auto out = pair.apply_A(std::vector<cplx>(g.ext_count(), cplx(3.0, -1.0)));
    for (const auto& v : out) EXPECT_EQ(v, cplx(0.0, 0.0));
  }
}

TEST(FDOperator, RejectsNonPositiveCoefficient) {
  const auto g = grid1(0.1, 2);
  std::vector<double> eps(g.inner_count(), 1.0);
  eps[2] = 0.0;
  try {
    build_fd_pair(g, eps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidCoefficient);
  }
  EXPECT_THROW(build_fd_pair(g, std::vector<double>(3, 1.0)), Error);
}

TEST(PointwiseRQ, DirichletEigenvectorIsExact) {
  const int n = 20;
  const double h = 0.05;
  const auto g = grid1(h, n);
  const int M = 2 * n + 2;
  std::vector<cplx> u(g.ext_count());
  for (int j = 0; j < static_cast<int>(u.size()); ++j) u[j] = std::sin(std::numbers::pi * j / M);
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  const double lam = (2.0 - 2.0 * std::cos(std::numbers::pi / M)) / (h * h);
  const auto set = pointwise_rqs(u, pair);
  EXPECT_EQ(set.n_excluded, 0u);
  for (std::size_t s = 0; s < set.quotients.size(); ++s) EXPECT_NEAR(set.quotients[s].real(), lam, 1e-10 * lam);
  const auto est = weighted_expectation(set);
  EXPECT_NEAR(est.lambda_hat, lam, 1e-12 * lam);
  EXPECT_LT(weighted_std(set, est.lambda_hat), 1e-9 * lam);
}

TEST(PointwiseRQ, PlaneWaveQuotient) {
  const double c = 2.5, w = 1.7, h = 0.02;
  const auto g = grid1(h, 100);
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), c));
  const auto set = pointwise_rqs(plane_wave(g, Eigen::VectorXd::Constant(1, w)), pair);
  const double expect = (2.0 - 2.0 * std::cos(w * h)) / (c * h * h);
  for (const auto& q : set.quotients) EXPECT_NEAR(std::abs(q - expect), 0.0, 1e-9 * expect);
}

TEST(PointwiseRQ, SecondOrderIn2d) {
  const Eigen::Vector2d w(1.3, -0.6);
  double prev = 0.0;
  for (int level = 0; level < 3; ++level) {
    const double h = 0.1 / (1 << level);
    const auto g = grid2(h, 10);
    const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
    const auto est = weighted_expectation(pointwise_rqs(plane_wave(g, w), pair));
    const double err = std::abs(est.lambda_hat - w.squaredNorm());
    if (level > 0) EXPECT_NEAR(prev / err, 4.0, 0.05);
    prev = err;
  }
}

TEST(PointwiseRQ, ExactZeroIsExcluded) {
  const auto g = grid1(0.1, 5);
  std::vector<cplx> u(g.ext_count(), cplx(1.0, 0.0));
  u[4] = 0.0;
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  const auto set = pointwise_rqs(u, pair, 0.0);
  EXPECT_EQ(set.n_excluded, 1u);
  EXPECT_FALSE(set.included[3]);
  double wsum = 0.0;
  for (double w : set.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-15);
}

TEST(PointwiseRQ, ThresholdExcludesSmallSamples) {
  const auto g = grid1(0.1, 5);
  std::vector<cplx> u(g.ext_count(), cplx(1.0, 0.0));
  u[2] = 1e-9;
  u[3] = 1e-7;
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  const auto set = pointwise_rqs(u, pair);
  EXPECT_EQ(set.n_excluded, 1u);
  EXPECT_FALSE(set.included[1]);
  EXPECT_TRUE(set.included[2]);
}

TEST(PointwiseRQ, AllZeroIsEmptyEstimator) {
  const auto g = grid1(0.1, 3);
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  try {
    pointwise_rqs(std::vector<cplx>(g.ext_count()), pair);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEmptyEstimator);
  }
}

TEST(PointwiseRQ, WeightedMeanEqualsCroppedQuotient) {
  std::mt19937_64 rng(13);
  for (int t = 0; t < 50; ++t) {
    const auto g = t % 2 ? grid2(0.07, 6) : grid1(0.01, 60);
    const auto pair = build_fd_pair(g, random_eps(g.inner_count(), rng));
    const auto u = random_field(g.ext_count(), rng);
    const cplx a = weighted_mean(pointwise_rqs(u, pair, 0.0));
    const cplx b = cropped_rayleigh_quotient(u, pair);
    EXPECT_LE(std::abs(a - b), 1e-12 * std::abs(b));
  }
}

TEST(PointwiseRQ, InvariantUnderFieldScaling) {
  std::mt19937_64 rng(17);
  const auto g = grid1(0.05, 30);
  const auto eps = random_eps(g.inner_count(), rng);
  const auto pair = build_fd_pair(g, eps);
  auto u = random_field(g.ext_count(), rng);
  const auto a = weighted_expectation(pointwise_rqs(u, pair));
  for (auto& v : u) v *= cplx(-2.0, 5.0);
  const auto b = weighted_expectation(pointwise_rqs(u, pair));
  EXPECT_NEAR(a.lambda_hat, b.lambda_hat, 1e-12 * std::abs(a.lambda_hat));
  auto eps3 = eps;
  for (auto& e : eps3) e *= 3.0;
  const auto c = weighted_expectation(pointwise_rqs(u, build_fd_pair(g, eps3)));
  EXPECT_NEAR(3.0 * c.lambda_hat, a.lambda_hat, 1e-12 * std::abs(a.lambda_hat));
}

TEST(ResidualBound, HoldsOnRandomFields) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> lam(0.0, 50.0);
  for (int t = 0; t < 100; ++t) {
    const auto g = t % 2 ? grid2(0.1, 4) : grid1(0.1, 20);
    const auto pair = build_fd_pair(g, random_eps(g.inner_count(), rng));
    const auto r = residual_bound_check(random_field(g.ext_count(), rng), pair, lam(rng));
    EXPECT_TRUE(r.holds) << r.gap << " " << r.weighted_error << " " << r.constant * r.e_max;
  }
}

TEST(ResidualBound, ExactPairHasZeroGap) {
  const auto g = grid1(0.1, 10);
  const double w = 0.9;
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  const double lam = (2.0 - 2.0 * std::cos(w * 0.1)) / 0.01;
  const auto r = residual_bound_check(plane_wave(g, Eigen::VectorXd::Constant(1, w)), pair, lam);
  EXPECT_LT(r.gap, 1e-12);
  EXPECT_LT(r.e_max, 1e-10);
  EXPECT_TRUE(r.holds);
}

TEST(Validate, EstimateFieldsFilled) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(2, geom.T);
  SpectralEigenpair p;
  p.k = Eigen::Vector2d(0.35, 0.0);
  p.U = CVector::Zero(static_cast<Eigen::Index>(idx.size()));
  p.U(idx.position({0, 0, 0, 0})) = 1.0;
  p.lambda = 0.5;
  const auto g = grid1(0.01, 100);
  const auto f = reconstruct_field(p, geom, idx, g);
  const auto pair = build_fd_pair(g, std::vector<double>(g.inner_count(), 1.0));
  const auto est = validate_field(f, pair, 0.5);
  const double w = 0.35 * geom.P(0, 0);
  const double expect = (2.0 - 2.0 * std::cos(w * 0.01)) / 1e-4;
  EXPECT_NEAR(est.lambda_hat, expect, 1e-9);
  EXPECT_NEAR(est.e_rq, std::abs(expect - 0.5), 1e-9);
  EXPECT_EQ(est.n_samples, g.inner_count());
  EXPECT_LT(est.sigma_rq, 1e-8);
  EXPECT_LT(est.imag_diag, 1e-10);
}
