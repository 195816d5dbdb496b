// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "qpspec/error.hpp"
#include "qpspec/reconstruct.hpp"

using namespace qpspec;

namespace {

SpectralEigenpair random_pair(std::size_t n, const BlochVector& k, std::mt19937_64& rng) {
  SpectralEigenpair p;
  p.U = oracle::random_cvector(static_cast<Eigen::Index>(n), rng);
  p.U /= p.U.norm();
  p.k = k;
  p.lambda = 1.0;
  return p;
}

}  // namespace

TEST(Reconstruct, SingleModeHasUnitModulus) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(4, geom.T);
  const auto grid = PhysicalSamplingGrid::make(1, Eigen::VectorXd::Constant(1, 0.7), 0.05, 40);
  SpectralEigenpair p;
  p.k = Eigen::Vector2d(0.35, 0.0);
  p.U = CVector::Zero(static_cast<Eigen::Index>(idx.size()));
  p.U(13) = 1.0;
  const auto f = reconstruct_field(p, geom, idx, grid);
  ASSERT_EQ(f.values.size(), grid.ext_count());
  for (const auto& v : f.values) EXPECT_NEAR(std::abs(v), 1.0, 1e-13);
}

TEST(Reconstruct, OriginValueIsCoefficientSum) {
  std::mt19937_64 rng(3);
  const auto geom = ProjectionGeometry::from_catalog("example3-4d");
  const FourierIndexSet idx(2, geom.T);
  const auto p = random_pair(idx.size(), Eigen::Vector4d(0.35, 0.2, 0.1, 0.5), rng);
  const auto grid = PhysicalSamplingGrid::make(2, Eigen::Vector2d::Zero(), 0.1, 4);
  const auto f = reconstruct_field(p, geom, idx, grid);
  EXPECT_LE(std::abs(f.at_ext(0, 0) - p.U.sum()), 1e-12 * p.U.cwiseAbs().sum());
}

TEST(Reconstruct, MatchesNaiveSum1d) {
  std::mt19937_64 rng(5);
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const int N = 6;
  const FourierIndexSet idx(N, geom.T);
  const Eigen::Vector2d k(0.35, 0.0);
  const auto p = random_pair(idx.size(), k, rng);
  const auto grid = PhysicalSamplingGrid::make(1, Eigen::VectorXd::Constant(1, 1.3), 0.1, 50);
  const auto f = reconstruct_field(p, geom, idx, grid);
  const double scale = p.U.cwiseAbs().sum();
  for (int i = -51; i <= 51; ++i) {
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, grid.coordinate(0, i));
    const auto ref = oracle::naive_field(geom.P, geom.T, k, N, p.U, r);
    EXPECT_LE(std::abs(f.at_ext(i) - ref), 1e-12 * scale) << i;
  }
}

TEST(Reconstruct, MatchesNaiveSum2d) {
  std::mt19937_64 rng(7);
  const auto geom = ProjectionGeometry::from_catalog("example3-4d");
  const int N = 2;
  const FourierIndexSet idx(N, geom.T);
  const Eigen::Vector4d k(0.35, 0.2, 0.1, 0.5);
  const auto p = random_pair(idx.size(), k, rng);
  const auto grid = PhysicalSamplingGrid::make(2, Eigen::Vector2d(0.4, -1.1), 0.07, 5);
  const auto f = reconstruct_field(p, geom, idx, grid);
  const double scale = p.U.cwiseAbs().sum();
  for (std::size_t e = 0; e < grid.ext_count(); ++e) {
    const auto ref = oracle::naive_field(geom.P, geom.T, k, N, p.U, grid.ext_point(e));
    EXPECT_LE(std::abs(f.values[e] - ref), 1e-12 * scale) << e;
  }
}

TEST(Reconstruct, ChunkedFrequenciesMatchDirectSum) {
  // 9216 frequencies, more than one chunk.
  std::mt19937_64 rng(9);
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(48, geom.T);
  const auto p = random_pair(idx.size(), Eigen::Vector2d(0.35, 0.0), rng);
  const auto grid = PhysicalSamplingGrid::make(1, Eigen::VectorXd::Zero(1), 0.01, 300);
  const auto f = reconstruct_field(p, geom, idx, grid);
  const double scale = p.U.cwiseAbs().sum();
  for (int i : {-301, -150, 0, 17, 301}) {
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, grid.coordinate(0, i));
    EXPECT_LE(std::abs(f.at_ext(i) - evaluate_field(p.U, f.frequencies, r)), 1e-12 * scale);
  }
}

TEST(Reconstruct, MagnitudeBoundedByCoefficientSum) {
  std::mt19937_64 rng(11);
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(8, geom.T);
  const auto p = random_pair(idx.size(), Eigen::Vector2d(0.1, 0.2), rng);
  const auto f = reconstruct_field(p, geom, idx, PhysicalSamplingGrid::make(1, Eigen::VectorXd::Zero(1), 0.03, 500));
  const auto mag = field_magnitude_snapshot(f);
  EXPECT_EQ(mag.size(), f.grid.ext_count());
  for (double m : mag) EXPECT_LE(m, p.U.cwiseAbs().sum() * (1 + 1e-12));
}

TEST(Reconstruct, DimensionMismatchRejected) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const FourierIndexSet idx(2, geom.T);
  SpectralEigenpair p;
  p.k = Eigen::Vector2d::Zero();
  p.U = CVector::Ones(3);
  EXPECT_THROW(reconstruct_field(p, geom, idx, PhysicalSamplingGrid::make(1, Eigen::VectorXd::Zero(1), 0.1, 3)),
               Error);
}
