// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "qpspec/error.hpp"
#include "qpspec/supercell.hpp"

using namespace qpspec;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

std::vector<std::pair<std::int64_t, std::int64_t>> pq(const RationalApproximant& ra, std::size_t n) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (std::size_t i = 0; i < std::min(n, ra.convergents.size()); ++i) {
    out.emplace_back(ra.convergents[i].p, ra.convergents[i].q);
  }
  return out;
}

PeriodicCoefficient example4_1d() {
  return PeriodicCoefficient(ExpTrigCoefficient{2.0, {{false, {1, 0}, 0.5}, {true, {0, 1}, 1.3}}, {}}, 2,
                             Eigen::Vector2d(kTwoPi, kTwoPi));
}

std::vector<double> fd_dispersion(double c, double k, double T, int m, int n_bands) {
  const double h = T / m;
  std::vector<double> all;
  for (int j = 0; j < m; ++j) {
    const double half = std::sin(0.5 * (k + kTwoPi * j / T) * h);
    all.push_back(4.0 * half * half / (c * h * h));
  }
  std::sort(all.begin(), all.end());
  all.resize(n_bands);
  return all;
}

}  // namespace

TEST(Convergents, Golden) {
  const double x = (std::sqrt(5.0) - 1.0) / 2.0;
  using V = std::vector<std::pair<std::int64_t, std::int64_t>>;
  EXPECT_EQ(pq(convergents(x, 100), 6), (V{{1, 1}, {1, 2}, {2, 3}, {3, 5}, {5, 8}, {8, 13}}));
}

TEST(Convergents, Sqrt2) {
  using V = std::vector<std::pair<std::int64_t, std::int64_t>>;
  EXPECT_EQ(pq(convergents(std::sqrt(2.0), 29), 10), (V{{1, 1}, {3, 2}, {7, 5}, {17, 12}, {41, 29}}));
}

TEST(Convergents, RationalTerminates) {
  const auto ra = convergents(0.75, 1000);
  ASSERT_FALSE(ra.convergents.empty());
  EXPECT_EQ(ra.convergents.back().p, 3);
  EXPECT_EQ(ra.convergents.back().q, 4);
  EXPECT_EQ(ra.convergents.size(), 2u);
}

TEST(Convergents, ErrorBoundAndIncreasingDenominators) {
  for (double x : {std::sqrt(2.0), std::numbers::pi, std::numbers::e, (std::sqrt(5.0) - 1) / 2, std::sqrt(7.0) / 3}) {
    const auto ra = convergents(x, 1000000);
    for (std::size_t i = 0; i < ra.convergents.size(); ++i) {
      const auto& c = ra.convergents[i];
      EXPECT_LT(std::abs(x - c.value()), 1.0 / (static_cast<double>(c.q) * c.q));
      if (i) EXPECT_GT(c.q, ra.convergents[i - 1].q);
    }
  }
  EXPECT_THROW(convergents(1.0, 0), Error);
}

TEST(Convergents, LookupByDenominator) {
  const double x = (std::sqrt(5.0) - 1.0) / 2.0;
  EXPECT_EQ(convergent_with_denominator(x, 8).p, 5);
  EXPECT_EQ(convergent_with_denominator(-x, 8).p, -5);
  EXPECT_THROW(convergent_with_denominator(x, 7), Error);
}

TEST(Supercell, RationalGeometryKeepsExactPeriod) {
  const auto geom = ProjectionGeometry::make(Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(kTwoPi, kTwoPi));
  const auto coeff = example4_1d();
  const auto model = build_supercell(coeff, geom, {2}, SupercellOptions{});
  EXPECT_NEAR(model.period(0), 4.0 * std::numbers::pi, 1e-14);
  EXPECT_EQ(model.P_rational, geom.P);
  for (std::size_t j = 0; j < model.eps.size(); j += 17) {
    const Eigen::VectorXd r = Eigen::VectorXd::Constant(1, j * model.spacing(0));
    EXPECT_NEAR(model.eps[j], evaluate_physical(coeff, geom, r), 1e-12);
  }
}

TEST(Supercell, GoldenFiveEighthsPeriod) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const auto coeff = example4_1d();
  const auto model = build_supercell(coeff, geom, {8}, SupercellOptions{});
  ASSERT_EQ(model.used.size(), 1u);
  EXPECT_EQ(model.used[0].p, 5);
  const double T = 16.0 * std::numbers::pi / geom.P(0, 0);
  EXPECT_NEAR(model.period(0), T, 1e-12);
  // Sampling the rationalized coefficient one period later gives the same values.
  for (int j = 0; j < 50; ++j) {
    const double r = 0.37 * j;
    Eigen::Vector2d x0 = model.P_rational * Eigen::VectorXd::Constant(1, r);
    Eigen::Vector2d x1 = model.P_rational * Eigen::VectorXd::Constant(1, r + T);
    EXPECT_NEAR(coeff(x0), coeff(x1), 1e-12);
  }
}

TEST(Supercell, RefinementApproachesQuasiperiodicCoefficient) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const auto coeff = example4_1d();
  double prev = 1e300;
  for (std::int64_t q : {3, 8, 21}) {
    const auto model = build_supercell(coeff, geom, {q}, SupercellOptions{});
    double sup = 0.0;
    for (int j = 0; j <= 200; ++j) {
      const double r = 0.05 * j;
      Eigen::Vector2d x = model.P_rational * Eigen::VectorXd::Constant(1, r);
      sup = std::max(sup, std::abs(coeff(x) - evaluate_physical(coeff, geom, Eigen::VectorXd::Constant(1, r))));
    }
    EXPECT_LT(sup, prev) << q;
    prev = sup;
  }
}

TEST(Supercell, CapsAreEnforced) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  SupercellOptions opts;
  opts.period_cap = 50.0;
  try {
    build_supercell(example4_1d(), geom, {21}, opts);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kApproximantTooFine);
  }
  EXPECT_THROW(build_supercell(example4_1d(), geom, {8, 13}, SupercellOptions{}), Error);
}

TEST(FoldedBands, ConstantCoefficientMatchesDispersion1d) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  const double c = 3.0;
  const auto model = build_supercell(PeriodicCoefficient::constant(c, geom.T), geom, {5}, SupercellOptions{});
  const auto path = band_path("gamma-x", 5, model.period(0), 1);
  const auto set = folded_bands(model, path, 12);
  for (std::size_t i = 0; i < path.size(); ++i) {
    ASSERT_TRUE(set.errors[i].empty()) << set.errors[i];
    const auto ref = fd_dispersion(c, path[i](0), model.period(0), model.mesh[0], 12);
    for (int b = 0; b < 12; ++b) EXPECT_NEAR(set.bands[i][b], ref[b], 1e-12 * std::max(1.0, ref[b]));
  }
}

TEST(FoldedBands, ConstantCoefficientMatchesDispersion2d) {
  SupercellModel model;
  model.dim = 2;
  model.period = Eigen::Vector2d(2.0, 3.0);
  model.mesh = {10, 12};
  model.eps.assign(120, 2.0);
  const Eigen::Vector2d k(0.4, 0.3);
  const auto set = folded_bands(model, {k}, 6);
  ASSERT_TRUE(set.errors[0].empty()) << set.errors[0];
  std::vector<double> ref;
  for (int a = 0; a < 10; ++a) {
    for (int b = 0; b < 12; ++b) {
      const double hx = 0.2, hy = 0.25;
      const double wx = k(0) + kTwoPi * a / 2.0, wy = k(1) + kTwoPi * b / 3.0;
      ref.push_back(((2 - 2 * std::cos(wx * hx)) / (hx * hx) + (2 - 2 * std::cos(wy * hy)) / (hy * hy)) / 2.0);
    }
  }
  std::sort(ref.begin(), ref.end());
  for (int b = 0; b < 6; ++b) EXPECT_NEAR(set.bands[0][b], ref[b], 1e-9 * std::max(1.0, ref[b]));
}

TEST(FoldedBands, SecondOrderMeshRefinement) {
  // eps = 2 + cos(r): lowest band at k = 0.3 on three meshes.
  SupercellModel model;
  model.dim = 1;
  model.period = Eigen::VectorXd::Constant(1, kTwoPi);
  std::vector<double> lam;
  for (int m : {64, 128, 256}) {
    model.mesh = {m};
    model.eps.resize(m);
    for (int j = 0; j < m; ++j) model.eps[j] = 2.0 + std::cos(kTwoPi * j / m);
    const auto set = folded_bands(model, {Eigen::VectorXd::Constant(1, 0.3)}, 1);
    lam.push_back(set.bands[0][0]);
  }
  EXPECT_NEAR((lam[0] - lam[1]) / (lam[1] - lam[2]), 4.0, 0.1);
}

TEST(FoldedBands, DensityGrowsWithDenominator) {
  const auto geom = ProjectionGeometry::from_catalog("golden-1d");
  std::size_t prev = 0;
  for (std::int64_t q : {3, 8, 21}) {
    const auto model = build_supercell(example4_1d(), geom, {q}, SupercellOptions{});
    const auto set = folded_bands(model, {Eigen::VectorXd::Zero(1)}, 200);
    const auto count = static_cast<std::size_t>(
        std::count_if(set.bands[0].begin(), set.bands[0].end(), [](double v) { return v > 0.05 && v < 2.0; }));
    EXPECT_GT(count, prev) << q;
    prev = count;
  }
}

TEST(BandPath, EndpointsAndSpacing) {
  const auto p = band_path("gamma-x", 2, 4.0, 1);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_EQ(p[0](0), 0.0);
  EXPECT_EQ(p[1](0), std::numbers::pi / 4.0);
  const auto q = band_path("gamma-m", 11, 2.0, 2);
  for (std::size_t i = 1; i < q.size(); ++i) {
    EXPECT_NEAR(q[i](0) - q[i - 1](0), std::numbers::pi / 2.0 / 10.0, 1e-15);
    EXPECT_EQ(q[i](1), 0.0);
  }
  EXPECT_THROW(band_path("gamma-m", 3, 1.0, 1), Error);
  EXPECT_THROW(band_path("nowhere", 3, 1.0, 1), Error);
}

TEST(BandPath, LiftedSamplesProjectBack) {
  const auto geom = ProjectionGeometry::from_catalog("example4-4d");
  for (const auto& k : band_path("gamma-m", 7, 3.0, 2)) {
    const auto K = lift_wavevector(k, geom);
    EXPECT_LT((geom.P.transpose() * K - k).norm(), 1e-12);
  }
}
