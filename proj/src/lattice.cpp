// SPDX-License-Identifier: Apache-2.0
#include "qpspec/lattice.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "qpspec/error.hpp"

namespace qpspec {

ProjectionGeometry ProjectionGeometry::make(const Eigen::MatrixXd& P, const Eigen::VectorXd& T) {
  const int d_high = static_cast<int>(P.rows());
  const int d_low = static_cast<int>(P.cols());
  if (!((d_low == 1 && d_high == 2) || (d_low == 2 && d_high == 4))) {
    throw Error(ErrorKind::kInvalidArgument,
                "projection must be 2x1 or 4x2, got " + std::to_string(d_high) + "x" +
                    std::to_string(d_low));
  }
  if (T.size() != d_high) {
    throw Error(ErrorKind::kInvalidArgument, "period count must equal the high dimension");
  }
  for (int m = 0; m < d_high; ++m) {
    if (!(T(m) > 0.0) || !std::isfinite(T(m))) {
      throw Error(ErrorKind::kInvalidArgument, "torus periods must be positive and finite");
    }
  }
  if (!P.allFinite()) throw Error(ErrorKind::kInvalidArgument, "projection has non-finite entries");
  return ProjectionGeometry{d_low, d_high, P, T};
}

std::vector<std::string> ProjectionGeometry::catalog_names() {
  return {"golden-1d", "example1-1d", "example1-4d", "example3-4d", "example4-4d"};
}

ProjectionGeometry ProjectionGeometry::from_catalog(const std::string& name) {
  const double two_pi = 2.0 * std::numbers::pi;
  const double gamma = (std::sqrt(5.0) - 1.0) / 2.0;
  if (name == "golden-1d") {
    const double theta = std::atan(gamma);
    Eigen::MatrixXd P(2, 1);
    P << std::cos(theta), std::sin(theta);
    return make(P, Eigen::Vector2d(two_pi, two_pi));
  }
  if (name == "example1-1d") {
    Eigen::MatrixXd P(2, 1);
    P << 1.0, gamma;
    return make(P, Eigen::Vector2d(two_pi, two_pi));
  }
  if (name == "example1-4d") {
    Eigen::MatrixXd P(4, 2);
    P << 1.0, std::sqrt(7.0),
         std::sqrt(2.0), 1.0,
         std::sqrt(3.0), std::exp(-1.0),
         std::sqrt(5.0), std::exp(1.0);
    return make(P, Eigen::Vector4d::Constant(two_pi));
  }
  if (name == "example3-4d" || name == "example4-4d") {
    Eigen::MatrixXd P(4, 2);
    P << 1.0, std::sqrt(2.0),
         std::sqrt(3.0), 1.0,
         std::sqrt(5.0), std::sqrt(7.0),
         std::sqrt(11.0), std::sqrt(13.0);
    return make(P, Eigen::Vector4d::Constant(two_pi));
  }
  throw Error(ErrorKind::kInvalidArgument, "unknown geometry catalog entry '" + name + "'");
}

FourierIndexSet::FourierIndexSet(int N, const Eigen::VectorXd& periods)
    : N_(N), dim_(static_cast<int>(periods.size())), size_(1), periods_(periods) {
  if (N < 1) throw Error(ErrorKind::kInvalidArgument, "truncation N must be >= 1");
  if (dim_ < 1 || dim_ > kMaxDim) {
    throw Error(ErrorKind::kInvalidArgument, "index set dimension must be 1..4");
  }
  for (int m = 0; m < dim_; ++m) {
    if (!(periods(m) > 0.0)) throw Error(ErrorKind::kInvalidArgument, "periods must be positive");
  }
  const std::size_t L = static_cast<std::size_t>(2 * N);
  for (int m = 0; m < dim_; ++m) size_ *= L;
  bins_.resize(size_);
  for (std::size_t pos = 0; pos < size_; ++pos) {
    std::size_t rem = pos;
    std::size_t bin = 0;
    std::size_t stride = 1;
    for (int m = dim_ - 1; m >= 0; --m) {
      const std::size_t c = rem % L;
      rem /= L;
      bin += ((c + static_cast<std::size_t>(N)) % L) * stride;
      stride *= L;
    }
    bins_[pos] = bin;
  }
}

MultiIndex FourierIndexSet::multi_index(std::size_t pos) const {
  MultiIndex mi{0, 0, 0, 0};
  const std::size_t L = static_cast<std::size_t>(2 * N_);
  for (int m = dim_ - 1; m >= 0; --m) {
    mi[m] = static_cast<int>(pos % L) - N_;
    pos /= L;
  }
  return mi;
}

bool FourierIndexSet::contains(const MultiIndex& mi) const {
  for (int m = 0; m < dim_; ++m) {
    if (mi[m] < -N_ || mi[m] >= N_) return false;
  }
  return true;
}

std::size_t FourierIndexSet::position(const MultiIndex& mi) const {
  if (!contains(mi)) throw Error(ErrorKind::kInvalidArgument, "multi-index outside truncation");
  const std::size_t L = static_cast<std::size_t>(2 * N_);
  std::size_t pos = 0;
  for (int m = 0; m < dim_; ++m) pos = pos * L + static_cast<std::size_t>(mi[m] + N_);
  return pos;
}

Eigen::VectorXd FourierIndexSet::frequency(std::size_t pos) const {
  const MultiIndex mi = multi_index(pos);
  Eigen::VectorXd xi(dim_);
  for (int m = 0; m < dim_; ++m) xi(m) = 2.0 * std::numbers::pi * mi[m] / periods_(m);
  return xi;
}

FourierIndexSet build_index_set(int N, const Eigen::VectorXd& periods) {
  return FourierIndexSet(N, periods);
}

BlochVector lift_wavevector(const Eigen::VectorXd& k_low, const ProjectionGeometry& geom) {
  if (k_low.size() != geom.d_low) {
    throw Error(ErrorKind::kInvalidArgument, "k_low length must equal the low dimension");
  }
  const Eigen::MatrixXd G = geom.P.transpose() * geom.P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
  lu.setThreshold(1e-12);
  if (lu.rank() < geom.d_low) {
    throw Error(ErrorKind::kSingularGeometry, "projection matrix is rank deficient");
  }
  return geom.P * lu.solve(k_low);
}

Eigen::VectorXd project_point(const ProjectionGeometry& geom, const Eigen::VectorXd& r) {
  Eigen::VectorXd x = geom.P * r;
  for (int m = 0; m < geom.d_high; ++m) {
    const double T = geom.T(m);
    double w = x(m) - T * std::floor(x(m) / T);
    if (w >= T || w < 0.0) w = 0.0;
    x(m) = w;
  }
  return x;
}

IndependenceReport rational_independence_diagnostic(const ProjectionGeometry& geom, int bound) {
  if (bound < 1) throw Error(ErrorKind::kInvalidArgument, "search bound must be >= 1");
  const int d = geom.d_high;
  const int width = 2 * bound + 1;
  std::size_t total = 1;
  for (int m = 0; m < d; ++m) total *= static_cast<std::size_t>(width);

  IndependenceReport rep;
  rep.bound = bound;
  rep.min_norm = std::numeric_limits<double>::infinity();
  int best_inf = std::numeric_limits<int>::max();
  std::vector<int> alpha(d);
  Eigen::VectorXd acc(geom.d_low);
  // Only the half with a positive leading nonzero entry is scanned.
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t rem = code;
    for (int m = d - 1; m >= 0; --m) {
      alpha[m] = static_cast<int>(rem % width) - bound;
      rem /= width;
    }
    int lead = 0;
    for (int m = 0; m < d; ++m) {
      if (alpha[m] != 0) {
        lead = alpha[m];
        break;
      }
    }
    if (lead <= 0) continue;
    acc.setZero();
    int inf = 0;
    for (int m = 0; m < d; ++m) {
      acc += alpha[m] * geom.P.row(m).transpose();
      inf = std::max(inf, std::abs(alpha[m]));
    }
    const double v = acc.norm();
    if (v < rep.min_norm || (v == rep.min_norm && inf < best_inf)) {
      rep.min_norm = v;
      rep.argmin = alpha;
      best_inf = inf;
    }
  }
  rep.flagged = rep.min_norm < 1e-10;
  return rep;
}

PhysicalSamplingGrid PhysicalSamplingGrid::make(int dim, const Eigen::VectorXd& r0, double h,
                                                int n) {
  if (dim != 1 && dim != 2) throw Error(ErrorKind::kInvalidArgument, "grid dimension must be 1 or 2");
  if (r0.size() != dim) throw Error(ErrorKind::kInvalidArgument, "grid origin has wrong length");
  if (!(h > 0.0)) throw Error(ErrorKind::kInvalidArgument, "mesh size must be positive");
  if (n < 0) throw Error(ErrorKind::kInvalidArgument, "grid half-width must be >= 0");
  return PhysicalSamplingGrid{dim, r0, h, n};
}

std::size_t PhysicalSamplingGrid::inner_count() const {
  const auto s = static_cast<std::size_t>(inner_side());
  return dim == 1 ? s : s * s;
}

std::size_t PhysicalSamplingGrid::ext_count() const {
  const auto s = static_cast<std::size_t>(ext_side());
  return dim == 1 ? s : s * s;
}

std::size_t PhysicalSamplingGrid::ext_of_inner(std::size_t inner) const {
  if (dim == 1) return inner + 1;
  const auto s = static_cast<std::size_t>(inner_side());
  const std::size_t a = inner / s;
  const std::size_t b = inner % s;
  return (a + 1) * static_cast<std::size_t>(ext_side()) + (b + 1);
}

Eigen::VectorXd PhysicalSamplingGrid::ext_point(std::size_t ext) const {
  Eigen::VectorXd r(dim);
  if (dim == 1) {
    r(0) = coordinate(0, static_cast<int>(ext) - (n + 1));
  } else {
    const auto s = static_cast<std::size_t>(ext_side());
    r(0) = coordinate(0, static_cast<int>(ext / s) - (n + 1));
    r(1) = coordinate(1, static_cast<int>(ext % s) - (n + 1));
  }
  return r;
}

}  // namespace qpspec
