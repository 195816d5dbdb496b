// SPDX-License-Identifier: Apache-2.0
#include "qpspec/supercell.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <numeric>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <lapacke.h>

#include "qpspec/error.hpp"
#include "qpspec/lanczos.hpp"

namespace qpspec {

RationalApproximant convergents(double x, std::int64_t q_max) {
  if (q_max < 1) throw Error(ErrorKind::kInvalidArgument, "q_max must be >= 1");
  if (!std::isfinite(x)) throw Error(ErrorKind::kInvalidArgument, "convergents of a non-finite value");
  RationalApproximant out;
  out.target = x;
  std::vector<Convergent> all;
  std::int64_t p_prev = 1, q_prev = 0;  // p_{-1}, q_{-1}
  std::int64_t p_pp = 0, q_pp = 1;      // p_{-2}, q_{-2}
  double rem = x;
  for (int iter = 0; iter < 64; ++iter) {
    const double a_d = std::floor(rem);
    if (std::abs(a_d) > 1e15) break;
    const auto a = static_cast<std::int64_t>(a_d);
    const std::int64_t p = a * p_prev + p_pp;
    const std::int64_t q = a * q_prev + q_pp;
    if (q > q_max) break;
    all.push_back({p, q});
    p_pp = p_prev;
    q_pp = q_prev;
    p_prev = p;
    q_prev = q;
    const double frac = rem - a_d;
    if (std::abs(x - static_cast<double>(p) / static_cast<double>(q)) <=
            4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x)) ||
        frac < 1e-12) {
      break;
    }
    rem = 1.0 / frac;
  }
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i + 1 < all.size() && all[i].q == all[i + 1].q) continue;
    out.convergents.push_back(all[i]);
  }
  return out;
}

Convergent convergent_with_denominator(double x, std::int64_t q) {
  const double ax = std::abs(x);
  const RationalApproximant ra = convergents(ax, q);
  for (const auto& c : ra.convergents) {
    if (c.q == q) return Convergent{x < 0 ? -c.p : c.p, c.q};
  }
  std::string list;
  for (const auto& c : ra.convergents) list += " " + std::to_string(c.p) + "/" + std::to_string(c.q);
  throw Error(ErrorKind::kInvalidArgument, "no convergent of " + std::to_string(x) +
                                               " has denominator " + std::to_string(q) +
                                               " (available:" + list + ")");
}

SupercellModel build_supercell(const PeriodicCoefficient& coeff, const ProjectionGeometry& geom,
                               const std::vector<std::int64_t>& denominators,
                               const SupercellOptions& opts) {
  if (!(opts.mesh_h > 0.0)) throw Error(ErrorKind::kInvalidArgument, "supercell mesh size must be positive");
  const int dl = geom.d_low;
  const int dh = geom.d_high;
  const std::size_t need = static_cast<std::size_t>(dl) * (dh - 1);
  if (denominators.size() != need) {
    throw Error(ErrorKind::kInvalidArgument, "supercell needs " + std::to_string(need) +
                                                 " denominators, got " +
                                                 std::to_string(denominators.size()));
  }
  SupercellModel model;
  model.dim = dl;
  model.period.resize(dl);
  model.P_rational = geom.P;
  std::size_t di = 0;
  for (int c = 0; c < dl; ++c) {
    // Reference row c keeps its entry; the other rows are rationalized
    // against it so every torus coordinate closes after the period.
    const double ref = geom.P(c, c) / geom.T(c);
    if (std::abs(ref) < 1e-14) throw Error(ErrorKind::kSingularGeometry, "zero reference entry in P");
    std::int64_t l = 1;
    for (int m = 0; m < dh; ++m) {
      if (m == c) continue;
      const double ratio = (geom.P(m, c) / geom.T(m)) / ref;
      const Convergent cv = convergent_with_denominator(ratio, denominators[di++]);
      model.used.push_back(cv);
      model.P_rational(m, c) = geom.P(c, c) * cv.value() * geom.T(m) / geom.T(c);
      l = std::lcm(l, cv.q);
    }
    model.period(c) = static_cast<double>(l) * geom.T(c) / std::abs(geom.P(c, c));
    if (model.period(c) > opts.period_cap) {
      throw Error(ErrorKind::kApproximantTooFine,
                  "supercell period " + std::to_string(model.period(c)) + " exceeds cap " +
                      std::to_string(opts.period_cap));
    }
    model.mesh.push_back(std::max(8, static_cast<int>(std::ceil(model.period(c) / opts.mesh_h))));
  }
  std::size_t total = 1;
  for (int m : model.mesh) total *= static_cast<std::size_t>(m);
  if (total > opts.max_unknowns) {
    throw Error(ErrorKind::kApproximantTooFine,
                "supercell mesh has " + std::to_string(total) + " unknowns (cap " +
                    std::to_string(opts.max_unknowns) + ")");
  }
  model.eps.resize(total);
  Eigen::VectorXd r(dl);
  for (std::size_t p = 0; p < total; ++p) {
    if (dl == 1) {
      r(0) = static_cast<double>(p) * model.spacing(0);
    } else {
      r(0) = static_cast<double>(p / model.mesh[1]) * model.spacing(0);
      r(1) = static_cast<double>(p % model.mesh[1]) * model.spacing(1);
    }
    Eigen::VectorXd x = model.P_rational * r;
    for (int m = 0; m < dh; ++m) x(m) -= geom.T(m) * std::floor(x(m) / geom.T(m));
    model.eps[p] = coeff(x.data());
    if (!(model.eps[p] > 0.0)) {
      throw Error(ErrorKind::kInvalidCoefficient, "supercell coefficient is not positive");
    }
  }
  return model;
}

namespace {

using cd = std::complex<double>;

std::vector<double> bands_1d(const SupercellModel& model, double k, int n_bands) {
  const int m = model.mesh[0];
  if (m < 3) throw Error(ErrorKind::kInvalidArgument, "supercell mesh too small");
  const double h = model.spacing(0);
  const double ih2 = 1.0 / (h * h);
  const cd phase = std::polar(1.0, k * model.period(0));
  // Interleaved ordering 0, m-1, 1, m-2, ... turns the cyclic tridiagonal
  // matrix into a band of half-width 2.
  auto pos = [m](int j) { return j < (m + 1) / 2 ? 2 * j : 2 * (m - 1 - j) + 1; };
  const int kd = 2;
  const int ld = kd + 1;
  std::vector<cd> ab(static_cast<std::size_t>(ld) * m, cd(0.0, 0.0));
  auto put = [&](int i, int j, cd v) {  // original (i, j), Hermitian
    int pi = pos(i), pj = pos(j);
    if (pi > pj) {
      std::swap(pi, pj);
      v = std::conj(v);
    }
    ab[static_cast<std::size_t>(kd + pi - pj) + static_cast<std::size_t>(pj) * ld] += v;
  };
  for (int j = 0; j < m; ++j) {
    const double sj = 1.0 / std::sqrt(model.eps[j]);
    put(j, j, 2.0 * ih2 * sj * sj);
    const int jn = (j + 1) % m;
    const double sn = 1.0 / std::sqrt(model.eps[jn]);
    // Row j, column j+1: coupling to u_{j+1}; across the cell edge the
    // neighbour carries the Bloch phase.
    const cd v = (jn == 0 ? -phase : cd(-1.0, 0.0)) * ih2 * sj * sn;
    put(j, jn, v);
  }
  const int nb = std::min(n_bands, m);
  std::vector<double> w(m);
  std::vector<lapack_int> ifail(m);
  lapack_int found = 0;
  cd dummy_q(0.0, 0.0);
  cd dummy_z(0.0, 0.0);
  const lapack_int info = LAPACKE_zhbevx(
      LAPACK_COL_MAJOR, 'N', 'I', 'U', m, kd, reinterpret_cast<lapack_complex_double*>(ab.data()), ld,
      reinterpret_cast<lapack_complex_double*>(&dummy_q), 1, 0.0, 0.0, 1, nb,
      2.0 * LAPACKE_dlamch('S'), &found, w.data(),
      reinterpret_cast<lapack_complex_double*>(&dummy_z), 1, ifail.data());
  if (info != 0 || found != nb) {
    throw Error(ErrorKind::kConvergence, "banded eigensolve failed (info " + std::to_string(info) + ")");
  }
  // The band reduction loses a few digits on long cells; polish each value
  // with inverse iteration and a Rayleigh quotient on the cyclic matrix.
  std::vector<Eigen::Triplet<cd>> trip;
  for (int j = 0; j < m; ++j) {
    const double sj = 1.0 / std::sqrt(model.eps[j]);
    const int jn = (j + 1) % m;
    const cd v = (jn == 0 ? -phase : cd(-1.0, 0.0)) * ih2 * sj / std::sqrt(model.eps[jn]);
    trip.emplace_back(j, j, 2.0 * ih2 * sj * sj);
    trip.emplace_back(j, jn, v);
    trip.emplace_back(jn, j, std::conj(v));
  }
  Eigen::SparseMatrix<cd> A(m, m);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseMatrix<cd> I(m, m);
  I.setIdentity();
  Eigen::SparseLU<Eigen::SparseMatrix<cd>> lu;
  lu.analyzePattern(A);
  const double scale = 4.0 * ih2 / *std::min_element(model.eps.begin(), model.eps.end());
  std::vector<double> out(w.begin(), w.begin() + nb);
  for (auto& lam : out) {
    const double sigma = lam - 1e-9 * (std::abs(lam) + 1.0);
    lu.factorize(A - sigma * I);
    if (lu.info() != Eigen::Success) continue;
    Eigen::VectorXcd x(m);
    for (int j = 0; j < m; ++j) x(j) = cd(1.0 + 0.1 * std::cos(0.7 * j), 0.3 * std::sin(1.3 * j));
    for (int it = 0; it < 3; ++it) {
      x = lu.solve(x);
      x /= x.norm();
    }
    const double rq = x.dot(A * x).real();
    if (std::isfinite(rq) && std::abs(rq - lam) <= 1e-9 * scale) lam = rq;
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<double> bands_2d(const SupercellModel& model, const Eigen::VectorXd& k, int n_bands) {
  const int mx = model.mesh[0];
  const int my = model.mesh[1];
  const double hx = model.spacing(0);
  const double hy = model.spacing(1);
  const cd px = std::polar(1.0, k(0) * model.period(0));
  const cd py = std::polar(1.0, k(1) * model.period(1));
  const Eigen::Index n = static_cast<Eigen::Index>(mx) * my;
  auto id = [my](int a, int b) { return static_cast<Eigen::Index>(a) * my + b; };
  // Shift keeps the factorized matrix positive definite.
  const double shift = 0.05;
  std::vector<Eigen::Triplet<cd>> trip;
  trip.reserve(static_cast<std::size_t>(n) * 5);
  for (int a = 0; a < mx; ++a) {
    for (int b = 0; b < my; ++b) {
      const Eigen::Index i = id(a, b);
      const double si = 1.0 / std::sqrt(model.eps[i]);
      trip.emplace_back(i, i, (2.0 / (hx * hx) + 2.0 / (hy * hy)) * si * si + shift);
      const int an = (a + 1) % mx;
      const int bn = (b + 1) % my;
      const Eigen::Index jx = id(an, b);
      const Eigen::Index jy = id(a, bn);
      const cd vx = (an == 0 ? -px : cd(-1.0, 0.0)) / (hx * hx) * si / std::sqrt(model.eps[jx]);
      const cd vy = (bn == 0 ? -py : cd(-1.0, 0.0)) / (hy * hy) * si / std::sqrt(model.eps[jy]);
      trip.emplace_back(i, jx, vx);
      trip.emplace_back(jx, i, std::conj(vx));
      trip.emplace_back(i, jy, vy);
      trip.emplace_back(jy, i, std::conj(vy));
    }
  }
  Eigen::SparseMatrix<cd> A(n, n);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLLT<Eigen::SparseMatrix<cd>> llt(A);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::kConvergence, "supercell factorization failed");
  const int want = std::min<int>(n_bands, static_cast<int>(n));
  LanczosOptions lo;
  lo.nev = want;
  lo.tol = 1e-11;
  lo.max_restarts = 500;
  const LanczosResult lr =
      lanczos_largest([&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y = llt.solve(x); }, n, lo);
  if (!lr.converged) throw Error(ErrorKind::kConvergence, "supercell Lanczos did not converge");
  std::vector<double> out;
  for (Eigen::Index i = 0; i < lr.values.size(); ++i) out.push_back(1.0 / lr.values(i) - shift);
  Eigen::MatrixXcd found = lr.vectors;

  // A Krylov space holds one vector per eigenspace, so repeated bands can be
  // missed. Rerun with the found vectors projected out until nothing new
  // shows up below the current top band.
  for (int round = 0; round < 64 && found.cols() < n; ++round) {
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(found);
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, found.cols());
    auto project = [&Q](Eigen::VectorXcd v) {
      v -= Q * (Q.adjoint() * v);
      return v;
    };
    LanczosOptions extra = lo;
    extra.nev = static_cast<int>(std::min<Eigen::Index>(8, n - found.cols()));
    extra.seed = lo.seed + 1 + static_cast<std::uint64_t>(round);
    const LanczosResult more = lanczos_largest(
        [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y = project(llt.solve(project(x))); }, n, extra);
    if (!more.converged) throw Error(ErrorKind::kConvergence, "supercell Lanczos did not converge");
    std::sort(out.begin(), out.end());
    const double top = out.back();
    std::vector<Eigen::Index> add;
    for (Eigen::Index i = 0; i < more.values.size(); ++i) {
      if (!(more.values(i) > 0.0)) continue;
      const double lam = 1.0 / more.values(i) - shift;
      if (lam < top - 1e-12 * std::max(1.0, std::abs(top)) || static_cast<int>(out.size()) < want) add.push_back(i);
    }
    if (add.empty()) break;
    Eigen::MatrixXcd grown(n, found.cols() + static_cast<Eigen::Index>(add.size()));
    grown.leftCols(found.cols()) = found;
    for (std::size_t j = 0; j < add.size(); ++j) {
      out.push_back(1.0 / more.values(add[j]) - shift);
      grown.col(found.cols() + static_cast<Eigen::Index>(j)) = more.vectors.col(add[j]);
    }
    found = std::move(grown);
  }
  std::sort(out.begin(), out.end());
  out.resize(static_cast<std::size_t>(want));
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

FoldedBandSet folded_bands(const SupercellModel& model, const std::vector<Eigen::VectorXd>& path,
                           int n_bands) {
  if (n_bands < 1) throw Error(ErrorKind::kInvalidArgument, "n_bands must be >= 1");
  FoldedBandSet set;
  for (const auto& k : path) {
    set.k.push_back(k);
    try {
      if (k.size() != model.dim) throw Error(ErrorKind::kInvalidArgument, "k has the wrong dimension");
      set.bands.push_back(model.dim == 1 ? bands_1d(model, k(0), n_bands) : bands_2d(model, k, n_bands));
      set.errors.emplace_back();
    } catch (const std::exception& e) {
      set.bands.emplace_back();
      set.errors.emplace_back(e.what());
    }
  }
  return set;
}

std::vector<Eigen::VectorXd> band_path(const std::string& name, int samples, double period, int dim) {
  if (samples < 1) throw Error(ErrorKind::kInvalidArgument, "band path needs at least one sample");
  if (!(period > 0.0)) throw Error(ErrorKind::kInvalidArgument, "band path period must be positive");
  if (!((name == "gamma-x" && dim == 1) || (name == "gamma-m" && dim == 2))) {
    throw Error(ErrorKind::kInvalidArgument,
                "unknown band path '" + name + "' for dimension " + std::to_string(dim));
  }
  const double kmax = std::numbers::pi / period;
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < samples; ++i) {
    Eigen::VectorXd k = Eigen::VectorXd::Zero(dim);
    k(0) = samples == 1 ? 0.0 : kmax * static_cast<double>(i) / static_cast<double>(samples - 1);
    out.push_back(k);
  }
  return out;
}

}  // namespace qpspec
