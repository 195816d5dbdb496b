// SPDX-License-Identifier: Apache-2.0
#include "qpspec/rq_validate.hpp"

#include <algorithm>
#include <cmath>

#include "qpspec/error.hpp"

namespace qpspec {

std::vector<cplx> FDOperatorPair::apply_A(const std::vector<cplx>& ext) const {
  const double ih2 = 1.0 / (h * h);
  const int ni = 2 * n + 1;
  const int ne = 2 * n + 3;
  std::vector<cplx> out(eps.size());
  if (dim == 1) {
    if (ext.size() != static_cast<std::size_t>(ne)) {
      throw Error(ErrorKind::kInvalidArgument, "FD apply: extended vector has the wrong length");
    }
    for (int s = 0; s < ni; ++s) out[s] = (2.0 * ext[s + 1] - ext[s] - ext[s + 2]) * ih2;
  } else {
    if (ext.size() != static_cast<std::size_t>(ne) * ne) {
      throw Error(ErrorKind::kInvalidArgument, "FD apply: extended vector has the wrong length");
    }
    for (int a = 0; a < ni; ++a) {
      const std::size_t row = static_cast<std::size_t>(a + 1) * ne;
      for (int b = 0; b < ni; ++b) {
        const std::size_t c = row + b + 1;
        out[static_cast<std::size_t>(a) * ni + b] =
            (4.0 * ext[c] - ext[c - ne] - ext[c + ne] - ext[c - 1] - ext[c + 1]) * ih2;
      }
    }
  }
  return out;
}

FDOperatorPair build_fd_pair(const PhysicalSamplingGrid& grid, std::vector<double> eps) {
  if (eps.size() != grid.inner_count()) {
    throw Error(ErrorKind::kInvalidArgument, "FD pair: coefficient sample count does not match the grid");
  }
  for (std::size_t s = 0; s < eps.size(); ++s) {
    if (!(eps[s] > 0.0)) {
      throw Error(ErrorKind::kInvalidCoefficient,
                  "FD pair: coefficient sample " + std::to_string(s) + " is not positive");
    }
  }
  return FDOperatorPair{grid.dim, grid.h, grid.n, std::move(eps)};
}

std::vector<double> sample_physical_coefficient(const PeriodicCoefficient& coeff,
                                                const ProjectionGeometry& geom,
                                                const PhysicalSamplingGrid& grid) {
  std::vector<double> eps(grid.inner_count());
  for (std::size_t s = 0; s < eps.size(); ++s) {
    eps[s] = evaluate_physical(coeff, geom, grid.ext_point(grid.ext_of_inner(s)));
  }
  return eps;
}

PointwiseRQSet pointwise_rqs(const std::vector<cplx>& ext, const FDOperatorPair& pair, double delta) {
  const std::vector<cplx> Au = pair.apply_A(ext);
  const std::size_t ni = pair.inner_count();
  const int ne = 2 * pair.n + 3;
  auto inner = [&](std::size_t s) -> cplx {
    if (pair.dim == 1) return ext[s + 1];
    const int ni_side = 2 * pair.n + 1;
    return ext[(s / ni_side + 1) * ne + (s % ni_side) + 1];
  };
  double umax = 0.0;
  for (std::size_t s = 0; s < ni; ++s) umax = std::max(umax, std::abs(inner(s)));
  const double cut = delta * umax;

  PointwiseRQSet set;
  set.quotients.assign(ni, cplx(0.0, 0.0));
  set.weights.assign(ni, 0.0);
  set.included.assign(ni, false);
  double total = 0.0;
  for (std::size_t s = 0; s < ni; ++s) {
    const cplx u = inner(s);
    if (!(std::abs(u) >= cut) || std::abs(u) == 0.0) {
      ++set.n_excluded;
      continue;
    }
    set.included[s] = true;
    ++set.n_included;
    set.quotients[s] = Au[s] / (pair.eps[s] * u);
    set.weights[s] = pair.eps[s] * std::norm(u);
    total += set.weights[s];
  }
  if (set.n_included == 0) throw Error(ErrorKind::kEmptyEstimator, "every sample was excluded");
  for (auto& w : set.weights) w /= total;
  return set;
}

PointwiseRQSet pointwise_rqs(const ReconstructedField& field, const FDOperatorPair& pair, double delta) {
  if (field.grid.dim != pair.dim || field.grid.n != pair.n) {
    throw Error(ErrorKind::kInvalidArgument, "field grid does not match the FD operator grid");
  }
  return pointwise_rqs(field.values, pair, delta);
}

cplx weighted_mean(const PointwiseRQSet& set) {
  if (set.n_included == 0) throw Error(ErrorKind::kEmptyEstimator, "no included samples");
  cplx acc(0.0, 0.0);
  for (std::size_t s = 0; s < set.weights.size(); ++s) {
    if (set.included[s]) acc += set.weights[s] * set.quotients[s];
  }
  return acc;
}

RQEstimate weighted_expectation(const PointwiseRQSet& set) {
  const cplx m = weighted_mean(set);
  RQEstimate e;
  e.lambda_hat = m.real();
  e.imag_diag = std::abs(m.imag());
  e.n_samples = set.n_included;
  e.n_excluded = set.n_excluded;
  return e;
}

double rq_error(double lambda_hat, double lambda_tilde) { return std::abs(lambda_hat - lambda_tilde); }

double weighted_std(const PointwiseRQSet& set, double lambda_hat) {
  double acc = 0.0;
  for (std::size_t s = 0; s < set.weights.size(); ++s) {
    if (set.included[s]) acc += set.weights[s] * std::norm(set.quotients[s] - lambda_hat);
  }
  return std::sqrt(acc);
}

RQEstimate validate_field(const ReconstructedField& field, const FDOperatorPair& pair,
                          double lambda_tilde, double delta) {
  const PointwiseRQSet set = pointwise_rqs(field, pair, delta);
  RQEstimate e = weighted_expectation(set);
  e.lambda_tilde = lambda_tilde;
  e.e_rq = rq_error(e.lambda_hat, lambda_tilde);
  e.sigma_rq = weighted_std(set, e.lambda_hat);
  return e;
}

cplx cropped_rayleigh_quotient(const std::vector<cplx>& ext, const FDOperatorPair& pair) {
  const std::vector<cplx> Au = pair.apply_A(ext);
  const int ne = 2 * pair.n + 3;
  const int ni_side = 2 * pair.n + 1;
  cplx num(0.0, 0.0);
  double den = 0.0;
  for (std::size_t s = 0; s < Au.size(); ++s) {
    const cplx u = pair.dim == 1 ? ext[s + 1] : ext[(s / ni_side + 1) * ne + (s % ni_side) + 1];
    num += std::conj(u) * Au[s];
    den += pair.eps[s] * std::norm(u);
  }
  return num / den;
}

BoundReport residual_bound_check(const std::vector<cplx>& ext, const FDOperatorPair& pair,
                                 double lambda_tilde, double delta) {
  const PointwiseRQSet set = pointwise_rqs(ext, pair, delta);
  const std::vector<cplx> Au = pair.apply_A(ext);
  const int ne = 2 * pair.n + 3;
  const int ni_side = 2 * pair.n + 1;
  BoundReport r;
  double sum_abs = 0.0;
  double sum_w = 0.0;
  for (std::size_t s = 0; s < Au.size(); ++s) {
    if (!set.included[s]) continue;
    const cplx u = pair.dim == 1 ? ext[s + 1] : ext[(s / ni_side + 1) * ne + (s % ni_side) + 1];
    const cplx e = Au[s] - lambda_tilde * pair.eps[s] * u;
    r.e_max = std::max(r.e_max, std::abs(e));
    r.weighted_error += set.weights[s] * std::abs(e / (pair.eps[s] * u));
    sum_abs += std::abs(u);
    sum_w += pair.eps[s] * std::norm(u);
  }
  r.gap = std::abs(weighted_mean(set).real() - lambda_tilde);
  r.constant = sum_abs / sum_w;
  // Rounding slack relative to the compared magnitudes.
  const double slack = 1e-12 * (std::abs(lambda_tilde) + r.weighted_error);
  r.holds = r.gap <= r.weighted_error + slack &&
            r.weighted_error <= r.constant * r.e_max * (1.0 + 1e-12) + slack;
  return r;
}

BoundReport residual_bound_check(const ReconstructedField& field, const FDOperatorPair& pair,
                                 double lambda_tilde, double delta) {
  return residual_bound_check(field.values, pair, lambda_tilde, delta);
}

}  // namespace qpspec
