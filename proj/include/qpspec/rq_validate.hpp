// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "qpspec/reconstruct.hpp"

namespace qpspec {

// Cropped FD pair: A maps S(n+1) samples to S(n), B = diag(eps) on S(n).
struct FDOperatorPair {
  int dim = 1;
  double h = 0.0;
  int n = 0;
  std::vector<double> eps;  // inner samples

  // (A u)_s for every inner sample s.
  std::vector<cplx> apply_A(const std::vector<cplx>& ext) const;
  std::size_t inner_count() const { return eps.size(); }
};

FDOperatorPair build_fd_pair(const PhysicalSamplingGrid& grid, std::vector<double> eps);

// eps at the inner grid points, eps(r) = E(P r).
std::vector<double> sample_physical_coefficient(const PeriodicCoefficient& coeff,
                                                const ProjectionGeometry& geom,
                                                const PhysicalSamplingGrid& grid);

struct PointwiseRQSet {
  std::vector<cplx> quotients;  // zero where excluded
  std::vector<double> weights;  // zero where excluded, sum 1 otherwise
  std::vector<bool> included;
  std::size_t n_included = 0;
  std::size_t n_excluded = 0;
};

PointwiseRQSet pointwise_rqs(const ReconstructedField& field, const FDOperatorPair& pair,
                             double delta = 1e-8);
PointwiseRQSet pointwise_rqs(const std::vector<cplx>& ext_values, const FDOperatorPair& pair,
                             double delta = 1e-8);

struct RQEstimate {
  double lambda_tilde = 0.0;
  double lambda_hat = 0.0;
  double e_rq = 0.0;
  double sigma_rq = 0.0;
  double imag_diag = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_excluded = 0;
};

cplx weighted_mean(const PointwiseRQSet& set);
RQEstimate weighted_expectation(const PointwiseRQSet& set);
double rq_error(double lambda_hat, double lambda_tilde);
double weighted_std(const PointwiseRQSet& set, double lambda_hat);

// Full estimate for one embedded eigenvalue.
RQEstimate validate_field(const ReconstructedField& field, const FDOperatorPair& pair,
                          double lambda_tilde, double delta = 1e-8);

// <u, A u> / <u, B u> on the inner samples.
cplx cropped_rayleigh_quotient(const std::vector<cplx>& ext_values, const FDOperatorPair& pair);

struct BoundReport {
  double gap = 0.0;            // |lambda_hat - lambda_tilde|
  double weighted_error = 0.0; // sum p_s |e_s / (eps_s u_s)|
  double constant = 0.0;       // C = sum |u_s| / sum eps_s |u_s|^2
  double e_max = 0.0;
  bool holds = false;
};

BoundReport residual_bound_check(const ReconstructedField& field, const FDOperatorPair& pair,
                                 double lambda_tilde, double delta = 1e-8);
BoundReport residual_bound_check(const std::vector<cplx>& ext_values, const FDOperatorPair& pair,
                                 double lambda_tilde, double delta = 1e-8);

}  // namespace qpspec
