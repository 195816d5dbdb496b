// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "qpspec/eigensolve.hpp"

namespace qpspec {

struct ReconstructedField {
  PhysicalSamplingGrid grid;
  std::vector<cplx> values;     // extended grid S(n+1), row-major
  Eigen::MatrixXd frequencies;  // row f is omega_f = P^T (k + xi_f)
  double lambda = 0.0;

  cplx at_ext(int i, int j = 0) const;  // offsets in {-(n+1)..n+1}
  std::vector<cplx> inner_values() const;
};

Eigen::MatrixXd field_frequencies(const ProjectionGeometry& geom, const FourierIndexSet& idx,
                                  const BlochVector& k);

ReconstructedField reconstruct_field(const SpectralEigenpair& pair, const ProjectionGeometry& geom,
                                     const FourierIndexSet& idx, const PhysicalSamplingGrid& grid);

// Direct sum at one physical point.
cplx evaluate_field(const CVector& U, const Eigen::MatrixXd& frequencies, const Eigen::VectorXd& r);

std::vector<double> field_magnitude_snapshot(const ReconstructedField& field);

}  // namespace qpspec
