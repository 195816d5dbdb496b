// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>

#include <Eigen/Dense>

namespace qpspec {

// y = A x for a Hermitian A.
using HermitianApply = std::function<void(const Eigen::VectorXcd& x, Eigen::VectorXcd& y)>;

struct LanczosOptions {
  int nev = 1;
  int ncv = 0;          // basis size; 0 picks max(2 nev + 20, nev + 40)
  double tol = 1e-10;   // Ritz residual relative to the Ritz value
  int max_restarts = 300;
  std::uint64_t seed = 0;
};

struct LanczosResult {
  Eigen::VectorXd values;    // descending
  Eigen::MatrixXcd vectors;  // columns match values
  Eigen::VectorXd residuals; // Ritz residual norms
  int restarts = 0;
  int applies = 0;
  bool converged = false;
};

// Thick-restart Lanczos with full reorthogonalization for the largest
// eigenvalues. The start vector is drawn from a seeded normal distribution.
LanczosResult lanczos_largest(const HermitianApply& op, Eigen::Index n, const LanczosOptions& opts);

}  // namespace qpspec
