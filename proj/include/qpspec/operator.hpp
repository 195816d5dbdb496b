// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qpspec/coefficients.hpp"
#include "qpspec/lattice.hpp"

namespace qpspec {

using CVector = Eigen::VectorXcd;

struct StiffnessDiagonal {
  Eigen::VectorXd values;     // ||P^T (k + xi)||^2 in lattice order
  std::vector<bool> deflated; // values < threshold
  double threshold = 0.0;

  std::size_t deflated_count() const;
};

// eps_K defaults to 1e-10 * max value.
StiffnessDiagonal assemble_stiffness(const ProjectionGeometry& geom, const BlochVector& k,
                                     const FourierIndexSet& idx,
                                     std::optional<double> eps_K = std::nullopt);

struct DeflationReport {
  std::vector<std::size_t> indices;
  std::size_t count = 0;
  std::size_t total = 0;
};

DeflationReport deflation_report(const StiffnessDiagonal& K);

// Circular convolution by E_xi, applied through FFTs on the 2N^d bin grid.
class MassOperator {
 public:
  // Scratch owned by one caller; holds FFTW plans and buffers.
  class Workspace {
   public:
    explicit Workspace(const MassOperator& op);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

   private:
    friend class MassOperator;
    struct Impl;
    std::unique_ptr<Impl> impl_;
  };

  MassOperator(const FourierCoefficientGrid& grid, const FourierIndexSet& idx);

  std::size_t size() const { return idx_.size(); }
  const FourierIndexSet& index_set() const { return idx_; }
  const FourierCoefficientGrid& grid() const { return grid_; }
  // Real-space multiplier in FFT bin layout.
  const std::vector<cplx>& multiplier() const { return multiplier_; }

  void apply(const CVector& U, CVector& V, Workspace& ws) const;
  CVector apply(const CVector& U) const;

  // Entry M_{row,col} = E_{xi_row - xi_col} with wrap.
  cplx entry(std::size_t row, std::size_t col) const;
  // Upper bound on ||M||_2 from the coefficient samples.
  double norm_bound() const;

 private:
  FourierCoefficientGrid grid_;
  FourierIndexSet idx_;
  std::vector<cplx> multiplier_;
};

}  // namespace qpspec
