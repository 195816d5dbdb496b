// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpspec/coefficients.hpp"
#include "qpspec/lattice.hpp"

namespace qpspec {

struct Convergent {
  std::int64_t p = 0;
  std::int64_t q = 1;
  double value() const { return static_cast<double>(p) / static_cast<double>(q); }
};

struct RationalApproximant {
  double target = 0.0;
  std::vector<Convergent> convergents;
};

// Continued-fraction convergents with q <= q_max. A leading convergent that
// shares its denominator with the next one is dropped.
RationalApproximant convergents(double x, std::int64_t q_max);

// Returns the convergent with denominator q; throws if none.
Convergent convergent_with_denominator(double x, std::int64_t q);

struct SupercellModel {
  int dim = 1;
  Eigen::VectorXd period;       // supercell period per physical axis
  std::vector<int> mesh;        // points per axis
  std::vector<double> eps;      // row-major samples, first axis slowest
  Eigen::MatrixXd P_rational;   // rationalized projection
  std::vector<Convergent> used; // convergents per rationalized ratio
  std::string note;

  double spacing(int axis) const { return period(axis) / mesh[axis]; }
};

struct SupercellOptions {
  double mesh_h = 0.05;
  double period_cap = 1e5;
  std::size_t max_unknowns = 20000;
};

// 1D: rationalize the slope (p2/T2)/(p1/T1) with a convergent of the given
// denominator. 2D: every column ratio P_m,c T_ref / (P_ref,c T_m) with
// denominators chosen per entry from the list (one per off-reference row).
SupercellModel build_supercell(const PeriodicCoefficient& coeff, const ProjectionGeometry& geom,
                               const std::vector<std::int64_t>& denominators,
                               const SupercellOptions& opts);

struct FoldedBandSet {
  std::vector<Eigen::VectorXd> k;
  std::vector<std::vector<double>> bands;  // ascending per k
  std::vector<std::string> errors;         // empty string on success
};

FoldedBandSet folded_bands(const SupercellModel& model, const std::vector<Eigen::VectorXd>& path,
                           int n_bands);

// Uniform samples of (k_x, 0, ...) with k_x in [0, pi/T]. Names: gamma-x
// (1D), gamma-m (2D).
std::vector<Eigen::VectorXd> band_path(const std::string& name, int samples, double period,
                                       int dim);

}  // namespace qpspec
