// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qpspec/coefficients.hpp"
#include "qpspec/eigensolve.hpp"
#include "qpspec/lattice.hpp"

namespace qpspec {

struct ValidationConfig {
  double h = 0.01;
  int n = 20000;
  Eigen::VectorXd r0;  // empty -> origin
  double delta = 1e-8;
};

// Which embedded eigenpair a run follows.
struct BranchConfig {
  std::optional<double> target;  // closest lambda_tilde at the largest N
  std::optional<int> index;      // explicit position in the sorted spectrum
};

struct SmoothingConfig {
  std::vector<double> taus;  // 0 means the sharp coefficient
  int mode = 0;              // position in the sorted spectrum
};

struct BandsConfig {
  std::string path = "gamma-x";
  int samples = 5;
  // One list per supercell; 1D needs one denominator, 2D needs
  // d_low * (d_high - 1).
  std::vector<std::vector<std::int64_t>> denominators;
  int n_bands = 40;
  double lambda_min = 0.0;
  double lambda_max = 1.0;
  double mesh_h = 0.05;
  std::size_t max_unknowns = 20000;
};

struct DiagnoseConfig {
  int window = 64;
  int windows = 8;
};

struct OutputConfig {
  bool eigenvectors = true;
  bool coefficient_grid = false;
  bool samples = true;
  bool field = true;
};

struct ExperimentConfig {
  std::string name;
  std::string geometry_label;
  ProjectionGeometry geometry;
  PeriodicCoefficient coefficient = PeriodicCoefficient::constant(1.0, Eigen::VectorXd::Ones(2));
  int oversample = 1;
  std::vector<int> N;  // ascending
  std::optional<Eigen::VectorXd> k_high;
  std::optional<Eigen::VectorXd> k_low;
  SolverConfig solver;
  ValidationConfig validation;
  BranchConfig branch;
  std::optional<SmoothingConfig> smoothing;
  std::optional<BandsConfig> bands;
  DiagnoseConfig diagnose;
  OutputConfig outputs;
  std::vector<std::string> checks;
  int independence_bound = 20;
  std::uint64_t seed = 0;
  std::string source;  // canonical JSON echo

  // Bloch vector in the embedding space (lifted if given in physical space).
  BlochVector bloch() const;
};

// Throws Error(kConfig) naming the offending key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// Names accepted in "checks".
const std::vector<std::string>& known_checks();

}  // namespace qpspec
