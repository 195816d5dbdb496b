// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "qpspec/lattice.hpp"

namespace qpspec {

using cplx = std::complex<double>;

// One term amp * f(index . theta), f = cos or sin, theta_m = 2 pi x_m / T_m.
struct TrigTerm {
  bool is_sine = false;
  std::vector<int> index;
  double amp = 0.0;
};

struct ConstantCoefficient {
  double value = 1.0;
};

// offset + sum of trig terms.
struct TrigSumCoefficient {
  double offset = 0.0;
  std::vector<TrigTerm> terms;
};

// offset + exp(sum of inner terms) + sum of outer terms.
struct ExpTrigCoefficient {
  double offset = 0.0;
  std::vector<TrigTerm> inner;
  std::vector<TrigTerm> outer;
};

// Level set phi = sum_m cos theta_m; eps_b where phi > threshold, eps_a
// elsewhere. With tau > 0 the tanh profile over d = (phi - c) / |grad phi|.
struct TwoPhaseCoefficient {
  double threshold = 1.0;
  double eps_a = 1.0;
  double eps_b = 12.0;
  double tau = 0.0;
};

struct EvalInfo {
  std::size_t degenerate_gradient = 0;
};

class PeriodicCoefficient {
 public:
  using Form = std::variant<ConstantCoefficient, TrigSumCoefficient, ExpTrigCoefficient,
                            TwoPhaseCoefficient>;

  PeriodicCoefficient(Form form, int dim, Eigen::VectorXd periods);

  static PeriodicCoefficient constant(double c, const Eigen::VectorXd& periods);

  double operator()(const double* x, EvalInfo* info = nullptr) const;
  double operator()(const Eigen::VectorXd& x, EvalInfo* info = nullptr) const {
    return (*this)(x.data(), info);
  }

  int dim() const { return dim_; }
  const Eigen::VectorXd& periods() const { return periods_; }
  const Form& form() const { return form_; }
  bool is_two_phase() const { return std::holds_alternative<TwoPhaseCoefficient>(form_); }
  // Sharp version of a (possibly smoothed) two-phase coefficient.
  PeriodicCoefficient sharp() const;
  std::string kind_name() const;

 private:
  Form form_;
  int dim_;
  Eigen::VectorXd periods_;
};

PeriodicCoefficient tanh_smooth(const PeriodicCoefficient& coeff, double tau);

// Coefficient restricted to the physical line/plane: eps(r) = E(P r).
double evaluate_physical(const PeriodicCoefficient& coeff, const ProjectionGeometry& geom,
                         const Eigen::VectorXd& r, EvalInfo* info = nullptr);

// E_xi over the lattice index set (lattice order).
struct FourierCoefficientGrid {
  int N = 0;
  int dim = 0;
  Eigen::VectorXd periods;
  std::vector<cplx> values;
  bool real = true;
  std::size_t degenerate_gradient = 0;
  double sample_min = 0.0;
  double sample_mean = 0.0;
  double sample_mean_sq = 0.0;

  cplx at(const MultiIndex& mi) const;
};

FourierCoefficientGrid sample_to_fourier(const PeriodicCoefficient& coeff, int N,
                                         const ProjectionGeometry& geom, int oversample = 1);

// Grid with E_xi given directly (tests, random coefficients).
FourierCoefficientGrid grid_from_values(int N, const Eigen::VectorXd& periods,
                                        std::vector<cplx> values, bool real);

struct ShellSpectrum {
  std::vector<double> amplitude;   // A_q, q = 0..N
  std::vector<std::size_t> count;  // #J_q
};

ShellSpectrum shell_rms(const FourierCoefficientGrid& grid);

// Binary sidecar: "QPFG", u32 version, i32 N, i32 d, f64 periods[d],
// then (2N)^d complex values (re, im) in lattice order, little endian.
void write_grid(const std::string& path, const FourierCoefficientGrid& grid);
FourierCoefficientGrid read_grid(const std::string& path);

}  // namespace qpspec
