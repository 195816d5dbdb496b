// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qpspec {

// M = [[a, 0], [t, -1]], L = [[-s, 1], [a, 0]].
struct ScalarSymplecticPair {
  double a = 1.0;
  double s = 0.0;
  double t = 0.0;

  Eigen::Matrix2d M() const;
  Eigen::Matrix2d L() const;
  // L^{-1} M; requires |a| >= floor.
  Eigen::Matrix2d transfer(double floor = 1e-300) const;
};

// Pair whose transfer advances (u_i, u_{i-1}) to (u_{i+1}, u_i) under
// u_{i+1} = s_i u_i - u_{i-1}.
ScalarSymplecticPair step_pair(double s_i);

// Pair with transfer (L2^{-1} M2)(L1^{-1} M1).
ScalarSymplecticPair coalesce(const ScalarSymplecticPair& p1, const ScalarSymplecticPair& p2,
                              double floor = 1e-12);

// Left-to-right fold of a chain.
ScalarSymplecticPair coalesce_chain(const std::vector<ScalarSymplecticPair>& chain,
                                    double floor = 1e-12);

struct RatioSequence {
  std::vector<std::complex<double>> y;  // y_i = u_{i+1} / u_i, 0 at gaps
  std::vector<bool> valid;
  std::size_t gaps = 0;
  std::string source;
};

// Direct division of consecutive samples; samples below floor * max|u| open a gap.
RatioSequence ratio_sequence_from_samples(const std::vector<std::complex<double>>& u,
                                          double floor = 1e-8);
// y_i = s_i - 1 / y_{i-1} starting from y0.
RatioSequence ratio_sequence_from_recurrence(const std::vector<std::complex<double>>& s,
                                             std::complex<double> y0);

struct FivePointRatios {
  int side = 0;  // inner side length
  std::vector<std::complex<double>> y;  // row ratios u_{i+1,j}/u_{ij}
  std::vector<std::complex<double>> z;  // column ratios u_{i,j+1}/u_{ij}
  double sum_residual = 0.0;   // max |y + 1/y_prev + z + 1/z_prev - 2 s|
  double row_imbalance = 0.0;  // max |y + 1/y_prev - s|
  double col_imbalance = 0.0;  // max |z + 1/z_prev - s|
};

// Ratios of a 2D extended field (side 2n+3, row-major) with
// s_ij = (4 - h^2 rho eps_ij) / 2 on the inner grid.
FivePointRatios five_point_ratios(const std::vector<std::complex<double>>& ext, int n, double h,
                                  double rho, const std::vector<double>& eps_inner);

enum class RatioRegime { kBoundedST, kLargeST, kSmallST, kOutside };
const char* to_string(RatioRegime r);

struct StabilityReport {
  RatioRegime regime = RatioRegime::kOutside;
  double eta = 0.0;
  bool small_a = false;
  bool same_order = false;
  bool degenerate = false;  // |t u1 - 1| not bounded away from zero
  std::complex<double> predicted_ratio{0.0, 0.0};  // u_n / u_{n+1}
  bool order_one = false;
};

// eta <= 0 selects sqrt(machine epsilon) times the triple's magnitude.
StabilityReport stability_report(const ScalarSymplecticPair& p, std::complex<double> u1,
                                 double eta = 0.0);

}  // namespace qpspec
