// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace qpspec {

// Cut-and-project geometry: torus point x = P r, P is d_high x d_low.
struct ProjectionGeometry {
  int d_low = 0;
  int d_high = 0;
  Eigen::MatrixXd P;
  Eigen::VectorXd T;

  // Validates shapes and periods; throws kInvalidArgument.
  static ProjectionGeometry make(const Eigen::MatrixXd& P, const Eigen::VectorXd& T);
  // Named entries: golden-1d, example1-1d, example1-4d, example3-4d, example4-4d.
  static ProjectionGeometry from_catalog(const std::string& name);
  static std::vector<std::string> catalog_names();
};

inline constexpr int kMaxDim = 4;
using MultiIndex = std::array<int, kMaxDim>;

// Truncated Fourier index set J. Multi-indices i_m in {-N, ..., N-1},
// enumerated lexicographically with i_1 varying slowest. Lattice coordinate
// c_m = i_m + N; the FFT bin holding frequency i_m is (c_m + N) mod 2N.
class FourierIndexSet {
 public:
  FourierIndexSet(int N, const Eigen::VectorXd& periods);

  int N() const { return N_; }
  int dim() const { return dim_; }
  int side() const { return 2 * N_; }
  std::size_t size() const { return size_; }
  const Eigen::VectorXd& periods() const { return periods_; }

  MultiIndex multi_index(std::size_t pos) const;
  std::size_t position(const MultiIndex& mi) const;
  // Is the multi-index inside the truncation box?
  bool contains(const MultiIndex& mi) const;
  // xi = 2 pi i / T componentwise.
  Eigen::VectorXd frequency(std::size_t pos) const;
  // Row-major FFT buffer offset of the bin for lattice position pos.
  std::size_t fft_bin(std::size_t pos) const { return bins_[pos]; }
  const std::vector<std::size_t>& fft_bins() const { return bins_; }

 private:
  int N_;
  int dim_;
  std::size_t size_;
  Eigen::VectorXd periods_;
  std::vector<std::size_t> bins_;
};

FourierIndexSet build_index_set(int N, const Eigen::VectorXd& periods);

using BlochVector = Eigen::VectorXd;

// Minimum-norm k_high with P^T k_high = k_low.
BlochVector lift_wavevector(const Eigen::VectorXd& k_low, const ProjectionGeometry& geom);

// x = P r wrapped into [0, T_m).
Eigen::VectorXd project_point(const ProjectionGeometry& geom, const Eigen::VectorXd& r);

struct IndependenceReport {
  int bound = 0;
  double min_norm = 0.0;          // min ||sum_j alpha_j p_j||
  std::vector<int> argmin;        // minimizing alpha
  bool flagged = false;           // min_norm < 1e-10
};

IndependenceReport rational_independence_diagnostic(const ProjectionGeometry& geom, int bound);

// Uniform physical grid r = r0 + h * (i, j), indices in S(n) = {-n..n}.
// The extended ring S(n+1) is stored row-major with the first index slowest.
struct PhysicalSamplingGrid {
  int dim = 1;
  Eigen::VectorXd r0;
  double h = 0.0;
  int n = 0;

  static PhysicalSamplingGrid make(int dim, const Eigen::VectorXd& r0, double h, int n);

  int inner_side() const { return 2 * n + 1; }
  int ext_side() const { return 2 * n + 3; }
  std::size_t inner_count() const;
  std::size_t ext_count() const;
  // Coordinate of 1D offset i in {-(n+1)..n+1} along axis.
  double coordinate(int axis, int i) const { return r0(axis) + h * i; }
  // Extended offset of the inner point with local indices (a, b) in [0, 2n+1).
  std::size_t ext_of_inner(std::size_t inner) const;
  Eigen::VectorXd ext_point(std::size_t ext) const;
};

}  // namespace qpspec
