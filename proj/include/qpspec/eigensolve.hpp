// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "qpspec/operator.hpp"

namespace qpspec {

struct SolverConfig {
  int n_eig = 10;
  double tol = 1e-10;
  int max_iter = 300;
  std::uint64_t seed = 0;
  std::size_t dense_threshold = 4096;
};

struct SpectralEigenpair {
  double lambda = 0.0;  // embedded eigenvalue
  CVector U;            // ||U||_2 = 1, lattice order
  BlochVector k;
  double residual = 0.0;
};

struct EmbeddedSpectrum {
  std::vector<SpectralEigenpair> pairs;  // ascending lambda
  std::size_t n_modes = 0;
  std::size_t n_deflated = 0;
  std::string method;  // "dense" or "lanczos"
  int restarts = 0;
};

// Smallest positive eigenvalues of K U = lambda M U via the largest
// eigenvalues of K^{-1/2} S K^{-1/2}, where S is M with the deflated modes
// eliminated by a Schur complement.
EmbeddedSpectrum solve_embedded(const StiffnessDiagonal& K, const MassOperator& M,
                                const BlochVector& k, const SolverConfig& cfg);

// ||K U - lambda M U|| / ||U||.
double residual(const SpectralEigenpair& pair, const StiffnessDiagonal& K, const MassOperator& M);

// Eigenvector sidecar: "QPEV", u32 version, i32 N, i32 d, u64 count, then
// per pair f64 lambda, u64 len + f64 k[len], u64 len + complex U[len]
// (re, im) in lattice order. Little endian.
void write_eigenvectors(const std::string& path, int N, int dim,
                        const std::vector<SpectralEigenpair>& pairs);
std::vector<SpectralEigenpair> read_eigenvectors(const std::string& path, int* N, int* dim);

}  // namespace qpspec
