// SPDX-License-Identifier: Apache-2.0
#include "qpspec/lanczos.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "qpspec/error.hpp"

namespace qpspec {

namespace {

Eigen::VectorXcd random_vector(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = nd(rng);
    const double im = nd(rng);
    v(i) = {re, im};
  }
  return v;
}

// Two passes of classical Gram-Schmidt against the first `cols` columns.
Eigen::VectorXcd orthogonalize(const Eigen::MatrixXcd& V, Eigen::Index cols, Eigen::VectorXcd& w) {
  auto B = V.leftCols(cols);
  Eigen::VectorXcd h = B.adjoint() * w;
  w.noalias() -= B * h;
  Eigen::VectorXcd h2 = B.adjoint() * w;
  w.noalias() -= B * h2;
  h += h2;
  return h;
}

}  // namespace

LanczosResult lanczos_largest(const HermitianApply& op, Eigen::Index n, const LanczosOptions& opts) {
  if (n < 1) throw Error(ErrorKind::kEmptyPencil, "Lanczos on an empty operator");
  if (opts.nev < 1) throw Error(ErrorKind::kInvalidArgument, "requested eigenvalue count must be >= 1");
  const Eigen::Index nev = std::min<Eigen::Index>(opts.nev, n);
  Eigen::Index ncv = opts.ncv > 0 ? opts.ncv : std::max<Eigen::Index>(2 * nev + 20, nev + 40);
  ncv = std::min(ncv, n);

  std::mt19937_64 rng(opts.seed);
  Eigen::MatrixXcd V(n, ncv + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(ncv, ncv);
  {
    Eigen::VectorXcd v0 = random_vector(n, rng);
    V.col(0) = v0 / v0.norm();
  }

  LanczosResult res;
  Eigen::VectorXcd w(n);
  Eigen::Index kept = 0;
  double beta = 0.0;
  double scale = 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es;

  for (int restart = 0;; ++restart) {
    for (Eigen::Index j = kept; j < ncv; ++j) {
      op(V.col(j), w);
      ++res.applies;
      const Eigen::VectorXcd h = orthogonalize(V, j + 1, w);
      for (Eigen::Index i = 0; i <= j; ++i) {
        H(i, j) = h(i);
        H(j, i) = std::conj(h(i));
      }
      H(j, j) = h(j).real();
      scale = std::max(scale, std::abs(h(j)));
      beta = w.norm();
      if (beta <= 1e-13 * std::max(scale, 1e-300)) {
        // Invariant subspace: continue with a fresh orthogonal direction.
        if (j + 1 >= n) {
          beta = 0.0;
          V.col(j + 1).setZero();
          continue;
        }
        Eigen::VectorXcd r = random_vector(n, rng);
        orthogonalize(V, j + 1, r);
        V.col(j + 1) = r / r.norm();
        beta = 0.0;
      } else {
        V.col(j + 1) = w / beta;
      }
    }

    es.compute(H);
    // Descending order.
    const Eigen::VectorXd theta = es.eigenvalues().reverse();
    const Eigen::MatrixXcd Y = es.eigenvectors().rowwise().reverse();
    const double top = std::max(std::abs(theta(0)), 1e-300);
    Eigen::VectorXd rn(nev);
    bool all = true;
    for (Eigen::Index i = 0; i < nev; ++i) {
      rn(i) = beta * std::abs(Y(ncv - 1, i));
      const double ref = std::max(std::abs(theta(i)), 1e-8 * top);
      if (rn(i) > opts.tol * ref) all = false;
    }
    res.restarts = restart;
    if (all || restart >= opts.max_restarts || ncv == n) {
      res.values = theta.head(nev);
      res.vectors = V.leftCols(ncv) * Y.leftCols(nev);
      res.residuals = rn;
      res.converged = all || ncv == n;
      return res;
    }

    const Eigen::Index keep = std::min<Eigen::Index>(nev + (ncv - nev) / 2, ncv - 1);
    Eigen::MatrixXcd Vk = V.leftCols(ncv) * Y.leftCols(keep);
    V.leftCols(keep) = Vk;
    V.col(keep) = V.col(ncv);
    H.setZero();
    for (Eigen::Index i = 0; i < keep; ++i) H(i, i) = theta(i);
    kept = keep;
  }
}

}  // namespace qpspec
