// SPDX-License-Identifier: Apache-2.0
#include "qpspec/eigensolve.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <lapacke.h>

#include "qpspec/error.hpp"
#include "qpspec/lanczos.hpp"

namespace qpspec {

namespace {

struct Partition {
  std::vector<Eigen::Index> active;
  std::vector<Eigen::Index> deflated;
};

Partition partition(const StiffnessDiagonal& K) {
  Partition p;
  for (std::size_t i = 0; i < K.deflated.size(); ++i) {
    (K.deflated[i] ? p.deflated : p.active).push_back(static_cast<Eigen::Index>(i));
  }
  return p;
}

// Largest `nev` eigenpairs of a dense Hermitian matrix, descending.
void dense_largest(Eigen::MatrixXcd& C, int nev, Eigen::VectorXd& mu, Eigen::MatrixXcd& Y) {
  const lapack_int n = static_cast<lapack_int>(C.rows());
  Eigen::VectorXd w(n);
  Eigen::MatrixXcd Z(n, nev);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(nev));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_zheevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', n, reinterpret_cast<lapack_complex_double*>(C.data()), n,
      0.0, 0.0, n - nev + 1, n, 0.0, &found, w.data(),
      reinterpret_cast<lapack_complex_double*>(Z.data()), n, isuppz.data());
  if (info != 0 || found != nev) {
    throw Error(ErrorKind::kConvergence, "dense Hermitian eigensolve failed (info " +
                                             std::to_string(info) + ")");
  }
  mu = w.head(nev).reverse();
  Y = Z.rowwise().reverse();
}

}  // namespace

EmbeddedSpectrum solve_embedded(const StiffnessDiagonal& K, const MassOperator& M,
                                const BlochVector& k, const SolverConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(M.size());
  if (K.values.size() != n) throw Error(ErrorKind::kInvalidArgument, "K and M sizes differ");
  if (cfg.n_eig < 1) throw Error(ErrorKind::kInvalidArgument, "n_eig must be >= 1");
  if (!(cfg.tol > 0.0)) throw Error(ErrorKind::kInvalidArgument, "solver tolerance must be > 0");

  const Partition part = partition(K);
  const auto na = static_cast<Eigen::Index>(part.active.size());
  const auto nd = static_cast<Eigen::Index>(part.deflated.size());
  if (na == 0) throw Error(ErrorKind::kEmptyPencil, "every Fourier mode is deflated");

  Eigen::VectorXd dinv(na);
  for (Eigen::Index i = 0; i < na; ++i) dinv(i) = 1.0 / std::sqrt(K.values(part.active[i]));

  // Coupling to the deflated modes, eliminated by a Schur complement.
  Eigen::MatrixXcd Mad(na, nd);
  Eigen::MatrixXcd Mdd(nd, nd);
  for (Eigen::Index j = 0; j < nd; ++j) {
    for (Eigen::Index i = 0; i < na; ++i) Mad(i, j) = M.entry(part.active[i], part.deflated[j]);
    for (Eigen::Index i = 0; i < nd; ++i) Mdd(i, j) = M.entry(part.deflated[i], part.deflated[j]);
  }
  Eigen::LLT<Eigen::MatrixXcd> Mdd_llt;
  if (nd > 0) {
    Mdd_llt.compute(Mdd);
    if (Mdd_llt.info() != Eigen::Success) {
      throw Error(ErrorKind::kInvalidCoefficient, "mass block on deflated modes is not positive definite");
    }
  }

  const int nev = static_cast<int>(std::min<Eigen::Index>(cfg.n_eig + 5, na));
  const int nret = std::min(cfg.n_eig, nev);

  EmbeddedSpectrum out;
  out.n_modes = static_cast<std::size_t>(n);
  out.n_deflated = static_cast<std::size_t>(nd);

  Eigen::VectorXd mu;
  Eigen::MatrixXcd Y;
  if (static_cast<std::size_t>(na) <= cfg.dense_threshold) {
    out.method = "dense";
    Eigen::MatrixXcd C(na, na);
    for (Eigen::Index j = 0; j < na; ++j) {
      for (Eigen::Index i = j; i < na; ++i) C(i, j) = M.entry(part.active[i], part.active[j]);
    }
    if (nd > 0) {
      const Eigen::MatrixXcd corr = Mad * Mdd_llt.solve(Mad.adjoint());
      for (Eigen::Index j = 0; j < na; ++j) {
        for (Eigen::Index i = j; i < na; ++i) C(i, j) -= corr(i, j);
      }
    }
    for (Eigen::Index j = 0; j < na; ++j) {
      for (Eigen::Index i = j; i < na; ++i) C(i, j) *= dinv(i) * dinv(j);
    }
    dense_largest(C, nev, mu, Y);
  } else {
    out.method = "lanczos";
    MassOperator::Workspace ws(M);
    CVector full = CVector::Zero(n);
    CVector Mfull(n);
    HermitianApply op = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
      full.setZero();
      for (Eigen::Index i = 0; i < na; ++i) full(part.active[i]) = dinv(i) * x(i);
      M.apply(full, Mfull, ws);
      y.resize(na);
      for (Eigen::Index i = 0; i < na; ++i) y(i) = Mfull(part.active[i]);
      if (nd > 0) {
        Eigen::VectorXcd md(nd);
        for (Eigen::Index j = 0; j < nd; ++j) md(j) = Mfull(part.deflated[j]);
        y.noalias() -= Mad * Mdd_llt.solve(md);
      }
      y.array() *= dinv.array();
    };
    LanczosOptions lo;
    lo.nev = nev;
    lo.tol = cfg.tol;
    lo.max_restarts = cfg.max_iter;
    lo.seed = cfg.seed;
    LanczosResult lr = lanczos_largest(op, na, lo);
    out.restarts = lr.restarts;
    if (!lr.converged) {
      std::vector<double> r(lr.residuals.data(), lr.residuals.data() + lr.residuals.size());
      throw Error(ErrorKind::kConvergence,
                  "Lanczos did not converge in " + std::to_string(cfg.max_iter) + " restarts",
                  std::move(r));
    }
    mu = lr.values;
    Y = std::move(lr.vectors);
  }

  for (int i = 0; i < nret; ++i) {
    if (!(mu(i) > 0.0)) {
      throw Error(ErrorKind::kInvalidCoefficient, "inverse pencil has a non-positive eigenvalue");
    }
    SpectralEigenpair pair;
    pair.lambda = 1.0 / mu(i);
    pair.k = k;
    pair.U = CVector::Zero(n);
    Eigen::VectorXcd ua = Y.col(i).cwiseProduct(dinv.cast<cplx>());
    for (Eigen::Index a = 0; a < na; ++a) pair.U(part.active[a]) = ua(a);
    if (nd > 0) {
      const Eigen::VectorXcd ud = -Mdd_llt.solve(Mad.adjoint() * ua);
      for (Eigen::Index j = 0; j < nd; ++j) pair.U(part.deflated[j]) = ud(j);
    }
    pair.U /= pair.U.norm();
    // Fix the global phase: largest component real positive.
    Eigen::Index imax = 0;
    pair.U.cwiseAbs().maxCoeff(&imax);
    pair.U *= std::conj(pair.U(imax)) / std::abs(pair.U(imax));
    pair.residual = residual(pair, K, M);
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

double residual(const SpectralEigenpair& pair, const StiffnessDiagonal& K, const MassOperator& M) {
  const CVector MU = M.apply(pair.U);
  const CVector r = K.values.cast<cplx>().cwiseProduct(pair.U) - pair.lambda * MU;
  return r.norm() / pair.U.norm();
}

namespace {

static_assert(std::endian::native == std::endian::little, "sidecar I/O assumes little endian");

template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& path) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorKind::kIo, "truncated eigenvector sidecar '" + path + "'");
  return v;
}

}  // namespace

void write_eigenvectors(const std::string& path, int N, int dim,
                        const std::vector<SpectralEigenpair>& pairs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  os.write("QPEV", 4);
  put<std::uint32_t>(os, 1);
  put<std::int32_t>(os, N);
  put<std::int32_t>(os, dim);
  put<std::uint64_t>(os, pairs.size());
  for (const auto& p : pairs) {
    put<double>(os, p.lambda);
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.k.size()));
    for (Eigen::Index m = 0; m < p.k.size(); ++m) put<double>(os, p.k(m));
    put<std::uint64_t>(os, static_cast<std::uint64_t>(p.U.size()));
    for (Eigen::Index i = 0; i < p.U.size(); ++i) {
      put<double>(os, p.U(i).real());
      put<double>(os, p.U(i).imag());
    }
  }
  if (!os) throw Error(ErrorKind::kIo, "write failed for '" + path + "'");
}

std::vector<SpectralEigenpair> read_eigenvectors(const std::string& path, int* N, int* dim) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw Error(ErrorKind::kIo, "eigenvector sidecar '" + path +
                                    "' is missing; run the solve subcommand first");
  }
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QPEV", 4) != 0) {
    throw Error(ErrorKind::kIo, "'" + path + "' is not an eigenvector sidecar");
  }
  if (get<std::uint32_t>(is, path) != 1) throw Error(ErrorKind::kIo, "unsupported sidecar version");
  const int n = get<std::int32_t>(is, path);
  const int d = get<std::int32_t>(is, path);
  if (N) *N = n;
  if (dim) *dim = d;
  const auto count = get<std::uint64_t>(is, path);
  std::vector<SpectralEigenpair> pairs(count);
  for (auto& p : pairs) {
    p.lambda = get<double>(is, path);
    const auto kd = get<std::uint64_t>(is, path);
    if (kd > 16) throw Error(ErrorKind::kIo, "corrupt eigenvector sidecar '" + path + "'");
    p.k.resize(static_cast<Eigen::Index>(kd));
    for (auto& v : p.k) v = get<double>(is, path);
    const auto len = get<std::uint64_t>(is, path);
    if (len > (1ull << 32)) throw Error(ErrorKind::kIo, "corrupt eigenvector sidecar '" + path + "'");
    p.U.resize(static_cast<Eigen::Index>(len));
    for (Eigen::Index i = 0; i < p.U.size(); ++i) {
      const double re = get<double>(is, path);
      const double im = get<double>(is, path);
      p.U(i) = cplx(re, im);
    }
  }
  return pairs;
}

}  // namespace qpspec
