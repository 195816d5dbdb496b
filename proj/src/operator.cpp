// SPDX-License-Identifier: Apache-2.0
#include "qpspec/operator.hpp"

#include <cmath>
#include <mutex>

#include <fftw3.h>

#include "fft.hpp"
#include "qpspec/error.hpp"

namespace qpspec {

std::size_t StiffnessDiagonal::deflated_count() const {
  std::size_t c = 0;
  for (bool b : deflated) c += b ? 1 : 0;
  return c;
}

StiffnessDiagonal assemble_stiffness(const ProjectionGeometry& geom, const BlochVector& k,
                                     const FourierIndexSet& idx, std::optional<double> eps_K) {
  if (k.size() != geom.d_high || idx.dim() != geom.d_high) {
    throw Error(ErrorKind::kInvalidArgument, "stiffness: dimensions of geometry, k and J differ");
  }
  StiffnessDiagonal K;
  K.values.resize(static_cast<Eigen::Index>(idx.size()));
  const Eigen::MatrixXd Pt = geom.P.transpose();
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    const Eigen::VectorXd w = Pt * (k + idx.frequency(pos));
    K.values(static_cast<Eigen::Index>(pos)) = w.squaredNorm();
  }
  const double vmax = K.values.size() ? K.values.maxCoeff() : 0.0;
  K.threshold = eps_K ? *eps_K : 1e-10 * vmax;
  K.deflated.resize(idx.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    K.deflated[pos] = K.values(static_cast<Eigen::Index>(pos)) < K.threshold;
  }
  return K;
}

DeflationReport deflation_report(const StiffnessDiagonal& K) {
  DeflationReport r;
  r.total = K.deflated.size();
  for (std::size_t i = 0; i < K.deflated.size(); ++i) {
    if (K.deflated[i]) r.indices.push_back(i);
  }
  r.count = r.indices.size();
  return r;
}

struct MassOperator::Workspace::Impl {
  std::vector<cplx> buf;
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
};

MassOperator::Workspace::Workspace(const MassOperator& op) : impl_(std::make_unique<Impl>()) {
  const int L = op.idx_.side();
  const int d = op.idx_.dim();
  impl_->buf.resize(op.size());
  int n[4] = {L, L, L, L};
  auto* p = reinterpret_cast<fftw_complex*>(impl_->buf.data());
  std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
  impl_->fwd = fftw_plan_dft(d, n, p, p, FFTW_FORWARD, FFTW_ESTIMATE);
  impl_->bwd = fftw_plan_dft(d, n, p, p, FFTW_BACKWARD, FFTW_ESTIMATE);
}

MassOperator::Workspace::~Workspace() {
  std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
  if (impl_->fwd) fftw_destroy_plan(impl_->fwd);
  if (impl_->bwd) fftw_destroy_plan(impl_->bwd);
}

MassOperator::MassOperator(const FourierCoefficientGrid& grid, const FourierIndexSet& idx)
    : grid_(grid), idx_(idx) {
  if (grid.N != idx.N() || grid.dim != idx.dim()) {
    throw Error(ErrorKind::kInvalidArgument, "mass operator: grid and index set differ");
  }
  multiplier_.assign(idx.size(), cplx(0.0, 0.0));
  for (std::size_t pos = 0; pos < idx.size(); ++pos) multiplier_[idx.fft_bin(pos)] = grid.values[pos];
  detail::fft_inplace(multiplier_, idx.side(), idx.dim(), +1);
}

void MassOperator::apply(const CVector& U, CVector& V, Workspace& ws) const {
  const std::size_t n = size();
  if (static_cast<std::size_t>(U.size()) != n) {
    throw Error(ErrorKind::kInvalidArgument, "mass apply: vector length " +
                                                 std::to_string(U.size()) + " != " +
                                                 std::to_string(n));
  }
  auto& buf = ws.impl_->buf;
  const auto& bins = idx_.fft_bins();
  for (std::size_t pos = 0; pos < n; ++pos) buf[bins[pos]] = U(static_cast<Eigen::Index>(pos));
  auto* p = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_execute_dft(ws.impl_->bwd, p, p);
  for (std::size_t i = 0; i < n; ++i) buf[i] *= multiplier_[i];
  fftw_execute_dft(ws.impl_->fwd, p, p);
  const double scale = 1.0 / static_cast<double>(n);
  V.resize(static_cast<Eigen::Index>(n));
  for (std::size_t pos = 0; pos < n; ++pos) V(static_cast<Eigen::Index>(pos)) = buf[bins[pos]] * scale;
}

CVector MassOperator::apply(const CVector& U) const {
  Workspace ws(*this);
  CVector V;
  apply(U, V, ws);
  return V;
}

cplx MassOperator::entry(std::size_t row, std::size_t col) const {
  const MultiIndex a = idx_.multi_index(row);
  const MultiIndex b = idx_.multi_index(col);
  const int N = idx_.N();
  const int L = idx_.side();
  MultiIndex d{0, 0, 0, 0};
  for (int m = 0; m < idx_.dim(); ++m) d[m] = ((a[m] - b[m] + N) % L + L) % L - N;
  return grid_.values[idx_.position(d)];
}

double MassOperator::norm_bound() const {
  double v = 0.0;
  for (const auto& m : multiplier_) v = std::max(v, std::abs(m));
  return v;
}

}  // namespace qpspec
