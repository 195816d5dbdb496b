// SPDX-License-Identifier: Apache-2.0
#include "qpspec/reconstruct.hpp"

#include <algorithm>
#include <cmath>

#include "qpspec/error.hpp"

namespace qpspec {

namespace {

constexpr Eigen::Index kFreqChunk = 4096;

}  // namespace

cplx ReconstructedField::at_ext(int i, int j) const {
  const int s = grid.ext_side();
  const int off = grid.n + 1;
  if (grid.dim == 1) return values[static_cast<std::size_t>(i + off)];
  return values[static_cast<std::size_t>(i + off) * s + static_cast<std::size_t>(j + off)];
}

std::vector<cplx> ReconstructedField::inner_values() const {
  std::vector<cplx> out(grid.inner_count());
  for (std::size_t s = 0; s < out.size(); ++s) out[s] = values[grid.ext_of_inner(s)];
  return out;
}

Eigen::MatrixXd field_frequencies(const ProjectionGeometry& geom, const FourierIndexSet& idx,
                                  const BlochVector& k) {
  if (idx.dim() != geom.d_high || k.size() != geom.d_high) {
    throw Error(ErrorKind::kInvalidArgument, "frequency list: dimensions differ");
  }
  Eigen::MatrixXd W(static_cast<Eigen::Index>(idx.size()), geom.d_low);
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    W.row(static_cast<Eigen::Index>(pos)) = (geom.P.transpose() * (k + idx.frequency(pos))).transpose();
  }
  return W;
}

cplx evaluate_field(const CVector& U, const Eigen::MatrixXd& frequencies, const Eigen::VectorXd& r) {
  cplx acc(0.0, 0.0);
  for (Eigen::Index f = 0; f < U.size(); ++f) {
    const double phase = frequencies.row(f).dot(r);
    acc += U(f) * cplx(std::cos(phase), std::sin(phase));
  }
  return acc;
}

ReconstructedField reconstruct_field(const SpectralEigenpair& pair, const ProjectionGeometry& geom,
                                     const FourierIndexSet& idx, const PhysicalSamplingGrid& grid) {
  if (grid.dim != geom.d_low) throw Error(ErrorKind::kInvalidArgument, "grid and geometry dimensions differ");
  if (static_cast<std::size_t>(pair.U.size()) != idx.size()) {
    throw Error(ErrorKind::kInvalidArgument, "eigenvector length does not match the index set");
  }
  ReconstructedField field;
  field.grid = grid;
  field.lambda = pair.lambda;
  field.frequencies = field_frequencies(geom, idx, pair.k);
  const Eigen::MatrixXd& W = field.frequencies;
  const Eigen::Index nf = W.rows();
  const int ne = grid.ext_side();
  const double h = grid.h;
  auto expi = [](double ph) { return cplx(std::cos(ph), std::sin(ph)); };

  if (grid.dim == 1) {
    // Point p = a * B + b; exp(i w r_p) = exp(i w (r_start + a B h)) exp(i w b h).
    const Eigen::Index B = static_cast<Eigen::Index>(std::ceil(std::sqrt(static_cast<double>(ne))));
    const Eigen::Index nA = (ne + B - 1) / B;
    const double r_start = grid.coordinate(0, -(grid.n + 1));
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(nA, B);
    for (Eigen::Index f0 = 0; f0 < nf; f0 += kFreqChunk) {
      const Eigen::Index fc = std::min(kFreqChunk, nf - f0);
      Eigen::MatrixXcd A(nA, fc);
      Eigen::MatrixXcd Bm(B, fc);
      for (Eigen::Index f = 0; f < fc; ++f) {
        const double w = W(f0 + f, 0);
        const cplx u = pair.U(f0 + f);
        for (Eigen::Index a = 0; a < nA; ++a) A(a, f) = u * expi(w * (r_start + a * B * h));
        for (Eigen::Index b = 0; b < B; ++b) Bm(b, f) = expi(w * b * h);
      }
      acc.noalias() += A * Bm.transpose();
    }
    field.values.resize(static_cast<std::size_t>(ne));
    for (int p = 0; p < ne; ++p) field.values[p] = acc(p / B, p % B);
  } else {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(ne, ne);
    for (Eigen::Index f0 = 0; f0 < nf; f0 += kFreqChunk) {
      const Eigen::Index fc = std::min(kFreqChunk, nf - f0);
      Eigen::MatrixXcd A(ne, fc);
      Eigen::MatrixXcd Bm(ne, fc);
      for (Eigen::Index f = 0; f < fc; ++f) {
        const double w0 = W(f0 + f, 0);
        const double w1 = W(f0 + f, 1);
        const cplx u = pair.U(f0 + f);
        for (int a = 0; a < ne; ++a) {
          A(a, f) = u * expi(w0 * grid.coordinate(0, a - (grid.n + 1)));
          Bm(a, f) = expi(w1 * grid.coordinate(1, a - (grid.n + 1)));
        }
      }
      acc.noalias() += A * Bm.transpose();
    }
    field.values.resize(static_cast<std::size_t>(ne) * ne);
    for (int a = 0; a < ne; ++a) {
      for (int b = 0; b < ne; ++b) field.values[static_cast<std::size_t>(a) * ne + b] = acc(a, b);
    }
  }
  return field;
}

std::vector<double> field_magnitude_snapshot(const ReconstructedField& field) {
  std::vector<double> out(field.values.size());
  std::transform(field.values.begin(), field.values.end(), out.begin(),
                 [](const cplx& v) { return std::abs(v); });
  return out;
}

}  // namespace qpspec
