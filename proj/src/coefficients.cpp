// SPDX-License-Identifier: Apache-2.0
#include "qpspec/coefficients.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "fft.hpp"
#include "qpspec/error.hpp"

namespace qpspec {

namespace {

double trig_sum(const std::vector<TrigTerm>& terms, const double* theta) {
  double acc = 0.0;
  for (const auto& term : terms) {
    double arg = 0.0;
    for (std::size_t m = 0; m < term.index.size(); ++m) arg += term.index[m] * theta[m];
    acc += term.amp * (term.is_sine ? std::sin(arg) : std::cos(arg));
  }
  return acc;
}

void check_terms(const std::vector<TrigTerm>& terms, int dim) {
  for (const auto& term : terms) {
    if (static_cast<int>(term.index.size()) != dim) {
      throw Error(ErrorKind::kInvalidArgument, "trig term index length must equal dimension " +
                                                   std::to_string(dim));
    }
  }
}

}  // namespace

PeriodicCoefficient::PeriodicCoefficient(Form form, int dim, Eigen::VectorXd periods)
    : form_(std::move(form)), dim_(dim), periods_(std::move(periods)) {
  if (dim_ < 1 || dim_ > kMaxDim || periods_.size() != dim_) {
    throw Error(ErrorKind::kInvalidArgument, "coefficient dimension and periods disagree");
  }
  for (int m = 0; m < dim_; ++m) {
    if (!(periods_(m) > 0.0)) throw Error(ErrorKind::kInvalidArgument, "periods must be positive");
  }
  if (const auto* t = std::get_if<TrigSumCoefficient>(&form_)) check_terms(t->terms, dim_);
  if (const auto* e = std::get_if<ExpTrigCoefficient>(&form_)) {
    check_terms(e->inner, dim_);
    check_terms(e->outer, dim_);
  }
  if (const auto* tp = std::get_if<TwoPhaseCoefficient>(&form_)) {
    if (!(tp->tau >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "smoothing width must be >= 0");
  }
}

PeriodicCoefficient PeriodicCoefficient::constant(double c, const Eigen::VectorXd& periods) {
  return PeriodicCoefficient(ConstantCoefficient{c}, static_cast<int>(periods.size()), periods);
}

double PeriodicCoefficient::operator()(const double* x, EvalInfo* info) const {
  double theta[kMaxDim];
  for (int m = 0; m < dim_; ++m) theta[m] = 2.0 * std::numbers::pi * x[m] / periods_(m);
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, ConstantCoefficient>) {
          return f.value;
        } else if constexpr (std::is_same_v<F, TrigSumCoefficient>) {
          return f.offset + trig_sum(f.terms, theta);
        } else if constexpr (std::is_same_v<F, ExpTrigCoefficient>) {
          return f.offset + std::exp(trig_sum(f.inner, theta)) + trig_sum(f.outer, theta);
        } else {
          double phi = 0.0;
          for (int m = 0; m < dim_; ++m) phi += std::cos(theta[m]);
          const double diff = phi - f.threshold;
          if (f.tau == 0.0) return diff > 0.0 ? f.eps_b : f.eps_a;
          double g2 = 0.0;
          for (int m = 0; m < dim_; ++m) {
            const double g = std::sin(theta[m]) * 2.0 * std::numbers::pi / periods_(m);
            g2 += g * g;
          }
          const double gn = std::sqrt(g2);
          double d;
          if (gn < 1e-12) {
            d = diff;
            if (info) ++info->degenerate_gradient;
          } else {
            d = diff / gn;
          }
          return 0.5 * (f.eps_a + f.eps_b) + 0.5 * (f.eps_b - f.eps_a) * std::tanh(d / f.tau);
        }
      },
      form_);
}

PeriodicCoefficient PeriodicCoefficient::sharp() const {
  const auto* tp = std::get_if<TwoPhaseCoefficient>(&form_);
  if (!tp) return *this;
  TwoPhaseCoefficient s = *tp;
  s.tau = 0.0;
  return PeriodicCoefficient(s, dim_, periods_);
}

std::string PeriodicCoefficient::kind_name() const {
  switch (form_.index()) {
    case 0: return "constant";
    case 1: return "trig-sum";
    case 2: return "exp-trig";
    default: {
      const auto& tp = std::get<TwoPhaseCoefficient>(form_);
      return tp.tau > 0.0 ? "two-phase-smoothed" : "two-phase";
    }
  }
}

PeriodicCoefficient tanh_smooth(const PeriodicCoefficient& coeff, double tau) {
  const auto* tp = std::get_if<TwoPhaseCoefficient>(&coeff.form());
  if (!tp) throw Error(ErrorKind::kInvalidArgument, "tanh smoothing needs a two-phase coefficient");
  if (!(tau > 0.0)) throw Error(ErrorKind::kInvalidArgument, "smoothing width must be positive");
  TwoPhaseCoefficient s = *tp;
  s.tau = tau;
  return PeriodicCoefficient(s, coeff.dim(), coeff.periods());
}

double evaluate_physical(const PeriodicCoefficient& coeff, const ProjectionGeometry& geom,
                         const Eigen::VectorXd& r, EvalInfo* info) {
  const Eigen::VectorXd x = project_point(geom, r);
  return coeff(x.data(), info);
}

cplx FourierCoefficientGrid::at(const MultiIndex& mi) const {
  const std::size_t L = static_cast<std::size_t>(2 * N);
  std::size_t pos = 0;
  for (int m = 0; m < dim; ++m) {
    if (mi[m] < -N || mi[m] >= N) return cplx(0.0, 0.0);
    pos = pos * L + static_cast<std::size_t>(mi[m] + N);
  }
  return values[pos];
}

namespace {

void hermitian_average(FourierCoefficientGrid& g) {
  const FourierIndexSet idx(g.N, g.periods);
  std::vector<cplx> out = g.values;
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    MultiIndex mi = idx.multi_index(pos);
    MultiIndex neg{0, 0, 0, 0};
    for (int m = 0; m < g.dim; ++m) neg[m] = -mi[m];
    if (!idx.contains(neg)) continue;
    out[pos] = 0.5 * (g.values[pos] + std::conj(g.values[idx.position(neg)]));
  }
  g.values = std::move(out);
}

}  // namespace

FourierCoefficientGrid sample_to_fourier(const PeriodicCoefficient& coeff, int N,
                                         const ProjectionGeometry& geom, int oversample) {
  if (N < 1) throw Error(ErrorKind::kInvalidArgument, "truncation N must be >= 1");
  if (oversample < 1) throw Error(ErrorKind::kInvalidArgument, "oversampling factor must be >= 1");
  if (coeff.dim() != geom.d_high) {
    throw Error(ErrorKind::kInvalidArgument, "coefficient dimension does not match geometry");
  }
  const int d = geom.d_high;
  const int L = 2 * N * oversample;
  std::size_t total = 1;
  for (int m = 0; m < d; ++m) total *= static_cast<std::size_t>(L);

  std::vector<cplx> buf(total);
  EvalInfo info;
  double vmin = std::numeric_limits<double>::infinity();
  double sum = 0.0;
  double sum_sq = 0.0;
  double x[kMaxDim];
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t rem = p;
    for (int m = d - 1; m >= 0; --m) {
      x[m] = static_cast<double>(rem % L) * geom.T(m) / L;
      rem /= L;
    }
    double v;
    try {
      v = coeff(x, &info);
    } catch (const std::exception& e) {
      std::ostringstream os;
      os << "coefficient evaluation failed at torus point (";
      for (int m = 0; m < d; ++m) os << (m ? ", " : "") << x[m];
      os << "): " << e.what();
      throw Error(ErrorKind::kInvalidCoefficient, os.str());
    }
    if (!std::isfinite(v)) {
      std::ostringstream os;
      os << "coefficient is not finite at torus point (";
      for (int m = 0; m < d; ++m) os << (m ? ", " : "") << x[m];
      os << ")";
      throw Error(ErrorKind::kInvalidCoefficient, os.str());
    }
    buf[p] = v;
    vmin = std::min(vmin, v);
    sum += v;
    sum_sq += v * v;
  }
  detail::fft_inplace(buf, L, d, -1);

  FourierCoefficientGrid g;
  g.N = N;
  g.dim = d;
  g.periods = geom.T;
  g.real = true;
  g.degenerate_gradient = info.degenerate_gradient;
  g.sample_min = vmin;
  g.sample_mean = sum / static_cast<double>(total);
  g.sample_mean_sq = sum_sq / static_cast<double>(total);
  const FourierIndexSet idx(N, geom.T);
  g.values.resize(idx.size());
  const double scale = 1.0 / static_cast<double>(total);
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    const MultiIndex mi = idx.multi_index(pos);
    std::size_t bin = 0;
    for (int m = 0; m < d; ++m) bin = bin * L + static_cast<std::size_t>((mi[m] + L) % L);
    g.values[pos] = buf[bin] * scale;
  }
  hermitian_average(g);
  return g;
}

FourierCoefficientGrid grid_from_values(int N, const Eigen::VectorXd& periods,
                                        std::vector<cplx> values, bool real) {
  const FourierIndexSet idx(N, periods);
  if (values.size() != idx.size()) {
    throw Error(ErrorKind::kInvalidArgument, "coefficient grid has the wrong number of values");
  }
  FourierCoefficientGrid g;
  g.N = N;
  g.dim = static_cast<int>(periods.size());
  g.periods = periods;
  g.values = std::move(values);
  g.real = real;
  if (real) hermitian_average(g);
  return g;
}

ShellSpectrum shell_rms(const FourierCoefficientGrid& grid) {
  const FourierIndexSet idx(grid.N, grid.periods);
  ShellSpectrum s;
  s.amplitude.assign(grid.N + 1, 0.0);
  s.count.assign(grid.N + 1, 0);
  for (std::size_t pos = 0; pos < idx.size(); ++pos) {
    const MultiIndex mi = idx.multi_index(pos);
    int q = 0;
    for (int m = 0; m < grid.dim; ++m) q = std::max(q, std::abs(mi[m]));
    s.amplitude[q] += std::norm(grid.values[pos]);
    ++s.count[q];
  }
  for (int q = 0; q <= grid.N; ++q) {
    s.amplitude[q] = s.count[q] ? std::sqrt(s.amplitude[q] / s.count[q]) : 0.0;
  }
  return s;
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
  if (!is) throw Error(ErrorKind::kIo, "truncated sidecar '" + path + "'");
  return v;
}

}  // namespace

void write_grid(const std::string& path, const FourierCoefficientGrid& grid) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::kIo, "cannot open '" + path + "' for writing");
  os.write("QPFG", 4);
  put<std::uint32_t>(os, 1);
  put<std::int32_t>(os, grid.N);
  put<std::int32_t>(os, grid.dim);
  for (int m = 0; m < grid.dim; ++m) put<double>(os, grid.periods(m));
  for (const auto& v : grid.values) {
    put<double>(os, v.real());
    put<double>(os, v.imag());
  }
  if (!os) throw Error(ErrorKind::kIo, "write failed for '" + path + "'");
}

FourierCoefficientGrid read_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::kIo, "cannot open '" + path + "'");
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "QPFG", 4) != 0) {
    throw Error(ErrorKind::kIo, "'" + path + "' is not a coefficient grid sidecar");
  }
  if (get<std::uint32_t>(is, path) != 1) throw Error(ErrorKind::kIo, "unsupported sidecar version");
  FourierCoefficientGrid g;
  g.N = get<std::int32_t>(is, path);
  g.dim = get<std::int32_t>(is, path);
  if (g.N < 1 || g.dim < 1 || g.dim > kMaxDim) throw Error(ErrorKind::kIo, "corrupt sidecar header");
  g.periods.resize(g.dim);
  for (int m = 0; m < g.dim; ++m) g.periods(m) = get<double>(is, path);
  const FourierIndexSet idx(g.N, g.periods);
  g.values.resize(idx.size());
  for (auto& v : g.values) {
    const double re = get<double>(is, path);
    const double im = get<double>(is, path);
    v = cplx(re, im);
  }
  return g;
}

}  // namespace qpspec
