// SPDX-License-Identifier: Apache-2.0
#include "qpspec/transfer_diag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qpspec/error.hpp"

namespace qpspec {

using cd = std::complex<double>;

Eigen::Matrix2d ScalarSymplecticPair::M() const {
  Eigen::Matrix2d m;
  m << a, 0.0, t, -1.0;
  return m;
}

Eigen::Matrix2d ScalarSymplecticPair::L() const {
  Eigen::Matrix2d l;
  l << -s, 1.0, a, 0.0;
  return l;
}

Eigen::Matrix2d ScalarSymplecticPair::transfer(double floor) const {
  if (!(std::abs(a) >= floor)) {
    throw Error(ErrorKind::kNearSingularCoalesce, "L is singular: |a| below floor");
  }
  Eigen::Matrix2d g;
  g << t / a, -1.0 / a, a + s * t / a, -s / a;
  return g;
}

ScalarSymplecticPair step_pair(double s_i) { return ScalarSymplecticPair{1.0, 0.0, s_i}; }

ScalarSymplecticPair coalesce(const ScalarSymplecticPair& p1, const ScalarSymplecticPair& p2,
                              double floor) {
  const double d = p2.t - p1.s;
  if (!(std::abs(d) >= floor)) {
    throw Error(ErrorKind::kNearSingularCoalesce, "coalesce: |t2 - s1| below floor");
  }
  ScalarSymplecticPair out;
  out.t = p1.t - p1.a * p1.a / d;
  out.s = p2.s + p2.a * p2.a / d;
  out.a = p2.a * p1.a / d;
  return out;
}

ScalarSymplecticPair coalesce_chain(const std::vector<ScalarSymplecticPair>& chain, double floor) {
  if (chain.empty()) throw Error(ErrorKind::kInvalidArgument, "coalesce: empty chain");
  ScalarSymplecticPair acc = chain.front();
  for (std::size_t i = 1; i < chain.size(); ++i) acc = coalesce(acc, chain[i], floor);
  return acc;
}

RatioSequence ratio_sequence_from_samples(const std::vector<cd>& u, double floor) {
  RatioSequence seq;
  seq.source = "samples";
  if (u.size() < 2) return seq;
  double umax = 0.0;
  for (const auto& v : u) umax = std::max(umax, std::abs(v));
  const double cut = floor * umax;
  seq.y.assign(u.size() - 1, cd(0.0, 0.0));
  seq.valid.assign(u.size() - 1, false);
  for (std::size_t i = 0; i + 1 < u.size(); ++i) {
    if (std::abs(u[i]) <= cut || std::abs(u[i + 1]) <= cut) {
      ++seq.gaps;
      continue;
    }
    seq.y[i] = u[i + 1] / u[i];
    seq.valid[i] = true;
  }
  return seq;
}

RatioSequence ratio_sequence_from_recurrence(const std::vector<cd>& s, cd y0) {
  RatioSequence seq;
  seq.source = "recurrence";
  seq.y.reserve(s.size());
  cd prev = y0;
  for (const auto& si : s) {
    prev = si - 1.0 / prev;
    seq.y.push_back(prev);
    seq.valid.push_back(std::isfinite(prev.real()) && std::isfinite(prev.imag()));
  }
  return seq;
}

FivePointRatios five_point_ratios(const std::vector<cd>& ext, int n, double h, double rho,
                                  const std::vector<double>& eps_inner) {
  const int ne = 2 * n + 3;
  const int ni = 2 * n + 1;
  if (ext.size() != static_cast<std::size_t>(ne) * ne ||
      eps_inner.size() != static_cast<std::size_t>(ni) * ni) {
    throw Error(ErrorKind::kInvalidArgument, "five-point ratios: size mismatch");
  }
  auto u = [&](int a, int b) { return ext[static_cast<std::size_t>(a) * ne + b]; };
  FivePointRatios r;
  r.side = ni;
  r.y.resize(static_cast<std::size_t>(ni) * ni);
  r.z.resize(static_cast<std::size_t>(ni) * ni);
  for (int a = 1; a <= ni; ++a) {
    for (int b = 1; b <= ni; ++b) {
      const cd c = u(a, b);
      const std::size_t s = static_cast<std::size_t>(a - 1) * ni + (b - 1);
      if (std::abs(c) == 0.0) continue;
      const cd y = u(a + 1, b) / c;
      const cd y_prev_inv = u(a - 1, b) / c;  // 1 / y_{i-1,j}
      const cd z = u(a, b + 1) / c;
      const cd z_prev_inv = u(a, b - 1) / c;
      r.y[s] = y;
      r.z[s] = z;
      const double s_ij = 0.5 * (4.0 - h * h * rho * eps_inner[s]);
      r.sum_residual = std::max(r.sum_residual, std::abs(y + y_prev_inv + z + z_prev_inv - 2.0 * s_ij));
      r.row_imbalance = std::max(r.row_imbalance, std::abs(y + y_prev_inv - s_ij));
      r.col_imbalance = std::max(r.col_imbalance, std::abs(z + z_prev_inv - s_ij));
    }
  }
  return r;
}

const char* to_string(RatioRegime r) {
  switch (r) {
    case RatioRegime::kBoundedST: return "bounded-s-t";
    case RatioRegime::kLargeST: return "large-s-t";
    case RatioRegime::kSmallST: return "small-s-t";
    case RatioRegime::kOutside: return "outside";
  }
  return "outside";
}

StabilityReport stability_report(const ScalarSymplecticPair& p, cd u1, double eta) {
  StabilityReport rep;
  const double mag = std::max({std::abs(p.a), std::abs(p.s), std::abs(p.t), 1.0});
  rep.eta = eta > 0.0 ? eta : std::sqrt(std::numeric_limits<double>::epsilon()) * mag;
  const double as = std::abs(p.s);
  const double at = std::abs(p.t);
  // "Same order" and "O(x)" both mean within a factor of 10.
  rep.small_a = std::abs(p.a) <= 10.0 * rep.eta;
  rep.same_order = std::max(as, at) <= 10.0 * std::min(as, at);
  if (rep.same_order) {
    const double m = std::sqrt(as * at);
    if (m <= 10.0 * rep.eta) {
      rep.regime = RatioRegime::kSmallST;
    } else if (m * rep.eta >= 0.1) {
      rep.regime = RatioRegime::kLargeST;
    } else if (rep.small_a) {
      rep.regime = RatioRegime::kBoundedST;
    }
  }
  const cd den = p.t * u1 - 1.0;
  rep.degenerate = std::abs(den) <= 1e-12 * std::max(1.0, std::abs(p.t * u1));
  if (!rep.degenerate) {
    rep.predicted_ratio = p.s + p.a * p.a * u1 / den;
    const double r = std::abs(rep.predicted_ratio);
    rep.order_one = r >= 1e-3 && r <= 1e3;
  }
  return rep;
}

}  // namespace qpspec
