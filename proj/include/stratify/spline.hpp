#pragma once

// Clamped B-spline bases for the additive models.
//
// Each continuous feature gets a cubic B-spline basis with interior knots at
// training quantiles. The first basis function is dropped so that the
// per-feature smooth and the model intercept are identifiable. Roughness is
// measured by divided differences of the coefficients over the Greville
// abscissae; their null space for order 2 is exactly the straight lines, so a
// heavily penalized smooth collapses to a linear term in the feature. Beyond
// the boundary knots each smooth continues as the tangent line of its
// boundary polynomial.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "stratify/core.hpp"

namespace stratify {

struct FeatureBasis {
  bool linear = true;          // single linear column (binary or near-constant features)
  std::vector<double> knots;   // distinct breakpoints, boundaries included
  int degree = 3;
  int penalty_order = 2;

  int num_splines() const { return static_cast<int>(knots.size()) + degree - 1; }
  int columns() const { return linear ? 1 : num_splines() - 1; }

  friend bool operator==(const FeatureBasis&, const FeatureBasis&) = default;
};

using BasisSpec = std::vector<FeatureBasis>;

struct BasisOptions {
  int degree = 3;
  int interior_knots = 10;
  int penalty_order = 2;
};

inline int basis_columns(const BasisSpec& spec) {
  int c = 0;
  for (const auto& f : spec) c += f.columns();
  return c;
}

/// Type-7 (linear interpolation) quantile of sorted data.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline BasisSpec make_basis(const Dataset& data, const BasisOptions& opt = {}) {
  if (data.empty()) throw Error("cannot build a basis from an empty dataset");
  BasisSpec spec;
  for (std::size_t j = 0; j < data.schema().size(); ++j) {
    FeatureBasis fb;
    fb.degree = opt.degree;
    fb.penalty_order = opt.penalty_order;
    if (data.schema()[j].kind == FeatureKind::continuous) {
      std::vector<double> v;
      v.reserve(data.size());
      for (const auto& r : data.records()) v.push_back(r.values[j]);
      std::sort(v.begin(), v.end());
      const double lo = v.front(), hi = v.back();
      std::size_t distinct = v.empty() ? 0 : 1;
      for (std::size_t i = 1; i < v.size(); ++i) distinct += v[i] != v[i - 1];
      // Too few distinct values to support a cubic: keep the feature linear.
      if (distinct >= static_cast<std::size_t>(opt.degree + 2)) {
        const double eps = 1e-9 * (hi - lo);
        std::vector<double> knots{lo};
        for (int i = 1; i <= opt.interior_knots; ++i) {
          const double q = quantile_sorted(v, static_cast<double>(i) / (opt.interior_knots + 1));
          if (q > knots.back() + eps && q < hi - eps) knots.push_back(q);
        }
        knots.push_back(hi);
        if (static_cast<int>(knots.size()) >= opt.degree + 2) {
          fb.linear = false;
          fb.knots = std::move(knots);
        }
      }
    }
    spec.push_back(std::move(fb));
  }
  return spec;
}

namespace detail {

inline std::vector<double> clamped_knot_vector(const FeatureBasis& fb) {
  std::vector<double> t;
  t.insert(t.end(), static_cast<std::size_t>(fb.degree), fb.knots.front());
  t.insert(t.end(), fb.knots.begin(), fb.knots.end());
  t.insert(t.end(), static_cast<std::size_t>(fb.degree), fb.knots.back());
  return t;
}

/// Values of all B-splines of degree `p` on knot vector `t` at x in [t_front, t_back].
inline std::vector<double> bspline_values(const std::vector<double>& t, int p, double x) {
  const std::size_t m = t.size() - 1;  // number of degree-0 pieces
  std::vector<double> b(m, 0.0);
  if (x >= t.back()) {
    std::size_t i = m;
    while (i > 0 && !(t[i - 1] < t[i])) --i;
    b[i - 1] = 1.0;
  } else {
    for (std::size_t i = 0; i < m; ++i)
      if (t[i] <= x && x < t[i + 1]) {
        b[i] = 1.0;
        break;
      }
  }
  for (int d = 1; d <= p; ++d) {
    for (std::size_t i = 0; i + d < m; ++i) {
      const double den1 = t[i + static_cast<std::size_t>(d)] - t[i];
      const double den2 = t[i + static_cast<std::size_t>(d) + 1] - t[i + 1];
      const double a = den1 > 0.0 ? (x - t[i]) / den1 * b[i] : 0.0;
      const double c = den2 > 0.0 ? (t[i + static_cast<std::size_t>(d) + 1] - x) / den2 * b[i + 1] : 0.0;
      b[i] = a + c;
    }
  }
  b.resize(t.size() - static_cast<std::size_t>(p) - 1);
  return b;
}

inline std::vector<double> bspline_derivatives(const std::vector<double>& t, int p, double x) {
  const std::size_t k = t.size() - static_cast<std::size_t>(p) - 1;
  std::vector<double> lower = bspline_values(t, p - 1, x);
  std::vector<double> d(k, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double den1 = t[i + static_cast<std::size_t>(p)] - t[i];
    const double den2 = t[i + static_cast<std::size_t>(p) + 1] - t[i + 1];
    const double a = den1 > 0.0 ? lower[i] / den1 : 0.0;
    const double c = den2 > 0.0 && i + 1 < lower.size() ? lower[i + 1] / den2 : 0.0;
    d[i] = p * (a - c);
  }
  return d;
}

}  // namespace detail

/// All B-spline values (first one included) with linear extrapolation outside the knot span.
inline std::vector<double> spline_row(const FeatureBasis& fb, double x) {
  const auto t = detail::clamped_knot_vector(fb);
  const double lo = fb.knots.front(), hi = fb.knots.back();
  if (x >= lo && x <= hi) return detail::bspline_values(t, fb.degree, x);
  const double edge = x < lo ? lo : hi;
  auto v = detail::bspline_values(t, fb.degree, edge);
  const auto dv = detail::bspline_derivatives(t, fb.degree, edge);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += (x - edge) * dv[i];
  return v;
}

inline std::vector<double> greville_abscissae(const FeatureBasis& fb) {
  const auto t = detail::clamped_knot_vector(fb);
  const int k = fb.num_splines();
  std::vector<double> xi(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) {
    double s = 0.0;
    for (int j = 1; j <= fb.degree; ++j) s += t[static_cast<std::size_t>(i + j)];
    xi[static_cast<std::size_t>(i)] = s / fb.degree;
  }
  return xi;
}

/// Design-matrix columns for one record.
inline void append_design_row(const BasisSpec& spec, std::span<const double> values, std::vector<double>& out) {
  for (std::size_t j = 0; j < spec.size(); ++j) {
    if (spec[j].linear) {
      out.push_back(values[j]);
    } else {
      const auto row = spline_row(spec[j], values[j]);
      out.insert(out.end(), row.begin() + 1, row.end());
    }
  }
}

/// Roughness penalty of one feature over its retained columns.
inline Eigen::MatrixXd feature_penalty(const FeatureBasis& fb) {
  if (fb.linear) return Eigen::MatrixXd::Zero(1, 1);
  const int k = fb.num_splines();
  const auto xi = greville_abscissae(fb);
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(k, k);
  for (int r = 1; r <= fb.penalty_order; ++r) {
    Eigen::MatrixXd next(d.rows() - 1, k);
    for (Eigen::Index j = 0; j + 1 < d.rows(); ++j) {
      const double span = (xi[static_cast<std::size_t>(j + r)] - xi[static_cast<std::size_t>(j)]) / r;
      next.row(j) = (d.row(j + 1) - d.row(j)) / span;
    }
    d = std::move(next);
  }
  const Eigen::MatrixXd s = d.transpose() * d;
  return s.bottomRightCorner(k - 1, k - 1);
}

/// Block-diagonal penalty over all basis columns (intercept excluded).
inline Eigen::MatrixXd basis_penalty(const BasisSpec& spec) {
  const int p = basis_columns(spec);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(p, p);
  int at = 0;
  for (const auto& fb : spec) {
    const int c = fb.columns();
    s.block(at, at, c, c) = feature_penalty(fb);
    at += c;
  }
  return s;
}

}  // namespace stratify
