#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "bps/rng.hpp"

namespace bps::dlm {

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_contfrac(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

/// Regularized incomplete beta I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * beta_contfrac(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_front) * beta_contfrac(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// One-dimensional Student-t density with dof, location and squared scale.
template <typename Scalar>
struct StudentT {
  Scalar dof;
  Scalar loc;
  Scalar scale2;

  StudentT(Scalar dof_, Scalar loc_, Scalar scale2_) : dof(dof_), loc(loc_), scale2(scale2_) {
    if (!(dof > Scalar(0))) throw std::invalid_argument("StudentT: dof must be positive");
    if (!(scale2 > Scalar(0))) throw std::invalid_argument("StudentT: scale2 must be positive");
  }
};

using StudentTd = StudentT<double>;

/// log t(y | dof, loc, scale2); finite for all finite y.
template <typename Scalar>
Scalar log_pdf(const StudentT<Scalar>& dist, Scalar y) {
  const Scalar r = dist.dof;
  const Scalar d = y - dist.loc;
  return Scalar(-detail::log_beta(0.5, static_cast<double>(r) / 2.0)) -
         Scalar(0.5) * std::log(r * dist.scale2) -
         (r + Scalar(1)) / Scalar(2) * std::log1p(d * d / (r * dist.scale2));
}

inline double cdf(const StudentTd& dist, double y) {
  const double tau = (y - dist.loc) / std::sqrt(dist.scale2);
  const double x = dist.dof / (dist.dof + tau * tau);
  const double tail = 0.5 * detail::reg_inc_beta(dist.dof / 2.0, 0.5, x);
  return tau >= 0.0 ? 1.0 - tail : tail;
}

/// Draw through the scale-mixture representation:
/// sigma2 ~ IG(dof/2, dof/2), then y ~ N(loc, sigma2 * scale2).
inline double draw(const StudentTd& dist, rng::Engine& eng) {
  const double sigma2 = rng::draw_inverse_gamma(eng, dist.dof / 2.0, dist.dof / 2.0);
  return rng::draw_normal(eng, dist.loc, std::sqrt(sigma2 * dist.scale2));
}

/// Quantile by bisection on the cdf.
inline double quantile(const StudentTd& dist, double p, double prob_tol = 1e-12) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("quantile: p must lie in (0, 1)");
  const double scale = std::sqrt(dist.scale2);
  double lo = dist.loc - 8.0 * scale;
  double hi = dist.loc + 8.0 * scale;
  while (cdf(dist, lo) > p) lo = dist.loc + 2.0 * (lo - dist.loc);
  while (cdf(dist, hi) < p) hi = dist.loc + 2.0 * (hi - dist.loc);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double f = cdf(dist, mid);
    if (f < p) lo = mid; else hi = mid;
    if (std::fabs(f - p) < prob_tol && hi - lo < 1e-12 * (1.0 + std::fabs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace bps::dlm
