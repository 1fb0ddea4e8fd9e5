// Scalar special functions and classical-distribution primitives (Student's t,
// normal, Snedecor F(1,nu)) used throughout the library.
//
// All functions are pure and reentrant. `nu` may be +infinity everywhere; the
// t primitives then reduce to their normal counterparts.

#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace skewt {

inline constexpr double kPi = 3.14159265358979323846;

// Above this the t distribution is numerically indistinguishable from the
// normal at double precision for every quantity we compute, and the
// incomplete-beta continued fraction becomes needlessly slow.
inline constexpr double kNuNormalThreshold = 1e7;

inline bool nu_is_normal_limit(double nu) { return nu >= kNuNormalThreshold; }

/// log Gamma(x) for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0))
    throw std::domain_error("log_gamma: argument must be positive, got " + std::to_string(x));
  return std::lgamma(x);
}

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

namespace detail {

// Continued fraction for the regularized incomplete beta, modified Lentz
// scheme (same recurrence as Numerical Recipes' betacf).
inline double ibeta_cf(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr double eps = 1e-16;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < tiny) d = tiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= 100000; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < tiny) d = tiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < eps) return h;
  }
  throw std::runtime_error("ibeta_cf: continued fraction failed to converge");
}

// I_x(a,b) where the complement of x is supplied explicitly so callers can
// avoid cancellation when x is near 1.
inline double ibeta_xc(double x, double one_minus_x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (one_minus_x <= 0.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log(one_minus_x) - log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * ibeta_cf(x, a, b) / a;
  return 1.0 - front * ibeta_cf(one_minus_x, b, a) / b;
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b) for a, b > 0, x in [0, 1].
inline double regularized_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::domain_error("regularized_incomplete_beta: a and b must be positive");
  if (!(x >= 0.0 && x <= 1.0))
    throw std::domain_error("regularized_incomplete_beta: x must lie in [0, 1]");
  return detail::ibeta_xc(x, 1.0 - x, a, b);
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi);
}

inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

namespace detail {

// Rational approximation of the probit function (Acklam's coefficients),
// polished below with one Halley step against erfc.
inline double probit_estimate(double p) {
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - plow) {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace detail

inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("normal_quantile: probability must lie in (0, 1)");
  double z = detail::probit_estimate(p);
  // Halley refinement: brings the estimate to full double precision.
  for (int i = 0; i < 2; ++i) {
    const double e = normal_cdf(z) - p;
    const double f = normal_pdf(z);
    if (f <= 0.0) break;
    const double u = e / f;
    z -= u / (1.0 + 0.5 * z * u);
  }
  return z;
}

/// Density of the classical Student's t on nu degrees of freedom.
inline double t_pdf(double z, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("t_pdf: nu must be positive");
  if (nu_is_normal_limit(nu)) return normal_pdf(z);
  if (std::isinf(z)) return 0.0;
  const double lg = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                    0.5 * std::log(nu * kPi) -
                    0.5 * (nu + 1.0) * std::log1p(z * z / nu);
  return std::exp(lg);
}

/// Distribution function of the classical Student's t.
inline double t_cdf(double z, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("t_cdf: nu must be positive");
  if (nu_is_normal_limit(nu)) return normal_cdf(z);
  if (z == 0.0) return 0.5;
  if (std::isinf(z)) return z > 0.0 ? 1.0 : 0.0;
  const double z2 = z * z;
  // Both branches feed ibeta with x and 1-x computed directly from z2 and nu,
  // so neither argument suffers cancellation.
  double tail;
  if (nu > 2.0 * z2) {
    const double x = z2 / (nu + z2);
    tail = 0.5 * (1.0 - detail::ibeta_xc(x, nu / (nu + z2), 0.5, 0.5 * nu));
  } else {
    const double x = nu / (nu + z2);
    tail = 0.5 * detail::ibeta_xc(x, z2 / (nu + z2), 0.5 * nu, 0.5);
  }
  return z > 0.0 ? 1.0 - tail : tail;
}

/// Quantile of the classical Student's t: z with t_cdf(z, nu) = p.
inline double t_quantile(double p, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("t_quantile: nu must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("t_quantile: probability must lie in (0, 1)");
  if (nu_is_normal_limit(nu)) return normal_quantile(p);
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -t_quantile(1.0 - p, nu);
  if (nu == 1.0) return std::tan(kPi * (p - 0.5));
  if (nu == 2.0) {
    const double s = 2.0 * p - 1.0;
    return s * std::sqrt(2.0 / (1.0 - s * s));
  }
  // p < 0.5, so the root is negative; expand a bracket leftward, bisect,
  // then polish with Newton (derivative is the density).
  double hi = 0.0;
  double lo = -1.0;
  while (t_cdf(lo, nu) > p) {
    lo *= 2.0;
    if (lo < -1e300) throw std::runtime_error("t_quantile: bracket expansion failed");
  }
  for (int i = 0; i < 90 && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (t_cdf(mid, nu) > p)
      hi = mid;
    else
      lo = mid;
  }
  double z = 0.5 * (lo + hi);
  for (int i = 0; i < 4; ++i) {
    const double e = t_cdf(z, nu) - p;
    const double f = t_pdf(z, nu);
    if (f <= 0.0) break;
    const double step = e / f;
    const double znew = z - step;
    if (znew <= lo || znew >= hi) break;
    z = znew;
    if (std::fabs(e) < 1e-14) break;
  }
  return z;
}

/// Quantile of Snedecor's F(1, nu). sqrt of this is the half-t quantile,
/// which is the boundary case delta = 1 of the skew-t.
inline double f1nu_quantile(double p, double nu) {
  if (!(nu > 0.0)) throw std::domain_error("f1nu_quantile: nu must be positive");
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("f1nu_quantile: probability must lie in (0, 1)");
  // If T ~ t(nu) then T^2 ~ F(1, nu): the p-quantile of |T| is the
  // (1+p)/2-quantile of T.
  const double q = t_quantile(0.5 * (1.0 + p), nu);
  return q * q;
}

}  // namespace skewt
