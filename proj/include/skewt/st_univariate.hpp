// Univariate skew-t distribution ST(xi, omega^2, lambda, nu): density, CDF,
// quantile, moments and random sampling.
//
// Standard-case density: 2 t(z; nu) T(lambda z sqrt((nu+1)/(nu+z^2)); nu+1).
// lambda = +-inf is the half-t boundary (delta = +-1); nu = inf is the
// skew-normal limit.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "skewt/detail/quadrature.hpp"
#include "skewt/detail/rng.hpp"
#include "skewt/detail/root_finding.hpp"
#include "skewt/special_functions.hpp"

namespace skewt {

struct StParams {
  double xi = 0.0;      // location
  double omega = 1.0;   // scale, > 0
  double lambda = 0.0;  // slant
  double nu = 1.0;      // degrees of freedom, > 0 (may be +inf)

  void validate() const {
    if (!(omega > 0.0)) throw std::domain_error("StParams: omega must be positive");
    if (!(nu > 0.0)) throw std::domain_error("StParams: nu must be positive");
    if (std::isnan(xi) || std::isnan(lambda))
      throw std::domain_error("StParams: xi and lambda must not be NaN");
  }
};

/// delta = lambda / sqrt(1 + lambda^2), in (-1, 1); +-1 at lambda = +-inf.
inline double delta_of_lambda(double lambda) {
  if (std::isinf(lambda)) return lambda > 0.0 ? 1.0 : -1.0;
  return lambda / std::sqrt(1.0 + lambda * lambda);
}

/// Inverse of delta_of_lambda. |delta| >= 1 is a domain error unless the
/// caller asks for the boundary representation lambda = +-inf.
inline double lambda_of_delta(double delta, bool allow_boundary = false) {
  if (std::fabs(delta) >= 1.0) {
    if (allow_boundary && std::fabs(delta) == 1.0)
      return delta > 0.0 ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity();
    throw std::domain_error("lambda_of_delta: |delta| must be < 1");
  }
  return delta / std::sqrt((1.0 - delta) * (1.0 + delta));
}

namespace detail {

// Standardized density, xi = 0, omega = 1.
inline double st_pdf_std(double z, double lambda, double nu) {
  if (std::isinf(lambda)) {
    // half-t: the distribution of sign(lambda) * |T|.
    if (lambda > 0.0) return z < 0.0 ? 0.0 : 2.0 * t_pdf(z, nu);
    return z > 0.0 ? 0.0 : 2.0 * t_pdf(z, nu);
  }
  if (lambda == 0.0) return t_pdf(z, nu);
  if (nu_is_normal_limit(nu))
    return 2.0 * normal_pdf(z) * normal_cdf(lambda * z);
  const double w = lambda * z * std::sqrt((nu + 1.0) / (nu + z * z));
  return 2.0 * t_pdf(z, nu) * t_cdf(w, nu + 1.0);
}

// Skew-normal CDF (the nu = inf limit); Gaussian tails make a fixed window
// sufficient.
inline double sn_cdf_std(double y, double lambda, double tol) {
  if (y <= -40.0) return 0.0;
  if (y >= 40.0) return 1.0;
  if (y > 0.0) {
    // reflection: F(y; lambda) = 1 - F(-y; -lambda)
    double c = 1.0 - sn_cdf_std(-y, -lambda, tol);
    return c < 0.0 ? 0.0 : c;
  }
  const double lo = -40.0;
  QuadResult q;
  double a = lo;
  // unit-width panels so the adaptive rule cannot overlook the density bump
  while (a < y) {
    const double b = std::min(a + 4.0, y);
    auto piece = integrate([&](double z) { return 2.0 * normal_pdf(z) * normal_cdf(lambda * z); },
                           a, b, tol / 16.0);
    q.value += piece.value;
    q.converged = q.converged && piece.converged;
    a = b;
  }
  if (!q.converged) throw std::runtime_error("sn_cdf_std: quadrature did not converge");
  return std::min(std::max(q.value, 0.0), 1.0);
}

// Standardized CDF for finite nu and finite nonzero lambda, y <= 0.
//
// Split off the left-tail limit of the perturbation factor:
//   F(y) = 2 T(-A; nu+1) T(y; nu) + I,
//   I = int_{-inf}^{y} 2 t(z; nu) [T(w(z); nu+1) - T(-A; nu+1)] dz,
// with A = lambda sqrt(nu+1) and w(z) = lambda z sqrt((nu+1)/(nu+z^2)).
// The correction integrand decays like |z|^-(nu+3), so geometrically growing
// panels with an analytic tail bound cover the heavy-tail regime down to
// nu = 0.3.
inline double st_cdf_neg_std(double y, double lambda, double nu, double tol) {
  const double A = lambda * std::sqrt(nu + 1.0);
  const double c0 = t_cdf(-A, nu + 1.0);
  const double t_peak = t_pdf(0.0, nu + 1.0);
  auto corr = [&](double z) {
    const double w = lambda * z * std::sqrt((nu + 1.0) / (nu + z * z));
    return 2.0 * t_pdf(z, nu) * (t_cdf(w, nu + 1.0) - c0);
  };
  double total = 2.0 * c0 * t_cdf(y, nu);
  const double h0 = 2.0 + std::sqrt(std::min(nu, 100.0));
  double hi = y;
  bool ok = true;
  for (int k = 0; k < 60; ++k) {
    const double lo = y - h0 * (std::exp2(k + 1) - 1.0);
    auto piece = integrate(corr, lo, hi, tol / 8.0);
    total += piece.value;
    ok = ok && piece.converged;
    hi = lo;
    // |T(w(z)) - T(-A)| <= t_peak * |w(z) + A| and |w(z) + A| <= |A| nu / (2 z^2)
    const double r2 = lo * lo;
    const double bound =
        2.0 * t_cdf(lo, nu) * std::min(1.0, t_peak * std::fabs(A) * nu / (2.0 * r2));
    if (bound < 0.25 * tol) break;
    if (k == 59) ok = false;
  }
  if (!ok) throw std::runtime_error("st_cdf: quadrature did not converge");
  return std::min(std::max(total, 0.0), 1.0);
}

inline double st_cdf_std(double y, double lambda, double nu, double tol = 1e-11) {
  if (std::isnan(y)) throw std::domain_error("st_cdf: y is NaN");
  if (std::isinf(y)) return y > 0.0 ? 1.0 : 0.0;
  if (lambda == 0.0) return t_cdf(y, nu);
  if (std::isinf(lambda)) {
    if (lambda > 0.0) return y <= 0.0 ? 0.0 : 2.0 * t_cdf(y, nu) - 1.0;
    return y >= 0.0 ? 1.0 : 2.0 * t_cdf(y, nu);
  }
  if (nu_is_normal_limit(nu)) return sn_cdf_std(y, lambda, tol);
  if (y > 0.0) return 1.0 - st_cdf_neg_std(-y, -lambda, nu, tol);
  return st_cdf_neg_std(y, lambda, nu, tol);
}

inline double st_quantile_std(double p, double lambda, double nu, double prob_tol = 1e-9) {
  if (!(p > 0.0 && p < 1.0))
    throw std::domain_error("st_quantile: probability must lie in (0, 1)");
  if (lambda == 0.0) return t_quantile(p, nu);
  if (std::isinf(lambda)) {
    // delta = 1: quantiles are square roots of the F(1, nu) quantiles.
    if (lambda > 0.0) return std::sqrt(f1nu_quantile(p, nu));
    return -std::sqrt(f1nu_quantile(1.0 - p, nu));
  }
  const bool normal_limit = nu_is_normal_limit(nu);
  // The density is bounded by twice the symmetric one, so
  //   2 T(y) - 1 <= F(y) <= 2 T(y)
  // brackets the quantile between the symmetric quantiles at p/2 and (1+p)/2.
  double lo = normal_limit ? normal_quantile(0.5 * p) : t_quantile(0.5 * p, nu);
  double hi = normal_limit ? normal_quantile(0.5 * (1.0 + p)) : t_quantile(0.5 * (1.0 + p), nu);
  auto g = [&](double y) { return st_cdf_std(y, lambda, nu) - p; };
  double flo = g(lo);
  double fhi = g(hi);
  // At extreme slant one envelope bound is tight and quadrature error can
  // put the endpoint a hair past the root; expand before giving up.
  for (int k = 0; flo > 0.0 && k < 80; ++k) {
    if (flo > 1e-5) throw std::runtime_error("st_quantile: bracket failure");
    lo -= std::max(1.0, std::fabs(lo));
    flo = g(lo);
  }
  for (int k = 0; fhi < 0.0 && k < 80; ++k) {
    if (fhi < -1e-5) throw std::runtime_error("st_quantile: bracket failure");
    hi += std::max(1.0, std::fabs(hi));
    fhi = g(hi);
  }
  if (flo > 0.0 || fhi < 0.0) throw std::runtime_error("st_quantile: bracket failure");
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  return find_root(g, lo, hi, flo, fhi, prob_tol, 1e-13);
}

}  // namespace detail

/// Density of ST(xi, omega^2, lambda, nu) at y.
inline double st_pdf(double y, const StParams& p) {
  p.validate();
  return detail::st_pdf_std((y - p.xi) / p.omega, p.lambda, p.nu) / p.omega;
}

/// P(Y <= y). Absolute error about 1e-10; throws on quadrature failure.
inline double st_cdf(double y, const StParams& p) {
  p.validate();
  return detail::st_cdf_std((y - p.xi) / p.omega, p.lambda, p.nu);
}

/// y with st_cdf(y, p) = prob, to about 1e-9 in probability.
inline double st_quantile(double prob, const StParams& p) {
  p.validate();
  return p.xi + p.omega * detail::st_quantile_std(prob, p.lambda, p.nu);
}

struct StMoments {
  std::optional<double> mean;             // defined for nu > 1
  std::optional<double> variance;         // defined for nu > 2
  std::optional<double> skewness;         // gamma1, defined for nu > 3
  std::optional<double> kurtosis_excess;  // gamma2, defined for nu > 4
};

/// b_nu = sqrt(nu) Gamma((nu-1)/2) / (sqrt(pi) Gamma(nu/2)), for nu > 1;
/// tends to sqrt(2/pi) as nu -> inf.
inline double st_bnu(double nu) {
  if (!(nu > 1.0)) throw std::domain_error("st_bnu: requires nu > 1");
  if (nu > 1e7) return std::sqrt(2.0 / kPi);
  return std::exp(0.5 * std::log(nu) + std::lgamma(0.5 * (nu - 1.0)) -
                  std::lgamma(0.5 * nu)) /
         std::sqrt(kPi);
}

inline StMoments st_moments(const StParams& p) {
  p.validate();
  StMoments m;
  const double nu = p.nu;
  if (!(nu > 1.0)) return m;
  const double d = delta_of_lambda(p.lambda);
  const double b = st_bnu(nu);
  const double bd = b * d;
  m.mean = p.xi + p.omega * bd;
  if (!(nu > 2.0)) return m;
  const bool inf_nu = std::isinf(nu);
  const double r2 = inf_nu ? 1.0 : nu / (nu - 2.0);       // E Z0^2 of the symmetric base
  const double s2z = r2 - bd * bd;
  m.variance = p.omega * p.omega * s2z;
  if (!(nu > 3.0)) return m;
  const double r3 = inf_nu ? (3.0 - d * d) : nu * (3.0 - d * d) / (nu - 3.0);
  const double sz = std::sqrt(s2z);
  m.skewness = bd * (r3 - 3.0 * r2 + 2.0 * bd * bd) / (sz * sz * sz);
  if (!(nu > 4.0)) return m;
  const double r4 = inf_nu ? 3.0 : 3.0 * nu * nu / ((nu - 2.0) * (nu - 4.0));
  m.kurtosis_excess =
      (r4 - 4.0 * bd * bd * r3 + 6.0 * bd * bd * r2 - 3.0 * bd * bd * bd * bd) /
          (s2z * s2z) -
      3.0;
  return m;
}

/// n i.i.d. draws, deterministic for a given seed. Stochastic representation:
/// Z = X / sqrt(V/nu) with X skew-normal with slant lambda and V ~ chi^2_nu.
inline std::vector<double> st_sample(std::size_t n, const StParams& p, std::uint64_t seed) {
  p.validate();
  std::vector<double> out;
  out.reserve(n);
  detail::Rng rng(seed);
  const double d = delta_of_lambda(p.lambda);
  const double s = std::sqrt((1.0 - d) * (1.0 + d));
  const bool inf_nu = std::isinf(p.nu) || p.nu >= kNuNormalThreshold;
  for (std::size_t i = 0; i < n; ++i) {
    const double u0 = rng.normal();
    const double u1 = rng.normal();
    const double x = d * std::fabs(u0) + s * u1;
    const double v = inf_nu ? 1.0 : rng.chi_squared(p.nu) / p.nu;
    out.push_back(p.xi + p.omega * x / std::sqrt(v));
  }
  return out;
}

}  // namespace skewt
