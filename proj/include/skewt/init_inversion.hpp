// Inversion of the quantile summary (q2, dq, G, M) to preliminary skew-t
// parameter estimates: nu from the Moors measure through a monotone spline
// of 1/nu, lambda from the Galton-Bowley measure through the tabulated
// eta coefficients, then scale and location from the quartiles.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "skewt/inversion_table.hpp"
#include "skewt/lad_regression.hpp"
#include "skewt/quantile_measures.hpp"
#include "skewt/st_univariate.hpp"

namespace skewt {

enum class InitMethod { kM0, kM1, kM3 };

inline const char* to_string(InitMethod m) {
  switch (m) {
    case InitMethod::kM0: return "M0";
    case InitMethod::kM1: return "M1";
    case InitMethod::kM3: return "M3";
  }
  return "?";
}

struct PreliminaryEstimate {
  Eigen::VectorXd beta;  // location coefficients; size 1 means a plain location
  double omega = 1.0;
  double lambda = 0.0;
  double nu = 10.0;
  InitMethod method = InitMethod::kM1;
  bool m_clamped = false;  // Moors measure left the invertible range
  bool g_clamped = false;  // |G| >= 1 was clamped to 0.99

  StParams location_params() const {
    if (beta.size() != 1)
      throw std::logic_error("PreliminaryEstimate: not a plain-location estimate");
    return StParams{beta[0], omega, lambda, nu};
  }
};

namespace detail {

// Monotone piecewise-cubic interpolant (Fritsch-Butland slopes, the usual
// PCHIP construction) through knots with strictly increasing x.
class PchipInterpolant {
 public:
  PchipInterpolant(std::vector<double> x, std::vector<double> y)
      : x_(std::move(x)), y_(std::move(y)), m_(x_.size(), 0.0) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
      throw std::invalid_argument("PchipInterpolant: need matching knots, at least two");
    std::vector<double> h(n - 1), d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
      h[i] = x_[i + 1] - x_[i];
      if (!(h[i] > 0.0)) throw std::invalid_argument("PchipInterpolant: x must increase");
      d[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
      if (d[i - 1] == 0.0 || d[i] == 0.0 || (d[i - 1] > 0.0) != (d[i] > 0.0)) {
        m_[i] = 0.0;
      } else {
        const double w1 = 2.0 * h[i] + h[i - 1];
        const double w2 = h[i] + 2.0 * h[i - 1];
        m_[i] = (w1 + w2) / (w1 / d[i - 1] + w2 / d[i]);
      }
    }
    m_[0] = edge_slope(h[0], h[1 < n - 1 ? 1 : 0], d[0], d[1 < n - 1 ? 1 : 0]);
    m_[n - 1] = edge_slope(h[n - 2], h[n - 2 > 0 ? n - 3 : 0], d[n - 2],
                           d[n - 2 > 0 ? n - 3 : 0]);
  }

  double operator()(double x) const {
    const std::size_t n = x_.size();
    if (x <= x_.front()) return y_.front() + m_.front() * (x - x_.front());
    if (x >= x_.back()) return y_.back() + m_.back() * (x - x_.back());
    std::size_t lo = 0, hi = n - 1;
    while (hi - lo > 1) {
      const std::size_t mid = (lo + hi) / 2;
      (x_[mid] <= x ? lo : hi) = mid;
    }
    const double h = x_[lo + 1] - x_[lo];
    const double t = (x - x_[lo]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return y_[lo] * (2.0 * t3 - 3.0 * t2 + 1.0) + h * m_[lo] * (t3 - 2.0 * t2 + t) +
           y_[lo + 1] * (-2.0 * t3 + 3.0 * t2) + h * m_[lo + 1] * (t3 - t2);
  }

 private:
  // One-sided three-point slope, clipped to keep the interpolant monotone.
  static double edge_slope(double h0, double h1, double d0, double d1) {
    double m = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (m * d0 <= 0.0)
      m = 0.0;
    else if ((d0 > 0.0) != (d1 > 0.0) && std::fabs(m) > 3.0 * std::fabs(d0))
      m = 3.0 * d0;
    return m;
  }

  std::vector<double> x_, y_, m_;
};

inline const PchipInterpolant& inv_nu_spline() {
  static const PchipInterpolant spline = [] {
    // knots ascending in the Moors measure; values are 1/nu
    std::vector<double> m, inv;
    for (auto it = kInversionTable.rbegin(); it != kInversionTable.rend(); ++it) {
      m.push_back(it->m0);
      inv.push_back(std::isinf(it->nu) ? 0.0 : 1.0 / it->nu);
    }
    return PchipInterpolant(std::move(m), std::move(inv));
  }();
  return spline;
}

}  // namespace detail

struct NuEstimate {
  double nu = 10.0;
  bool clamped = false;
};

/// nu from the Moors measure: evaluate the monotone interpolant of 1/nu
/// against the tabulated Moors-at-delta-0 knots, then take the reciprocal.
/// Values below the nu = inf knot clamp to 100 (a finite stand-in keeping
/// downstream starts interior); values above the nu = 0.30 knot clamp there.
inline NuEstimate nu_from_moors(double m_tilde) {
  if (!(m_tilde > 0.0)) throw std::domain_error("nu_from_moors: measure must be positive");
  const double m_lo = kInversionTable.back().m0;    // 1.233, nu = inf
  const double m_hi = kInversionTable.front().m0;   // 9.946, nu = 0.30
  if (m_tilde < m_lo) return {100.0, true};
  if (m_tilde > m_hi) return {kInversionTable.front().nu, true};
  const double inv = detail::inv_nu_spline()(m_tilde);
  if (!(inv >= 0.01)) return {100.0, true};  // finiteness cap at nu = 100
  return {1.0 / inv, false};
}

struct LambdaEstimate {
  double lambda = 0.0;
  bool clamped = false;
};

namespace detail {

// eta coefficients at nu, linear interpolation between bracketing table rows;
// outside the finite-row range the nearest row is used.
inline std::array<double, 3> eta_coefficients(double nu) {
  constexpr std::size_t last = kInversionTable.size() - 2;  // last finite row
  if (nu <= kInversionTable.front().nu) {
    const auto& r = kInversionTable.front();
    return {r.eta1, r.eta2, r.eta3};
  }
  if (nu >= kInversionTable[last].nu) {
    const auto& r = kInversionTable[last];
    return {r.eta1, r.eta2, r.eta3};
  }
  std::size_t i = 0;
  while (kInversionTable[i + 1].nu < nu) ++i;
  const auto& a = kInversionTable[i];
  const auto& b = kInversionTable[i + 1];
  const double t = (nu - a.nu) / (b.nu - a.nu);
  return {a.eta1 + t * (b.eta1 - a.eta1), a.eta2 + t * (b.eta2 - a.eta2),
          a.eta3 + t * (b.eta3 - a.eta3)};
}

}  // namespace detail

/// lambda from the Galton-Bowley measure at a given nu, via
/// log lambda = eta1 u + eta2 u^3 + eta3 u^-3 with u = log|G|, sign restored
/// at the end. |G| >= 1 clamps to 0.99.
///
/// The cubic was fitted over the tabulated (delta, nu) grid and needs two
/// guards outside that range: for heavy-tail rows (eta2 < 0) it stops being
/// monotone below its stationary point, so u saturates there; and G values
/// infeasibly large for the given nu would otherwise overflow the
/// exponential, so the result is capped at |lambda| = 100. Both guards set
/// the clamped flag.
inline LambdaEstimate lambda_from_gb(double g_tilde, double nu) {
  if (g_tilde == 0.0) return {0.0, false};
  double g = std::fabs(g_tilde);
  bool clamped = false;
  if (g >= 1.0) {
    g = 0.99;
    clamped = true;
  }
  const auto [e1, e2, e3] = detail::eta_coefficients(nu);
  double u = std::log(g);
  if (e2 < 0.0 && e1 > 0.0) {
    const double u_star = -std::sqrt(e1 / (-3.0 * e2));
    if (u < u_star) {
      u = u_star;
      clamped = true;
    }
  }
  const double u3 = u * u * u;
  double log_lam = e1 * u + e2 * u3 + e3 / u3;
  // saturate at the edge of the fitted grid, delta = 0.99: beyond it the
  // formula is extrapolation on an already-saturated delta scale, and
  // extreme slants only strand the subsequent numerical search on the
  // nu ridge
  const double cap = lambda_of_delta(0.99);
  if (log_lam > std::log(cap)) {
    log_lam = std::log(cap);
    clamped = true;
  }
  return {std::copysign(std::exp(log_lam), g_tilde), clamped};
}

/// Full M1 inversion of a quantile summary to (xi, omega, lambda, nu).
inline PreliminaryEstimate invert_measures(const QuantileSummary& q) {
  PreliminaryEstimate est;
  est.method = InitMethod::kM1;
  const NuEstimate nu = nu_from_moors(q.m);
  const LambdaEstimate lam = lambda_from_gb(q.g, nu.nu);
  est.nu = nu.nu;
  est.lambda = lam.lambda;
  est.m_clamped = nu.clamped;
  est.g_clamped = lam.clamped;
  const StParams std_params{0.0, 1.0, est.lambda, est.nu};
  const double q1 = st_quantile(0.25, std_params);
  const double q2 = st_quantile(0.50, std_params);
  const double q3 = st_quantile(0.75, std_params);
  est.omega = 2.0 * q.dq / (q3 - q1);
  est.beta = Eigen::VectorXd::Constant(1, q.q2 - est.omega * q2);
  return est;
}

/// Simplified start: lambda = 0 and nu = 10 are imposed, only location and
/// scale come from the sample.
inline PreliminaryEstimate m3_start(const QuantileSummary& q) {
  PreliminaryEstimate est;
  est.method = InitMethod::kM3;
  est.lambda = 0.0;
  est.nu = 10.0;
  const double q3 = t_quantile(0.75, 10.0);
  est.omega = q.dq / q3;
  est.beta = Eigen::VectorXd::Constant(1, q.q2);  // median of t(10) is 0
  return est;
}

/// Regression extension: median regression for the location coefficients,
/// the usual inversion on its residuals, and the intercept adjusted by the
/// implied median of the fitted skew-t.
inline PreliminaryEstimate init_regression(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                           InitMethod method = InitMethod::kM1) {
  if (method == InitMethod::kM0)
    throw std::invalid_argument("init_regression: use cumulant_start for M0");
  const Eigen::Index c = constant_column(X);
  if (c < 0) throw std::invalid_argument("init_regression: X must include a constant column");
  const LadFit lad = lad_fit(y, X);
  const std::span<const double> r(lad.residuals.data(), static_cast<std::size_t>(lad.residuals.size()));
  const QuantileSummary q = quantile_summary(r);
  PreliminaryEstimate est = method == InitMethod::kM3 ? m3_start(q) : invert_measures(q);
  const double xi_resid = est.beta[0];
  est.beta = lad.beta;
  est.beta[c] += xi_resid / X(0, c);
  return est;
}

/// Optional refinement of (lambda, nu) minimizing the squared distance in
/// (G, M) space; off by default in the estimation pipeline.
inline PreliminaryEstimate refine_in_gm_space(const PreliminaryEstimate& start, double g_target,
                                              double m_target, int max_iterations = 120) {
  auto objective = [&](double atanh_d, double log_nu) {
    const double d = std::tanh(atanh_d);
    const double nu = std::clamp(std::exp(log_nu), 0.30, 100.0);
    const GbMoors gm = st_theoretical_measures(lambda_of_delta(d), nu);
    const double dg = gm.g - g_target;
    const double dm = gm.m - m_target;
    return dg * dg + dm * dm;
  };
  // Nelder-Mead on (atanh delta, log nu)
  const double d0 = std::clamp(delta_of_lambda(start.lambda), -0.995, 0.995);
  std::array<std::array<double, 2>, 3> simplex{{
      {std::atanh(d0), std::log(start.nu)},
      {std::atanh(d0) + 0.15, std::log(start.nu)},
      {std::atanh(d0), std::log(start.nu) + 0.25},
  }};
  std::array<double, 3> f{};
  for (int i = 0; i < 3; ++i) f[i] = objective(simplex[i][0], simplex[i][1]);
  for (int it = 0; it < max_iterations; ++it) {
    std::array<int, 3> ord{0, 1, 2};
    std::sort(ord.begin(), ord.end(), [&](int a, int b) { return f[a] < f[b]; });
    if (f[ord[2]] - f[ord[0]] < 1e-12) break;
    const auto& best = simplex[ord[0]];
    const auto& worst = simplex[ord[2]];
    std::array<double, 2> centroid{0.5 * (best[0] + simplex[ord[1]][0]),
                                   0.5 * (best[1] + simplex[ord[1]][1])};
    std::array<double, 2> refl{2.0 * centroid[0] - worst[0], 2.0 * centroid[1] - worst[1]};
    double fr = objective(refl[0], refl[1]);
    if (fr < f[ord[0]]) {
      std::array<double, 2> exp_pt{3.0 * centroid[0] - 2.0 * worst[0],
                                   3.0 * centroid[1] - 2.0 * worst[1]};
      const double fe = objective(exp_pt[0], exp_pt[1]);
      if (fe < fr) {
        simplex[ord[2]] = exp_pt;
        f[ord[2]] = fe;
      } else {
        simplex[ord[2]] = refl;
        f[ord[2]] = fr;
      }
    } else if (fr < f[ord[1]]) {
      simplex[ord[2]] = refl;
      f[ord[2]] = fr;
    } else {
      std::array<double, 2> con{0.5 * (centroid[0] + worst[0]), 0.5 * (centroid[1] + worst[1])};
      const double fc = objective(con[0], con[1]);
      if (fc < f[ord[2]]) {
        simplex[ord[2]] = con;
        f[ord[2]] = fc;
      } else {
        for (int i : {ord[1], ord[2]}) {
          simplex[i][0] = 0.5 * (simplex[i][0] + best[0]);
          simplex[i][1] = 0.5 * (simplex[i][1] + best[1]);
          f[i] = objective(simplex[i][0], simplex[i][1]);
        }
      }
    }
  }
  const int best = static_cast<int>(
      std::min_element(f.begin(), f.end()) - f.begin());
  PreliminaryEstimate out = start;
  const double d = std::tanh(simplex[best][0]);
  out.lambda = lambda_of_delta(d);
  out.nu = std::clamp(std::exp(simplex[best][1]), 0.30, 100.0);
  return out;
}

}  // namespace skewt
