// Adaptive Gauss-Kronrod (G7, K15) quadrature on finite intervals.

#pragma once

#include <cmath>
#include <stdexcept>
#include <utility>

namespace skewt::detail {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = true;
};

// 15-point Kronrod nodes (positive half) and weights, with the embedded
// 7-point Gauss weights on the odd-indexed nodes.
inline constexpr double kKronrodNodes[8] = {
    0.000000000000000, 0.207784955007898, 0.405845151377397, 0.586087235467691,
    0.741531185599394, 0.864864423359769, 0.949107912342759, 0.991455371120813};
inline constexpr double kKronrodWeights[8] = {
    0.209482141084728, 0.204432940075298, 0.190350578064785, 0.169004726639267,
    0.140653259715525, 0.104790010322250, 0.063092092629979, 0.022935322010529};
inline constexpr double kGaussWeights[4] = {
    0.417959183673469, 0.381830050505119, 0.279705391489277, 0.129484966168870};

template <class F>
inline void gk15(F&& f, double a, double b, double& kronrod, double& err) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  const double f0 = f(c);
  double rk = kKronrodWeights[0] * f0;
  double rg = kGaussWeights[0] * f0;
  for (int i = 1; i < 8; ++i) {
    const double dx = h * kKronrodNodes[i];
    const double fv = f(c - dx) + f(c + dx);
    rk += kKronrodWeights[i] * fv;
    if (i % 2 == 0) rg += kGaussWeights[i / 2] * fv;
  }
  kronrod = rk * h;
  err = std::fabs((rk - rg) * h);
}

template <class F>
inline void integrate_adaptive_impl(F& f, double a, double b, double tol, int depth,
                                    QuadResult& out) {
  double v, e;
  gk15(f, a, b, v, e);
  if (e <= tol || depth <= 0) {
    out.value += v;
    out.error += e;
    if (e > tol) out.converged = false;
    return;
  }
  const double c = 0.5 * (a + b);
  integrate_adaptive_impl(f, a, c, 0.5 * tol, depth - 1, out);
  integrate_adaptive_impl(f, c, b, 0.5 * tol, depth - 1, out);
}

/// Integrate f over [a, b] to absolute tolerance tol.
template <class F>
inline QuadResult integrate(F&& f, double a, double b, double tol, int max_depth = 45) {
  QuadResult out;
  if (a == b) return out;
  integrate_adaptive_impl(f, a, b, tol, max_depth, out);
  return out;
}

}  // namespace skewt::detail
