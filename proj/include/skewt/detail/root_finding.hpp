// Bracketed scalar root finding: secant steps interleaved with bisection so
// the bracket provably halves every other iteration, which matters when the
// function is flat over most of a very wide bracket.

#pragma once

#include <cmath>
#include <stdexcept>

namespace skewt::detail {

template <class F>
inline double find_root(F&& f, double lo, double hi, double flo, double fhi, double f_tol,
                        double x_tol, int max_iterations = 200) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0))
    throw std::runtime_error("find_root: endpoints do not bracket a root");
  double x = 0.5 * (lo + hi);
  for (int i = 0; i < max_iterations; ++i) {
    double cand;
    if (i % 2 == 0 && fhi != flo) {
      cand = lo - flo * (hi - lo) / (fhi - flo);
      const double margin = 1e-3 * (hi - lo);
      if (!(cand > lo + margin && cand < hi - margin)) cand = 0.5 * (lo + hi);
    } else {
      cand = 0.5 * (lo + hi);
    }
    const double fc = f(cand);
    x = cand;
    if (std::fabs(fc) <= f_tol) return x;
    if ((fc > 0.0) == (fhi > 0.0)) {
      hi = cand;
      fhi = fc;
    } else {
      lo = cand;
      flo = fc;
    }
    if (hi - lo <= x_tol * (1.0 + std::fabs(lo) + std::fabs(hi))) return 0.5 * (lo + hi);
  }
  return x;
}

}  // namespace skewt::detail
