// Octile-based summary measures: median, quartile deviation, Galton-Bowley
// skewness and Moors kurtosis, for samples and for theoretical ST laws.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "skewt/st_univariate.hpp"

namespace skewt {

struct QuantileSummary {
  std::array<double, 7> octiles{};  // e1..e7, nondecreasing
  double q2 = 0.0;                  // median
  double dq = 0.0;                  // quartile deviation (q3 - q1) / 2
  double g = 0.0;                   // Galton-Bowley skewness, in (-1, 1)
  double m = 0.0;                   // Moors kurtosis, > 0
};

struct GbMoors {
  double g = 0.0;
  double m = 0.0;
};

/// Empirical quantile, linear interpolation of order statistics with
/// plotting position (k-1)/(n-1) (the type-7 convention). Input must be
/// sorted.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) throw std::domain_error("sorted_quantile: empty sample");
  if (n == 1) return sorted[0];
  const double h = p * static_cast<double>(n - 1);
  const double fl = std::floor(h);
  const auto k = static_cast<std::size_t>(fl);
  if (k + 1 >= n) return sorted[n - 1];
  return sorted[k] + (h - fl) * (sorted[k + 1] - sorted[k]);
}

/// Empirical octiles at probabilities j/8, j = 1..7. Requires n >= 8 and a
/// non-degenerate spread between e2 and e6.
inline std::array<double, 7> sample_octiles(std::span<const double> y) {
  if (y.size() < 8) throw std::domain_error("sample_octiles: need at least 8 observations");
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  std::array<double, 7> e{};
  for (int j = 1; j <= 7; ++j) e[j - 1] = sorted_quantile(s, j / 8.0);
  if (!(e[5] > e[1]))
    throw std::domain_error("sample_octiles: degenerate sample, e6 == e2");
  return e;
}

inline QuantileSummary measures_from_octiles(const std::array<double, 7>& e) {
  QuantileSummary q;
  q.octiles = e;
  const double iqr = e[5] - e[1];  // q3 - q1
  if (!(iqr > 0.0))
    throw std::domain_error("measures_from_octiles: quartile deviation is zero");
  q.q2 = e[3];
  q.dq = 0.5 * iqr;
  q.g = (e[5] - 2.0 * e[3] + e[1]) / iqr;
  q.m = ((e[6] - e[4]) + (e[2] - e[0])) / iqr;
  return q;
}

inline QuantileSummary quantile_summary(std::span<const double> y) {
  return measures_from_octiles(sample_octiles(y));
}

/// (G, M) of ST(0, 1, lambda, nu), computed from the theoretical octiles.
inline GbMoors st_theoretical_measures(double lambda, double nu) {
  StParams p{0.0, 1.0, lambda, nu};
  std::array<double, 7> e{};
  for (int j = 1; j <= 7; ++j) e[j - 1] = st_quantile(j / 8.0, p);
  const QuantileSummary q = measures_from_octiles(e);
  return {q.g, q.m};
}

}  // namespace skewt
