// Tabulated backbone of the quantile-measure inversion: for each grid value
// nu*, the Moors measure at delta = 0 and the three coefficients of the
// log-lambda interpolation formula
//
//   log lambda ~= eta1 u + eta2 u^3 + eta3 u^-3,   u = log G.
//
// The rows are program data; they are published constants, not regenerated
// at runtime. The last row is the skew-normal limit nu = inf, where the eta
// coefficients are not defined.

#pragma once

#include <array>
#include <limits>

namespace skewt {

struct InversionRow {
  double nu;
  double m0;  // Moors measure at delta = 0
  double eta1;
  double eta2;
  double eta3;
};

inline constexpr double kNuInf = std::numeric_limits<double>::infinity();
inline constexpr double kEtaNone = std::numeric_limits<double>::quiet_NaN();

inline constexpr std::array<InversionRow, 25> kInversionTable{{
    {0.30, 9.946, 2.213831, -0.315418, -0.007641},
    {0.32, 8.588, 2.022665, -0.240821, -0.012001},
    {0.35, 7.110, 1.790767, -0.164193, -0.021492},
    {0.40, 5.525, 1.506418, -0.090251, -0.047034},
    {0.45, 4.543, 1.305070, -0.050702, -0.087117},
    {0.50, 3.888, 1.156260, -0.028013, -0.143526},
    {0.60, 3.088, 0.952435, -0.005513, -0.307509},
    {0.70, 2.630, 0.819371, 0.004209, -0.536039},
    {0.80, 2.339, 0.724816, 0.008992, -0.818739},
    {0.90, 2.142, 0.653206, 0.011596, -1.142667},
    {1.00, 2.000, 0.596276, 0.013136, -1.495125},
    {1.50, 1.652, 0.417375, 0.015798, -3.365100},
    {2.00, 1.517, 0.314104, 0.016371, -5.011929},
    {3.00, 1.403, 0.192531, 0.016274, -7.304089},
    {4.00, 1.354, 0.123531, 0.015682, -8.676470},
    {5.00, 1.327, 0.080123, 0.014987, -9.546498},
    {7.00, 1.298, 0.030605, 0.013674, -10.561206},
    {10.00, 1.277, -0.003627, 0.012113, -11.335506},
    {15.00, 1.262, -0.024611, 0.010334, -11.977601},
    {20.00, 1.254, -0.030903, 0.009149, -12.343369},
    {30.00, 1.247, -0.031385, 0.007650, -12.789281},
    {40.00, 1.244, -0.027677, 0.006721, -13.074983},
    {50.00, 1.241, -0.023285, 0.006079, -13.284029},
    {100.00, 1.237, -0.005288, 0.004478, -13.874691},
    {kNuInf, 1.233, kEtaNone, kEtaNone, kEtaNone},
}};

// The delta values of the evaluation grid the table was built on; delta = 1
// is the half-t boundary. Used by the optional (G, M)-space refinement.
inline constexpr std::array<double, 13> kDeltaGrid{
    0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0};

}  // namespace skewt
