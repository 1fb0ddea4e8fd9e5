#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracle_support.hpp"
#include "skewt/init_inversion.hpp"

using namespace skewt;

TEST_SUITE_BEGIN("init_inversion");

TEST_CASE("nu_from_moors hits every tabulated knot") {
  for (const auto& row : kInversionTable) {
    const NuEstimate est = nu_from_moors(row.m0);
    const double expected = std::isinf(row.nu) ? 100.0 : row.nu;
    CHECK(est.nu == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(nu_from_moors(2.000).nu == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(nu_from_moors(1.517).nu == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("nu_from_moors clamps out-of-range measures") {
  const NuEstimate low = nu_from_moors(1.0);
  CHECK(low.nu == 100.0);
  CHECK(low.clamped);
  const NuEstimate high = nu_from_moors(12.0);
  CHECK(high.nu == doctest::Approx(0.30));
  CHECK(high.clamped);
  CHECK_THROWS_AS(nu_from_moors(0.0), std::domain_error);
  CHECK_THROWS_AS(nu_from_moors(-1.0), std::domain_error);
}

TEST_CASE("nu_from_moors is nonincreasing in the measure") {
  double prev = std::numeric_limits<double>::infinity();
  for (double m = 1.24; m <= 9.9; m += 0.005) {
    const double nu = nu_from_moors(m).nu;
    CHECK(nu <= prev + 1e-12);
    prev = nu;
  }
}

TEST_CASE("lambda_from_gb basics") {
  CHECK(lambda_from_gb(0.0, 3.0).lambda == 0.0);
  for (double g : {0.05, 0.3, 0.8})
    for (double nu : {0.5, 1.0, 6.0, 40.0})
      CHECK(lambda_from_gb(-g, nu).lambda ==
            doctest::Approx(-lambda_from_gb(g, nu).lambda).epsilon(1e-14));
  const LambdaEstimate clamped = lambda_from_gb(1.2, 3.0);
  CHECK(clamped.clamped);
  CHECK(clamped.lambda == doctest::Approx(lambda_from_gb(0.99, 3.0).lambda).epsilon(1e-12));
  // coefficients saturate outside the tabulated nu range
  CHECK(lambda_from_gb(0.3, 150.0).lambda ==
        doctest::Approx(lambda_from_gb(0.3, 100.0).lambda).epsilon(1e-14));
  CHECK(lambda_from_gb(0.3, 0.1).lambda ==
        doctest::Approx(lambda_from_gb(0.3, 0.3).lambda).epsilon(1e-14));
}

TEST_CASE("lambda_from_gb round trip at (lambda, nu) = (2, 3)") {
  const GbMoors gm = st_theoretical_measures(2.0, 3.0);
  const double lam = lambda_from_gb(gm.g, 3.0).lambda;
  CHECK(std::fabs(lam - 2.0) / 2.0 <= 0.15);
}

TEST_CASE("invert_measures recovers the standard Cauchy") {
  std::array<double, 7> e{};
  for (int j = 1; j <= 7; ++j) e[j - 1] = st_quantile(j / 8.0, {0.0, 1.0, 0.0, 1.0});
  const PreliminaryEstimate est = invert_measures(measures_from_octiles(e));
  CHECK(std::fabs(est.beta[0]) <= 0.02);
  CHECK(std::fabs(est.omega - 1.0) <= 0.05);
  CHECK(std::fabs(est.lambda) <= 0.05);
  CHECK(std::fabs(est.nu - 1.0) <= 0.1);
  CHECK(est.method == InitMethod::kM1);
}

TEST_CASE("invert_measures is affine equivariant") {
  const auto y = st_sample(4000, {0.0, 1.0, 1.5, 2.5}, 2024);
  const PreliminaryEstimate base = invert_measures(quantile_summary(y));
  const double a = 2.5, b = -7.0;
  std::vector<double> t(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = a * y[i] + b;
  const PreliminaryEstimate scaled = invert_measures(quantile_summary(t));
  CHECK(scaled.lambda == doctest::Approx(base.lambda).epsilon(1e-9));
  CHECK(scaled.nu == doctest::Approx(base.nu).epsilon(1e-9));
  CHECK(scaled.omega == doctest::Approx(a * base.omega).epsilon(1e-9));
  CHECK(scaled.beta[0] == doctest::Approx(a * base.beta[0] + b).epsilon(1e-7).scale(1.0));
  // mirroring flips location and slant, keeps scale and tails
  for (std::size_t i = 0; i < y.size(); ++i) t[i] = -y[i];
  const PreliminaryEstimate mirrored = invert_measures(quantile_summary(t));
  CHECK(mirrored.lambda == doctest::Approx(-base.lambda).epsilon(1e-9));
  CHECK(mirrored.nu == doctest::Approx(base.nu).epsilon(1e-9));
  CHECK(mirrored.omega == doctest::Approx(base.omega).epsilon(1e-9));
  CHECK(mirrored.beta[0] == doctest::Approx(-base.beta[0]).epsilon(1e-7).scale(1.0));
}

TEST_CASE("m3_start fixes slant and tails") {
  const auto y = st_sample(500, {2.0, 3.0, 4.0, 1.0}, 5);
  const QuantileSummary q = quantile_summary(y);
  const PreliminaryEstimate est = m3_start(q);
  CHECK(est.lambda == 0.0);
  CHECK(est.nu == 10.0);
  CHECK(est.method == InitMethod::kM3);
  CHECK(est.beta[0] == doctest::Approx(q.q2).epsilon(1e-12));
  CHECK(est.omega == doctest::Approx(q.dq / t_quantile(0.75, 10.0)).epsilon(1e-12));
}

TEST_CASE("init_regression with an intercept-only design reduces to invert_measures") {
  const auto draws = st_sample(501, {0.5, 1.0, 2.0, 3.0}, 31);
  Eigen::VectorXd y(501);
  for (int i = 0; i < 501; ++i) y[i] = draws[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(501, 1);
  const PreliminaryEstimate reg = init_regression(y, X, InitMethod::kM1);
  const PreliminaryEstimate plain =
      invert_measures(quantile_summary(std::span<const double>(y.data(), 501)));
  CHECK(reg.beta[0] == doctest::Approx(plain.beta[0]).epsilon(1e-10));
  CHECK(reg.omega == doctest::Approx(plain.omega).epsilon(1e-10));
  CHECK(reg.lambda == doctest::Approx(plain.lambda).epsilon(1e-10));
  CHECK(reg.nu == doctest::Approx(plain.nu).epsilon(1e-10));
}

TEST_CASE("init_regression corrects the intercept for symmetric errors") {
  // symmetric noise: the correction term is near zero
  const auto noise = st_sample(4001, {0.0, 1.0, 0.0, 5.0}, 8);
  Eigen::MatrixXd X(4001, 2);
  Eigen::VectorXd y(4001);
  for (int i = 0; i < 4001; ++i) {
    const double x = -1.0 + 2.0 * i / 4000.0;
    X(i, 0) = 1.0;
    X(i, 1) = x;
    y[i] = 1.0 + 2.0 * x + noise[static_cast<std::size_t>(i)];
  }
  const PreliminaryEstimate est = init_regression(y, X, InitMethod::kM1);
  CHECK(std::fabs(est.lambda) < 0.6);
  // xi is a location parameter, not the median: the fitted median must sit
  // at the true intercept even when the slant estimate wobbles
  const double median_st = st_quantile(0.5, {0.0, 1.0, est.lambda, est.nu});
  CHECK(est.beta[0] + est.omega * median_st == doctest::Approx(1.0).epsilon(0.05));
  CHECK(est.beta[1] == doctest::Approx(2.0).epsilon(0.05));
  CHECK_THROWS_AS(init_regression(y, X.col(1), InitMethod::kM1), std::invalid_argument);
}

TEST_CASE("round-trip envelope over the delta-nu grid") {
  // the inversion recovers (delta, nu) within the oracle-confirmed envelope
  double worst_d = 0.0, worst_ln = 0.0;
  for (double nu : {0.5, 1.0, 2.0, 5.0, 20.0}) {
    for (int di = 1; di <= 9; ++di) {
      const double d = di / 10.0;
      const GbMoors gm = st_theoretical_measures(lambda_of_delta(d), nu);
      const double nu_t = nu_from_moors(gm.m).nu;
      const double lam_t = lambda_from_gb(gm.g, nu_t).lambda;
      const double d_t = delta_of_lambda(lam_t);
      worst_d = std::max(worst_d, std::fabs(d_t - d));
      worst_ln = std::max(worst_ln, std::fabs(std::log(nu_t / nu)));
    }
  }
  CHECK(worst_d <= 0.07);
  CHECK(worst_ln <= 0.35);
}

TEST_CASE("refinement recovers the corner cases of the envelope" * doctest::timeout(300)) {
  // the plain inversion is least accurate here; the (G, M)-space search
  // brings both coordinates back within the tight envelope
  for (auto [d, nu] : {std::pair{0.8, 0.5}, {0.9, 20.0}}) {
    const GbMoors gm = st_theoretical_measures(lambda_of_delta(d), nu);
    const double nu_t = nu_from_moors(gm.m).nu;
    const double lam_t = lambda_from_gb(gm.g, nu_t).lambda;
    PreliminaryEstimate start;
    start.beta = Eigen::VectorXd::Zero(1);
    start.lambda = lam_t;
    start.nu = nu_t;
    const PreliminaryEstimate refined = refine_in_gm_space(start, gm.g, gm.m);
    CHECK(std::fabs(delta_of_lambda(refined.lambda) - d) <= 0.05);
    CHECK(std::fabs(std::log(refined.nu / nu)) <= 0.20);
  }
}

TEST_SUITE_END();
