#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracle_support.hpp"
#include "skewt/detail/rng.hpp"
#include "skewt/st_multivariate.hpp"

using namespace skewt;

namespace {

MstParams make_params(double rho, double a1, double a2, double nu) {
  MstParams p;
  p.beta = Eigen::MatrixXd::Zero(1, 2);
  p.omega = Eigen::MatrixXd::Identity(2, 2);
  p.omega(0, 1) = p.omega(1, 0) = rho;
  p.alpha = Eigen::VectorXd(2);
  p.alpha << a1, a2;
  p.nu = nu;
  return p;
}

// Sylvester criterion on the 3x3 extended matrix: an eigen-free positive
// definiteness check for the d = 2 case.
bool pd_by_minors(const Eigen::MatrixXd& m) {
  const double d1 = m(0, 0);
  const double d2 = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  const double d3 = m.determinant();
  return d1 > 0.0 && d2 > 0.0 && d3 > 0.0;
}

}  // namespace

TEST_SUITE_BEGIN("st_multivariate");

TEST_CASE("bivariate density at the origin, symmetric case") {
  for (double nu : {1.0, 3.0, 8.0}) {
    const MstParams p = make_params(0.0, 0.0, 0.0, nu);
    const double expected =
        std::exp(std::lgamma(0.5 * (nu + 2.0)) - std::lgamma(0.5 * nu)) / (nu * kPi);
    CHECK(mst_pdf(Eigen::Vector2d{0.0, 0.0}, p) == doctest::Approx(expected).epsilon(1e-12));
  }
  MstParams bad = make_params(1.5, 0.0, 0.0, 3.0);  // |rho| > 1: not PD
  CHECK_THROWS_AS(mst_pdf(Eigen::Vector2d{0.0, 0.0}, bad), std::domain_error);
}

TEST_CASE("bivariate density integrates to one over a large box") {
  const MstParams p = make_params(0.5, 1.0, 2.0, 3.0);
  auto inner = [&](double z1) {
    return oracle::integrate(
        [&](double z2) { return mst_pdf(Eigen::Vector2d{z1, z2}, p); }, -60.0, 60.0, 1e-9);
  };
  const double total = oracle::integrate(inner, -60.0, 60.0, 1e-8);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("marginal slice matches the univariate density") {
  // with identity scale and alpha = (a, 0) the first marginal is exactly
  // ST(0, 1, a, nu)
  const MstParams p = make_params(0.0, 1.5, 0.0, 4.0);
  for (double z1 : {-1.0, 0.0, 0.7, 2.0}) {
    const double marginal = oracle::integrate(
        [&](double z2) { return mst_pdf(Eigen::Vector2d{z1, z2}, p); }, -80.0, 80.0, 1e-10);
    CHECK(marginal == doctest::Approx(st_pdf(z1, {0.0, 1.0, 1.5, 4.0})).epsilon(1e-4));
  }
}

TEST_CASE("alpha / delta maps invert each other") {
  detail::Rng rng(5150);
  for (int k = 0; k < 20; ++k) {
    Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(3, 3, [&](Eigen::Index, Eigen::Index) {
      return rng.normal();
    });
    Eigen::MatrixXd cov = a * a.transpose() + 3.0 * Eigen::MatrixXd::Identity(3, 3);
    const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
    const Eigen::MatrixXd omega_bar =
        sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    Eigen::VectorXd alpha(3);
    alpha << rng.normal() * 2.0, rng.normal() * 2.0, rng.normal() * 2.0;
    const Eigen::VectorXd delta = alpha_to_delta(omega_bar, alpha);
    const Eigen::VectorXd back = delta_to_alpha(omega_bar, delta);
    CHECK((back - alpha).lpNorm<Eigen::Infinity>() <= 1e-10);
  }
  // d = 1 reduces to the scalar map
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
  Eigen::VectorXd d1(1);
  d1 << 0.6;
  CHECK(delta_to_alpha(one, d1)[0] == doctest::Approx(lambda_of_delta(0.6)).epsilon(1e-13));
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(3);
  CHECK(delta_to_alpha(Eigen::MatrixXd::Identity(3, 3), zero).norm() == 0.0);
}

TEST_CASE("feasibility_adjust") {
  SUBCASE("already feasible input is untouched") {
    Eigen::MatrixXd omega_bar = Eigen::MatrixXd::Identity(2, 2);
    omega_bar(0, 1) = omega_bar(1, 0) = 0.4;
    Eigen::VectorXd delta(2);
    delta << 0.3, -0.2;
    const FeasibilityResult r = feasibility_adjust(omega_bar, delta);
    CHECK(r.shrink_passes == 0);
    CHECK((r.omega_bar - omega_bar).norm() == 0.0);
    CHECK((r.delta - delta).norm() == 0.0);
  }
  SUBCASE("d = 1 boundary slant is already feasible") {
    const FeasibilityResult r = feasibility_adjust(Eigen::MatrixXd::Ones(1, 1),
                                                   Eigen::VectorXd::Constant(1, 0.999999));
    CHECK(r.shrink_passes == 0);
  }
  SUBCASE("infeasible slant is shrunk until the extended matrix is PD") {
    Eigen::MatrixXd omega_bar = Eigen::MatrixXd::Identity(2, 2);
    omega_bar(0, 1) = omega_bar(1, 0) = 0.1;
    Eigen::VectorXd delta(2);
    delta << 0.9, -0.9;
    CHECK(!pd_by_minors(extended_scale_matrix(omega_bar, delta)));
    const FeasibilityResult r = feasibility_adjust(omega_bar, delta);
    CHECK(r.shrink_passes > 0);
    CHECK(pd_by_minors(extended_scale_matrix(r.omega_bar, r.delta)));
    // alpha derived from the adjusted blocks is finite
    const Eigen::VectorXd alpha = delta_to_alpha(r.omega_bar, r.delta);
    CHECK(std::isfinite(alpha.norm()));
  }
}

TEST_CASE("product CDF: exact anchors") {
  CHECK(product_cdf_w(0.0, 0.0, 3.0) == doctest::Approx(0.5).epsilon(1e-9));
  // orthant probability of an elliptical law: F_W(0) = 1/2 - asin(rho)/pi
  for (double nu : {1.0, 3.0, 50.0})
    CHECK(product_cdf_w(0.0, 0.5, nu) ==
          doctest::Approx(0.5 - std::asin(0.5) / kPi).epsilon(1e-7));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(product_cdf_w(0.0, 0.5, inf) == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
  // scipy-derived value for the bivariate t with nu = 1
  CHECK(product_cdf_w(1.0, 0.0, 1.0) == doctest::Approx(0.76829550).epsilon(1e-6));
  CHECK_THROWS_AS(product_cdf_w(0.0, 1.0, 3.0), std::domain_error);
}

TEST_CASE("product CDF via bivariate-t simulation at nu = 1") {
  // pairs share the chi-square denominator: uncorrelated but dependent
  detail::Rng rng(1234);
  const std::size_t n = 10'000'000;
  std::size_t count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    const double v = rng.chi_squared(1.0);
    if (z1 * z2 / v <= 1.0) ++count;
  }
  const double phat = static_cast<double>(count) / static_cast<double>(n);
  const double se = std::sqrt(phat * (1.0 - phat) / static_cast<double>(n));
  CHECK(std::fabs(product_cdf_w(1.0, 0.0, 1.0) - phat) <= 3.0 * se);
}

TEST_CASE("product CDF is nonincreasing in rho") {
  for (double w : {-1.0, 0.0, 2.0}) {
    for (double nu : {0.5, 3.0}) {
      double prev = 2.0;
      for (double rho = -0.9; rho <= 0.91; rho += 0.3) {
        const double f = product_cdf_w(w, rho, nu);
        CHECK(f <= prev + 1e-9);
        prev = f;
      }
    }
  }
}

TEST_CASE("solve_rho") {
  CHECK(solve_rho(0.0, 3.0).rho == 0.0);
  // antisymmetry through the sign flip of one component
  const double r1 = solve_rho(0.3, 2.0).rho;
  const double r2 = solve_rho(-0.3, 2.0).rho;
  CHECK(r1 == doctest::Approx(-r2).epsilon(1e-7).scale(1.0));
  // root actually solves the equation
  CHECK(product_cdf_w(0.3, r1, 2.0) == doctest::Approx(0.5).epsilon(1e-7).scale(1.0));
  // a median beyond the attainable range lands on a flagged boundary:
  // median(Z1 Z2) at nu = 2 cannot exceed median(Z^2) = 2/3
  CHECK(solve_rho(0.8, 2.0).at_boundary);
  CHECK(solve_rho(-50.0, 3.0).at_boundary);
}

TEST_CASE("solve_rho recovers the dependence from simulated products") {
  const MstParams p = make_params(0.5, 0.0, 0.0, 3.0);
  const Eigen::MatrixXd z = mst_sample(100'000, p, 99);
  std::vector<double> w(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    w[static_cast<std::size_t>(i)] = z(i, 0) * z(i, 1);
  std::nth_element(w.begin(), w.begin() + w.size() / 2, w.end());
  const double med = w[w.size() / 2];
  const RhoEstimate est = solve_rho(med, 3.0);
  CHECK(std::fabs(est.rho - 0.5) <= 0.03);
}

TEST_CASE("mst_sample: determinism and gaussian limit") {
  const MstParams p = make_params(0.35, 0.0, 0.0, std::numeric_limits<double>::infinity());
  const Eigen::MatrixXd a = mst_sample(2000, p, 31);
  const Eigen::MatrixXd b = mst_sample(2000, p, 31);
  CHECK((a - b).norm() == 0.0);
  const Eigen::MatrixXd big = mst_sample(100'000, p, 77);
  const Eigen::MatrixXd cov = big.transpose() * big / static_cast<double>(big.rows());
  // sample covariance approaches Omega (alpha = 0, Gaussian limit)
  CHECK(cov(0, 0) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(cov(1, 1) == doctest::Approx(1.0).epsilon(0.02));
  CHECK(cov(0, 1) == doctest::Approx(0.35).epsilon(0.05));
}

TEST_CASE("mst_sample marginals match univariate quantiles") {
  const MstParams p = make_params(0.0, 1.5, 0.0, 4.0);
  const Eigen::MatrixXd z = mst_sample(100'000, p, 2718);
  std::vector<double> col(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) col[static_cast<std::size_t>(i)] = z(i, 0);
  std::sort(col.begin(), col.end());
  const StParams marg{0.0, 1.0, 1.5, 4.0};
  const double n = static_cast<double>(col.size());
  for (int j = 1; j <= 7; ++j) {
    const double prob = j / 8.0;
    const double th = st_quantile(prob, marg);
    const double se = std::sqrt(prob * (1.0 - prob) / n) / st_pdf(th, marg);
    CHECK(std::fabs(col[static_cast<std::size_t>(prob * (n - 1))] - th) <= 4.0 * se);
  }
}

TEST_CASE("perturbation invariance of residual products") {
  // z1 z2 has the same law under alpha = (3, -2) as under alpha = 0
  const Eigen::MatrixXd slanted = mst_sample(100'000, make_params(0.5, 3.0, -2.0, 3.0), 11);
  const Eigen::MatrixXd plain = mst_sample(100'000, make_params(0.5, 0.0, 0.0, 3.0), 12);
  std::vector<double> wa, wb;
  for (Eigen::Index i = 0; i < slanted.rows(); ++i) {
    wa.push_back(slanted(i, 0) * slanted(i, 1));
    wb.push_back(plain(i, 0) * plain(i, 1));
  }
  CHECK(oracle::ks_two_sample_passes(wa, wb, 0.01));
}

TEST_CASE("init_multivariate: d = 1 reduces to init_regression") {
  const auto draws = st_sample(400, {1.0, 2.0, 1.5, 3.0}, 404);
  Eigen::MatrixXd y(400, 1);
  for (int i = 0; i < 400; ++i) y(i, 0) = draws[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(400, 1);
  const MstPreliminary multi = init_multivariate(y, X, InitMethod::kM1);
  const PreliminaryEstimate uni = init_regression(y.col(0), X, InitMethod::kM1);
  CHECK(multi.params.beta(0, 0) == doctest::Approx(uni.beta[0]).epsilon(1e-10));
  CHECK(std::sqrt(multi.params.omega(0, 0)) == doctest::Approx(uni.omega).epsilon(1e-10));
  CHECK(multi.params.nu == doctest::Approx(uni.nu).epsilon(1e-10));
  CHECK(multi.params.alpha[0] == doctest::Approx(uni.lambda).epsilon(1e-8));
}

TEST_CASE("init_multivariate: column rescaling leaves the correlation alone") {
  const Eigen::MatrixXd y = mst_sample(600, make_params(0.5, 2.0, 4.0, 3.0), 897);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(600, 1);
  const MstPreliminary base = init_multivariate(y, X, InitMethod::kM1);
  Eigen::MatrixXd scaled = y;
  scaled.col(0) *= 3.0;
  scaled.col(1) *= 0.5;
  const MstPreliminary moved = init_multivariate(scaled, X, InitMethod::kM1);
  const auto corr = [](const MstParams& p) {
    return p.omega(0, 1) / std::sqrt(p.omega(0, 0) * p.omega(1, 1));
  };
  CHECK(corr(moved.params) == doctest::Approx(corr(base.params)).epsilon(1e-9));
  CHECK(moved.params.nu == doctest::Approx(base.params.nu).epsilon(1e-9));
}

TEST_CASE("init_multivariate: M3 variant pins slant and tails") {
  const Eigen::MatrixXd y = mst_sample(300, make_params(0.5, 2.0, 4.0, 3.0), 55);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(300, 1);
  const MstPreliminary m3 = init_multivariate(y, X, InitMethod::kM3);
  CHECK(m3.params.alpha.norm() == 0.0);
  CHECK(m3.params.nu == 10.0);
  CHECK(m3.method == InitMethod::kM3);
}

TEST_CASE("init_multivariate recovers the study dependence across replicates") {
  // median over replicates of the estimated scale-free off-diagonal
  std::vector<double> rhos;
  for (int rep = 0; rep < 100; ++rep) {
    const Eigen::MatrixXd y =
        mst_sample(500, make_params(0.5, 2.0, 4.0, 3.0), 1000 + static_cast<std::uint64_t>(rep));
    const Eigen::MatrixXd X = Eigen::MatrixXd::Ones(500, 1);
    const MstPreliminary est = init_multivariate(y, X, InitMethod::kM1);
    rhos.push_back(est.params.omega(0, 1) /
                   std::sqrt(est.params.omega(0, 0) * est.params.omega(1, 1)));
    CHECK(std::isfinite(est.params.alpha.norm()));
  }
  std::nth_element(rhos.begin(), rhos.begin() + rhos.size() / 2, rhos.end());
  CHECK(std::fabs(rhos[rhos.size() / 2] - 0.5) <= 0.1);
}

TEST_SUITE_END();
