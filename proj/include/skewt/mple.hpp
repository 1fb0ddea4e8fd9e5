// Maximum penalized likelihood estimation for univariate and multivariate
// skew-t models: the log-likelihood, the slant penalty, the cumulant-based
// start, the numerical maximizer and the profile deviance grid.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "skewt/detail/optim.hpp"
#include "skewt/init_inversion.hpp"
#include "skewt/st_multivariate.hpp"
#include "skewt/st_univariate.hpp"

namespace skewt {

// Lower bound keeping the likelihood away from its poles near nu = 0.
inline constexpr double kNuLowerBound = 0.1;

// Penalty constants of the published maximum-penalized-likelihood proposal:
// Q = c1 log(1 + c2 s^2) with s the slant (lambda, or alpha* in the
// multivariate case). Zero at zero slant, even, logarithmic growth.
inline constexpr double kPenaltyC1 = 0.875913;
inline constexpr double kPenaltyC2 = 0.856250;

/// Penalty as a function of the univariate slant.
inline double penalty(double lambda) {
  if (std::isinf(lambda)) return std::numeric_limits<double>::infinity();
  return kPenaltyC1 * std::log1p(kPenaltyC2 * lambda * lambda);
}

/// Multivariate penalty through alpha*^2 = alpha' Omega_bar alpha
/// (equivalently delta' Omega_bar^-1 delta / (1 - delta' Omega_bar^-1 delta)).
inline double penalty_mv(const Eigen::VectorXd& alpha, const Eigen::MatrixXd& omega_bar) {
  const double a2 = alpha.dot(omega_bar * alpha);
  return kPenaltyC1 * std::log1p(kPenaltyC2 * a2);
}

/// Sum of log skew-t densities with a linear location model xi_i = x_i' beta.
/// Throws on a non-finite contribution, naming the offending observation.
inline double st_loglik(const Eigen::VectorXd& beta, double omega, double lambda, double nu,
                        const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  if (X.rows() != y.size() || X.cols() != beta.size())
    throw std::invalid_argument("st_loglik: dimension mismatch");
  StParams p{0.0, omega, lambda, nu};
  p.validate();
  const Eigen::VectorXd xi = X * beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double d = st_pdf(y[i], StParams{xi[i], omega, lambda, nu});
    if (!(d > 0.0) || !std::isfinite(d))
      throw std::runtime_error("st_loglik: non-finite density at observation " +
                               std::to_string(i));
    total += std::log(d);
  }
  return total;
}

inline double st_loglik(const StParams& p, const Eigen::VectorXd& y) {
  return st_loglik(Eigen::VectorXd::Constant(1, p.xi), p.omega, p.lambda, p.nu, y,
                   Eigen::MatrixXd::Ones(y.size(), 1));
}

/// Multivariate analogue; beta is p x d with xi_i' = x_i' beta.
inline double mst_loglik(const MstParams& p, const Eigen::MatrixXd& y, const Eigen::MatrixXd& X) {
  p.validate();
  if (X.rows() != y.rows() || X.cols() != p.beta.rows() || y.cols() != p.dim())
    throw std::invalid_argument("mst_loglik: dimension mismatch");
  const auto s = detail::decompose_scale(p.omega);
  const Eigen::MatrixXd xi = X * p.beta;
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i) {
    const double l = mst_logpdf(y.row(i).transpose(), xi.row(i).transpose(), s, p.alpha, p.nu);
    if (!std::isfinite(l))
      throw std::runtime_error("mst_loglik: non-finite density at observation " +
                               std::to_string(i));
    total += l;
  }
  return total;
}

namespace detail {

struct CumulantTargets {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

// gamma2 is decreasing in nu for fixed delta; bisect on log(nu - 4).
inline std::optional<std::pair<double, double>> match_cumulants(const CumulantTargets& t) {
  if (!(t.gamma2 > 1e-8)) return std::nullopt;
  auto gammas = [](double delta, double nu) -> CumulantTargets {
    const StMoments m = st_moments(StParams{0.0, 1.0, lambda_of_delta(delta), nu});
    return {m.skewness.value_or(0.0), m.kurtosis_excess.value_or(0.0)};
  };
  double best_delta = 0.0, best_nu = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 400; ++i) {
    const double delta = -0.9995 + 1.999 * i / 400.0;
    double lo = std::log(1e-4), hi = std::log(1e6);  // log(nu - 4)
    const double g2_lo = gammas(delta, 4.0 + std::exp(lo)).gamma2;
    const double g2_hi = gammas(delta, 4.0 + std::exp(hi)).gamma2;
    if (t.gamma2 > g2_lo || t.gamma2 < g2_hi) continue;
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (lo + hi);
      if (gammas(delta, 4.0 + std::exp(mid)).gamma2 > t.gamma2)
        lo = mid;
      else
        hi = mid;
    }
    const double nu = 4.0 + std::exp(0.5 * (lo + hi));
    const double err = std::fabs(gammas(delta, nu).gamma1 - t.gamma1);
    if (err < best_err) {
      best_err = err;
      best_delta = delta;
      best_nu = nu;
    }
  }
  // only a genuine interior match counts as a successful inversion
  if (best_err > 1e-3 * (1.0 + std::fabs(t.gamma1))) return std::nullopt;
  if (std::fabs(best_delta) > 0.999 || best_nu < 4.01 || best_nu > 9e5) return std::nullopt;
  return std::make_pair(best_delta, best_nu);
}

}  // namespace detail

/// Cumulant-based start: least-squares fit of the location model, sample
/// cumulants of the residuals, then numeric inversion of the
/// (gamma1, gamma2) maps. When the sample cumulants leave the feasible
/// region, the slant and tail parameters fall back to (0, 10) and the
/// linear-fit location and scale are kept.
inline PreliminaryEstimate cumulant_start(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const Eigen::Index n = y.size();
  if (X.rows() != n || n <= X.cols())
    throw std::invalid_argument("cumulant_start: dimension mismatch");
  const Eigen::Index c = constant_column(X);
  if (c < 0) throw std::invalid_argument("cumulant_start: X must include a constant column");
  PreliminaryEstimate est;
  est.method = InitMethod::kM0;
  est.beta = X.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd r = y - X * est.beta;
  const double nn = static_cast<double>(n);
  const double m2 = r.squaredNorm() / nn;
  const double m3 = r.array().cube().sum() / nn;
  const double m4 = r.array().square().square().sum() / nn;
  const double sd = std::sqrt(m2);
  detail::CumulantTargets t{m3 / (m2 * sd), m4 / (m2 * m2) - 3.0};

  const auto match = detail::match_cumulants(t);
  if (!match) {
    est.lambda = 0.0;
    est.nu = 10.0;
    est.omega = sd;
    return est;
  }
  const auto [delta, nu] = *match;
  est.lambda = lambda_of_delta(delta);
  est.nu = nu;
  const double bd = st_bnu(nu) * delta;
  const double s2z = nu / (nu - 2.0) - bd * bd;
  est.omega = std::sqrt(m2 / s2z);
  // the least-squares residuals average zero, so the implied location of the
  // residual law shifts the intercept by -omega b_nu delta
  est.beta[c] += -est.omega * bd / X(0, c);
  return est;
}

struct FitOptions {
  bool penalized = true;
  int max_iterations = 500;
  double grad_tol = 1e-5;
};

struct FitResult {
  Eigen::VectorXd beta;
  double omega = 1.0;
  double lambda = 0.0;
  double nu = 10.0;
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  PreliminaryEstimate start;
  InitMethod method = InitMethod::kM1;
  bool converged = false;
  int iterations = 0;
  double elapsed_seconds = 0.0;

  StParams location_params() const {
    if (beta.size() != 1) throw std::logic_error("FitResult: not a plain-location fit");
    return StParams{beta[0], omega, lambda, nu};
  }
};

namespace detail {

// Working parameterization: [beta..., log omega, lambda, log(nu - nu0)].
inline Eigen::VectorXd pack_uni(const Eigen::VectorXd& beta, double omega, double lambda,
                                double nu) {
  Eigen::VectorXd x(beta.size() + 3);
  x.head(beta.size()) = beta;
  x[beta.size()] = std::log(omega);
  x[beta.size() + 1] = lambda;
  x[beta.size() + 2] = std::log(std::min(nu, 5e14) - kNuLowerBound);
  return x;
}

inline void unpack_uni(const Eigen::VectorXd& x, Eigen::VectorXd& beta, double& omega,
                       double& lambda, double& nu) {
  const Eigen::Index p = x.size() - 3;
  beta = x.head(p);
  omega = std::exp(x[p]);
  lambda = x[p + 1];
  nu = kNuLowerBound + std::exp(std::min(x[p + 2], 34.0));
}

}  // namespace detail

/// Numerical maximization of the (penalized) log-likelihood from a given
/// start, in the transformed parameterization. Returns the best point seen
/// even when the gradient test fails within the iteration cap.
inline FitResult fit_mple(const PreliminaryEstimate& start, const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& X, const FitOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  auto objective = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd beta;
    double omega, lambda, nu;
    detail::unpack_uni(x, beta, omega, lambda, nu);
    double v = -st_loglik(beta, omega, lambda, nu, y, X);
    if (options.penalized) v += penalty(lambda);
    return v;
  };
  const double start_nu = std::clamp(start.nu, kNuLowerBound + 1e-6, 1e14);
  const Eigen::VectorXd x0 = detail::pack_uni(start.beta, start.omega, start.lambda, start_nu);
  const auto min_res = detail::minimize_bfgs(objective, x0, options.max_iterations,
                                             options.grad_tol);
  FitResult fit;
  fit.start = start;
  fit.method = start.method;
  detail::unpack_uni(min_res.x, fit.beta, fit.omega, fit.lambda, fit.nu);
  fit.converged = min_res.converged;
  fit.iterations = min_res.iterations;
  fit.loglik = st_loglik(fit.beta, fit.omega, fit.lambda, fit.nu, y, X);
  fit.penalized_loglik = fit.loglik - (options.penalized ? penalty(fit.lambda) : 0.0);
  fit.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

struct MstFitResult {
  MstParams params;
  double loglik = 0.0;
  double penalized_loglik = 0.0;
  InitMethod method = InitMethod::kM1;
  bool converged = false;
  int iterations = 0;
  double elapsed_seconds = 0.0;
};

namespace detail {

// Multivariate packing: [beta (p*d), log diag L (d), strict lower L
// (d(d-1)/2), alpha (d), log(nu - nu0)] with Omega = L L'.
inline Eigen::VectorXd pack_mst(const MstParams& p) {
  const Eigen::Index pd = p.beta.size();
  const Eigen::Index d = p.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(p.omega);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("fit_mple: start Omega is not positive definite");
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::VectorXd x(pd + d + d * (d - 1) / 2 + d + 1);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < p.beta.cols(); ++j)
    for (Eigen::Index i = 0; i < p.beta.rows(); ++i) x[k++] = p.beta(i, j);
  for (Eigen::Index i = 0; i < d; ++i) x[k++] = std::log(L(i, i));
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) x[k++] = L(i, j);
  for (Eigen::Index i = 0; i < d; ++i) x[k++] = p.alpha[i];
  x[k] = std::log(std::min(p.nu, 5e14) - kNuLowerBound);
  return x;
}

inline MstParams unpack_mst(const Eigen::VectorXd& x, Eigen::Index p_rows, Eigen::Index d) {
  MstParams out;
  out.beta.resize(p_rows, d);
  Eigen::Index k = 0;
  for (Eigen::Index j = 0; j < d; ++j)
    for (Eigen::Index i = 0; i < p_rows; ++i) out.beta(i, j) = x[k++];
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) L(i, i) = std::exp(x[k++]);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < i; ++j) L(i, j) = x[k++];
  out.omega = L * L.transpose();
  out.alpha.resize(d);
  for (Eigen::Index i = 0; i < d; ++i) out.alpha[i] = x[k++];
  out.nu = kNuLowerBound + std::exp(std::min(x[k], 34.0));
  return out;
}

}  // namespace detail

inline MstFitResult fit_mple_mst(const MstPreliminary& start, const Eigen::MatrixXd& y,
                                 const Eigen::MatrixXd& X, const FitOptions& options = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const Eigen::Index p_rows = start.params.beta.rows();
  const Eigen::Index d = start.params.dim();
  auto objective = [&](const Eigen::VectorXd& x) {
    const MstParams params = detail::unpack_mst(x, p_rows, d);
    double v = -mst_loglik(params, y, X);
    if (options.penalized)
      v += penalty_mv(params.alpha, detail::decompose_scale(params.omega).omega_bar);
    return v;
  };
  MstParams start_params = start.params;
  start_params.nu = std::clamp(start_params.nu, kNuLowerBound + 1e-6, 1e14);
  const Eigen::VectorXd x0 = detail::pack_mst(start_params);
  const auto min_res = detail::minimize_bfgs(objective, x0, options.max_iterations,
                                             options.grad_tol);
  MstFitResult fit;
  fit.method = start.method;
  fit.params = detail::unpack_mst(min_res.x, p_rows, d);
  fit.converged = min_res.converged;
  fit.iterations = min_res.iterations;
  fit.loglik = mst_loglik(fit.params, y, X);
  fit.penalized_loglik =
      fit.loglik -
      (options.penalized
           ? penalty_mv(fit.params.alpha, detail::decompose_scale(fit.params.omega).omega_bar)
           : 0.0);
  fit.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return fit;
}

struct DevianceGrid {
  std::vector<double> lambda_grid;
  std::vector<double> nu_grid;
  Eigen::MatrixXd deviance;  // rows follow lambda, columns follow nu; NaN = failed cell
  double lambda_hat = 0.0;
  double nu_hat = 0.0;
  double max_penalized_loglik = 0.0;
};

/// Profile deviance D(lambda, nu) = 2 (max logL_p - profile logL_p), where
/// the profile maximizes over location and scale with (lambda, nu) held
/// fixed. Cells are solved row-major, warm-starting each inner maximization
/// from its neighbour.
inline DevianceGrid deviance_grid(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                                  std::vector<double> lambda_grid, std::vector<double> nu_grid,
                                  const FitOptions& options = {}) {
  if (lambda_grid.empty() || nu_grid.empty())
    throw std::invalid_argument("deviance_grid: grids must be nonempty");
  DevianceGrid grid;
  grid.lambda_grid = std::move(lambda_grid);
  grid.nu_grid = std::move(nu_grid);

  // global fit: better of the two initialization routes
  const FitResult fit_m2 = fit_mple(init_regression(y, X, InitMethod::kM1), y, X, options);
  const FitResult fit_m3 = fit_mple(init_regression(y, X, InitMethod::kM3), y, X, options);
  const FitResult& best_fit =
      fit_m2.penalized_loglik >= fit_m3.penalized_loglik ? fit_m2 : fit_m3;
  grid.lambda_hat = best_fit.lambda;
  grid.nu_hat = best_fit.nu;
  double best = best_fit.penalized_loglik;

  const Eigen::Index nl = static_cast<Eigen::Index>(grid.lambda_grid.size());
  const Eigen::Index nn = static_cast<Eigen::Index>(grid.nu_grid.size());
  Eigen::MatrixXd profile(nl, nn);
  Eigen::VectorXd warm = detail::pack_uni(best_fit.beta, best_fit.omega, 0.0, 10.0)
                             .head(best_fit.beta.size() + 1);
  Eigen::VectorXd row_start = warm;
  for (Eigen::Index i = 0; i < nl; ++i) {
    warm = row_start;
    for (Eigen::Index j = 0; j < nn; ++j) {
      const double lambda = grid.lambda_grid[static_cast<std::size_t>(i)];
      const double nu = grid.nu_grid[static_cast<std::size_t>(j)];
      auto inner = [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd beta = x.head(x.size() - 1);
        const double omega = std::exp(x[x.size() - 1]);
        double v = -st_loglik(beta, omega, lambda, nu, y, X);
        if (options.penalized) v += penalty(lambda);
        return v;
      };
      const auto inner_res = detail::minimize_bfgs(inner, warm, 200, options.grad_tol);
      if (std::isfinite(inner_res.value)) {
        profile(i, j) = -inner_res.value;
        warm = inner_res.x;
        if (j == 0) row_start = inner_res.x;
        best = std::max(best, profile(i, j));
      } else {
        profile(i, j) = std::numeric_limits<double>::quiet_NaN();
      }
    }
  }
  grid.max_penalized_loglik = best;
  grid.deviance = 2.0 * (best - profile.array());
  return grid;
}

}  // namespace skewt
