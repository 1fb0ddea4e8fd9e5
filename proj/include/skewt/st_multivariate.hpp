// Multivariate skew-t: density and sampling, plus the dependence side of the
// preliminary estimation: per-column univariate fits, pairwise scale-free
// correlations solved from medians of residual products, feasibility
// adjustment of the extended scale matrix, and the delta -> alpha map.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "skewt/detail/quadrature.hpp"
#include "skewt/detail/rng.hpp"
#include "skewt/detail/root_finding.hpp"
#include "skewt/init_inversion.hpp"
#include "skewt/special_functions.hpp"

namespace skewt {

struct MstParams {
  Eigen::MatrixXd beta;   // p x d location coefficients; row 0 alone = xi^T
  Eigen::MatrixXd omega;  // d x d symmetric positive-definite scale matrix
  Eigen::VectorXd alpha;  // d-vector slant
  double nu = 10.0;

  Eigen::Index dim() const { return omega.rows(); }

  void validate() const {
    if (omega.rows() != omega.cols()) throw std::domain_error("MstParams: Omega must be square");
    if (alpha.size() != omega.rows()) throw std::domain_error("MstParams: alpha size mismatch");
    if (beta.size() > 0 && beta.cols() != omega.rows())
      throw std::domain_error("MstParams: beta column count mismatch");
    if (!(nu > 0.0)) throw std::domain_error("MstParams: nu must be positive");
  }
};

namespace detail {

struct ScaleDecomposition {
  Eigen::VectorXd scale;      // omega_j = sqrt(Omega_jj)
  Eigen::MatrixXd omega_bar;  // unit-diagonal correlation-like matrix
  Eigen::LLT<Eigen::MatrixXd> llt;
  double log_det_bar = 0.0;
};

inline ScaleDecomposition decompose_scale(const Eigen::MatrixXd& omega) {
  ScaleDecomposition s;
  const Eigen::Index d = omega.rows();
  s.scale = omega.diagonal().cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(s.scale[j] > 0.0)) throw std::domain_error("Omega has a non-positive diagonal entry");
  s.omega_bar = s.scale.cwiseInverse().asDiagonal() * omega *
                s.scale.cwiseInverse().asDiagonal();
  s.llt.compute(s.omega_bar);
  if (s.llt.info() != Eigen::Success)
    throw std::domain_error("Omega is not positive definite");
  s.log_det_bar = 2.0 * s.llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return s;
}

}  // namespace detail

/// log density of the d-dimensional skew-t at y with location xi.
inline double mst_logpdf(const Eigen::VectorXd& y, const Eigen::VectorXd& xi,
                         const detail::ScaleDecomposition& s, const Eigen::VectorXd& alpha,
                         double nu) {
  const Eigen::Index d = s.omega_bar.rows();
  const Eigen::VectorXd z = (y - xi).cwiseQuotient(s.scale);
  const double q = z.dot(s.llt.solve(z));
  const double az = alpha.dot(z);
  const double dd = static_cast<double>(d);
  double log_sym, perturb;
  if (nu_is_normal_limit(nu)) {
    log_sym = -0.5 * dd * std::log(2.0 * kPi) - 0.5 * s.log_det_bar - 0.5 * q;
    perturb = normal_cdf(az);
  } else {
    log_sym = std::lgamma(0.5 * (nu + dd)) - std::lgamma(0.5 * nu) -
              0.5 * dd * std::log(nu * kPi) - 0.5 * s.log_det_bar -
              0.5 * (nu + dd) * std::log1p(q / nu);
    perturb = t_cdf(az * std::sqrt((nu + dd) / (nu + q)), nu + dd);
  }
  const double log_scale = s.scale.array().log().sum();
  if (perturb <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(2.0) + log_sym + std::log(perturb) - log_scale;
}

inline double mst_pdf(const Eigen::VectorXd& y, const MstParams& p) {
  p.validate();
  if (p.beta.rows() != 1)
    throw std::invalid_argument("mst_pdf: location must be a single row (p = 1)");
  const auto s = detail::decompose_scale(p.omega);
  return std::exp(mst_logpdf(y, p.beta.row(0).transpose(), s, p.alpha, p.nu));
}

/// delta = Omega_bar alpha / sqrt(1 + alpha' Omega_bar alpha).
inline Eigen::VectorXd alpha_to_delta(const Eigen::MatrixXd& omega_bar,
                                      const Eigen::VectorXd& alpha) {
  const Eigen::VectorXd oa = omega_bar * alpha;
  return oa / std::sqrt(1.0 + alpha.dot(oa));
}

/// alpha = (1 - delta' Omega_bar^-1 delta)^(-1/2) Omega_bar^-1 delta.
/// Requires the radicand to be positive, which feasibility_adjust guarantees.
inline Eigen::VectorXd delta_to_alpha(const Eigen::MatrixXd& omega_bar,
                                      const Eigen::VectorXd& delta) {
  Eigen::LLT<Eigen::MatrixXd> llt(omega_bar);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("delta_to_alpha: Omega_bar is not positive definite");
  const Eigen::VectorXd oinv_d = llt.solve(delta);
  const double rad = 1.0 - delta.dot(oinv_d);
  if (!(rad > 0.0))
    throw std::domain_error("delta_to_alpha: delta lies outside the feasible region");
  return oinv_d / std::sqrt(rad);
}

/// The (d+1)x(d+1) block matrix [Omega_bar, delta; delta', 1] that every
/// skew-elliptical parameter set must keep positive definite.
inline Eigen::MatrixXd extended_scale_matrix(const Eigen::MatrixXd& omega_bar,
                                             const Eigen::VectorXd& delta) {
  const Eigen::Index d = omega_bar.rows();
  Eigen::MatrixXd m(d + 1, d + 1);
  m.topLeftCorner(d, d) = omega_bar;
  m.topRightCorner(d, 1) = delta;
  m.bottomLeftCorner(1, d) = delta.transpose();
  m(d, d) = 1.0;
  return m;
}

struct FeasibilityResult {
  Eigen::MatrixXd omega_bar;
  Eigen::VectorXd delta;
  int shrink_passes = 0;
};

/// Shrink every off-diagonal entry of the extended matrix (both the
/// Omega_bar off-diagonals and delta) by 0.95 per pass until its smallest
/// eigenvalue exceeds 1e-10. Already-feasible input passes through with
/// zero passes.
inline FeasibilityResult feasibility_adjust(Eigen::MatrixXd omega_bar, Eigen::VectorXd delta) {
  FeasibilityResult out;
  for (int k = 0;; ++k) {
    const Eigen::MatrixXd m = extended_scale_matrix(omega_bar, delta);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() > 1e-10) {
      out.omega_bar = std::move(omega_bar);
      out.delta = std::move(delta);
      out.shrink_passes = k;
      return out;
    }
    if (k > 4000) throw std::runtime_error("feasibility_adjust: shrinkage did not terminate");
    for (Eigen::Index i = 0; i < omega_bar.rows(); ++i)
      for (Eigen::Index j = 0; j < omega_bar.cols(); ++j)
        if (i != j) omega_bar(i, j) *= 0.95;
    delta *= 0.95;
  }
}

/// P(Z1 Z2 <= w) for a bivariate Student's t with unit scales, dependence
/// rho and nu degrees of freedom.
///
/// Conditioning on Z1 = u gives Z2 | u ~ t(nu+1) with location rho u and
/// scale sqrt((1-rho^2)(nu+u^2)/(nu+1)); folding the two half-lines
/// together leaves
///   F_W(w) = 2 int_0^inf t(u; nu) T(h(u); nu+1) du,
///   h(u) = (w/u - rho u) sqrt((nu+1) / ((1-rho^2)(nu+u^2))).
/// The u -> inf limit of the T factor is split off so the remainder decays
/// fast enough for geometric panels even at very small nu.
inline double product_cdf_w(double w, double rho, double nu, double tol = 1e-9) {
  if (!(std::fabs(rho) < 1.0)) throw std::domain_error("product_cdf_w: need |rho| < 1");
  if (!(nu > 0.0)) throw std::domain_error("product_cdf_w: nu must be positive");
  const bool gaussian = nu_is_normal_limit(nu);
  const double nu1 = gaussian ? nu : nu + 1.0;
  const double kappa = std::sqrt((gaussian ? 1.0 : nu + 1.0) / (1.0 - rho * rho));
  auto cond_cdf = [&](double u) {
    const double root = gaussian ? 1.0 : std::sqrt(nu + u * u);
    const double h = (w / u - rho * u) * kappa / root;
    return t_cdf(h, nu1);
  };
  // Splitting off any constant from the T factor is exact because the folded
  // density integrates to 1/2; the u -> inf limit makes the remainder decay
  // like u^-(nu+3) so geometric panels suffice even at nu = 0.3.
  const double c_inf = t_cdf(-rho * kappa, nu1);
  auto integrand = [&](double u) { return t_pdf(u, nu) * (cond_cdf(u) - c_inf); };
  const double t_peak = t_pdf(0.0, nu1);
  double total = c_inf;
  double lo = 0.0;
  bool ok = true;
  const double h0 = 2.0 + std::sqrt(std::min(nu, 100.0)) + std::sqrt(std::fabs(w));
  for (int k = 0; k < 60; ++k) {
    const double hi_k = h0 * (std::exp2(k + 1) - 1.0);
    auto piece = detail::integrate(integrand, lo, hi_k, tol / 8.0);
    total += 2.0 * piece.value;
    ok = ok && piece.converged;
    lo = hi_k;
    // |T(h(u)) - c_inf| <= t_peak |h(u) - h_inf| <= t_peak kappa (|w| + |rho| nu/2)/u^2
    const double drift = t_peak * kappa * (std::fabs(w) + 0.5 * std::fabs(rho) * nu) / (lo * lo);
    const double bound = 2.0 * (1.0 - t_cdf(lo, nu)) * std::min(1.0, drift);
    if (bound < 0.25 * tol) break;
    if (k == 59) ok = false;
  }
  if (!ok) throw std::runtime_error("product_cdf_w: quadrature did not converge");
  return std::min(std::max(total, 0.0), 1.0);
}

struct RhoEstimate {
  double rho = 0.0;
  bool at_boundary = false;
};

/// Solve F_W(m_w; rho, nu) = 1/2 for rho. F_W is strictly decreasing in rho,
/// so a sign change over (-1, 1) pins the root; without one the nearer
/// boundary is returned with a flag.
inline RhoEstimate solve_rho(double m_w, double nu, double tol = 1e-8) {
  if (!(nu > 0.0)) throw std::domain_error("solve_rho: nu must be positive");
  if (m_w == 0.0) return {0.0, false};
  double lo = -1.0 + 1e-6;
  double hi = 1.0 - 1e-6;
  auto g = [&](double rho) { return product_cdf_w(m_w, rho, nu) - 0.5; };
  double glo = g(lo);
  double ghi = g(hi);
  if (std::fabs(glo) <= tol) return {lo, false};
  if (std::fabs(ghi) <= tol) return {hi, false};
  if (glo * ghi > 0.0)
    return {std::fabs(glo) < std::fabs(ghi) ? lo : hi, true};
  return {detail::find_root(g, lo, hi, glo, ghi, tol, 1e-12), false};
}

/// n draws from ST_d(xi, Omega, alpha, nu), one row per draw; deterministic
/// for a given seed.
inline Eigen::MatrixXd mst_sample(std::size_t n, const MstParams& p, std::uint64_t seed) {
  p.validate();
  if (p.beta.rows() != 1)
    throw std::invalid_argument("mst_sample: location must be a single row (p = 1)");
  const Eigen::Index d = p.dim();
  const auto s = detail::decompose_scale(p.omega);
  const Eigen::VectorXd delta = alpha_to_delta(s.omega_bar, p.alpha);
  const Eigen::MatrixXd ext = extended_scale_matrix(s.omega_bar, delta);
  Eigen::LLT<Eigen::MatrixXd> llt(ext);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("mst_sample: extended scale matrix is not positive definite");
  const Eigen::MatrixXd chol = llt.matrixL();
  detail::Rng rng(seed);
  const bool inf_nu = std::isinf(p.nu) || p.nu >= kNuNormalThreshold;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), d);
  Eigen::VectorXd u(d + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= d; ++j) u[j] = rng.normal();
    Eigen::VectorXd v = chol * u;
    // conditioning representation of the skew-normal direction
    const double sign = v[d] > 0.0 ? 1.0 : -1.0;
    const double scale_mix = inf_nu ? 1.0 : std::sqrt(rng.chi_squared(p.nu) / p.nu);
    for (Eigen::Index j = 0; j < d; ++j)
      out(static_cast<Eigen::Index>(i), j) =
          p.beta(0, j) + s.scale[j] * sign * v[j] / scale_mix;
  }
  return out;
}

struct ColumnFits {
  std::vector<PreliminaryEstimate> estimates;  // one per column
  Eigen::MatrixXd normalized_residuals;        // z_ij = (y_ij - x_i' beta_j) / omega_j
};

struct MstPreliminary {
  MstParams params;
  InitMethod method = InitMethod::kM1;
  int shrink_passes = 0;
  ColumnFits columns;
};

/// Multivariate initialization: per-column regression inversions, pooled nu
/// as the median of the column estimates, pairwise dependence from medians
/// of residual products, feasibility adjustment, and the delta -> alpha map.
inline MstPreliminary init_multivariate(const Eigen::MatrixXd& y, const Eigen::MatrixXd& X,
                                        InitMethod method = InitMethod::kM1) {
  const Eigen::Index n = y.rows();
  const Eigen::Index d = y.cols();
  if (X.rows() != n) throw std::invalid_argument("init_multivariate: y and X row counts differ");
  if (n <= std::max(X.cols(), d))
    throw std::invalid_argument("init_multivariate: too few observations");

  MstPreliminary out;
  out.method = method;
  out.columns.estimates.reserve(static_cast<std::size_t>(d));
  out.columns.normalized_residuals.resize(n, d);
  Eigen::MatrixXd beta(X.cols(), d);
  Eigen::VectorXd scale(d), delta(d);
  std::vector<double> nus;
  for (Eigen::Index j = 0; j < d; ++j) {
    PreliminaryEstimate est = init_regression(y.col(j), X, method);
    beta.col(j) = est.beta;
    scale[j] = est.omega;
    delta[j] = delta_of_lambda(est.lambda);
    nus.push_back(est.nu);
    out.columns.normalized_residuals.col(j) = (y.col(j) - X * est.beta) / est.omega;
    out.columns.estimates.push_back(std::move(est));
  }

  std::sort(nus.begin(), nus.end());
  const std::size_t h = nus.size() / 2;
  const double nu_pooled =
      nus.size() % 2 == 1 ? nus[h] : 0.5 * (nus[h - 1] + nus[h]);

  Eigen::MatrixXd omega_bar = Eigen::MatrixXd::Identity(d, d);
  std::vector<double> prod(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index k = j + 1; k < d; ++k) {
      for (Eigen::Index i = 0; i < n; ++i)
        prod[static_cast<std::size_t>(i)] = out.columns.normalized_residuals(i, j) *
                                            out.columns.normalized_residuals(i, k);
      std::sort(prod.begin(), prod.end());
      const std::size_t m = prod.size() / 2;
      const double med =
          prod.size() % 2 == 1 ? prod[m] : 0.5 * (prod[m - 1] + prod[m]);
      const double rho = solve_rho(med, nu_pooled).rho;
      omega_bar(j, k) = omega_bar(k, j) = rho;
    }
  }

  FeasibilityResult feas = feasibility_adjust(std::move(omega_bar), std::move(delta));
  out.shrink_passes = feas.shrink_passes;
  out.params.beta = std::move(beta);
  out.params.alpha = delta_to_alpha(feas.omega_bar, feas.delta);
  out.params.omega = scale.asDiagonal() * feas.omega_bar * scale.asDiagonal();
  out.params.nu = nu_pooled;
  return out;
}

}  // namespace skewt
