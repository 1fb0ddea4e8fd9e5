// Least-absolute-deviations (median) regression, used to initialize the
// location parameters. IRLS with smoothed weights, finished by an exact
// interpolation step through the active observations.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace skewt {

struct LadFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd residuals;
  double objective = 0.0;  // sum of absolute residuals at beta
  int iterations = 0;
};

namespace detail {

inline double lad_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& X,
                            const Eigen::VectorXd& beta) {
  return (y - X * beta).cwiseAbs().sum();
}

inline bool is_constant_column(const Eigen::MatrixXd& X, Eigen::Index j) {
  const double v = X(0, j);
  for (Eigen::Index i = 1; i < X.rows(); ++i)
    if (X(i, j) != v) return false;
  return v != 0.0;
}

}  // namespace detail

/// Index of the first constant nonzero column of X, or -1 if none.
inline Eigen::Index constant_column(const Eigen::MatrixXd& X) {
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    if (detail::is_constant_column(X, j)) return j;
  return -1;
}

inline LadFit lad_fit(const Eigen::VectorXd& y, const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  const Eigen::Index p = X.cols();
  if (y.size() != n) throw std::invalid_argument("lad_fit: y and X sizes differ");
  if (n <= p) throw std::invalid_argument("lad_fit: need more observations than parameters");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < p) throw std::invalid_argument("lad_fit: X is rank deficient");
  }

  LadFit fit;

  // Intercept-only model: the LAD solution is the sample median; take the
  // lower median for even n so ties resolve deterministically.
  if (p == 1 && detail::is_constant_column(X, 0)) {
    std::vector<double> s(y.data(), y.data() + n);
    std::nth_element(s.begin(), s.begin() + (n - 1) / 2, s.end());
    const double med = s[(n - 1) / 2];
    fit.beta = Eigen::VectorXd::Constant(1, med / X(0, 0));
    fit.residuals = y - X * fit.beta;
    fit.objective = fit.residuals.cwiseAbs().sum();
    fit.iterations = 0;
    return fit;
  }

  // IRLS on the smoothed objective sum sqrt(r^2 + eps^2), weights
  // 1/max(|r|, eps); eps is halved whenever the objective plateaus.
  Eigen::VectorXd beta = X.colPivHouseholderQr().solve(y);
  double obj = detail::lad_objective(y, X, beta);
  double eps = 1e-8 * (1.0 + obj / static_cast<double>(n));
  int it = 0;
  for (; it < 200; ++it) {
    const Eigen::VectorXd r = y - X * beta;
    const Eigen::VectorXd w =
        r.cwiseAbs().cwiseMax(eps).cwiseInverse().cwiseSqrt();
    const Eigen::MatrixXd Xw = w.asDiagonal() * X;
    const Eigen::VectorXd yw = w.asDiagonal() * y;
    const Eigen::VectorXd beta_new = Xw.colPivHouseholderQr().solve(yw);
    const double obj_new = detail::lad_objective(y, X, beta_new);
    const bool improved = obj_new < obj - 1e-12 * (1.0 + obj);
    if (obj_new <= obj) {
      beta = beta_new;
      obj = obj_new;
    }
    if (!improved) {
      if (eps <= 1e-14) break;
      eps *= 0.5;
    }
  }

  // Polish: an optimal LAD fit interpolates p observations. Take the p
  // smallest |r| (ties broken by index) and solve through them exactly.
  {
    Eigen::VectorXd r = y - X * beta;
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double ra = std::fabs(r[a]), rb = std::fabs(r[b]);
      return ra != rb ? ra < rb : a < b;
    });
    Eigen::MatrixXd Xb(p, p);
    Eigen::VectorXd yb(p);
    for (Eigen::Index k = 0; k < p; ++k) {
      Xb.row(k) = X.row(idx[static_cast<std::size_t>(k)]);
      yb[k] = y[idx[static_cast<std::size_t>(k)]];
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(Xb);
    if (lu.isInvertible()) {
      const Eigen::VectorXd beta_c = lu.solve(yb);
      const double obj_c = detail::lad_objective(y, X, beta_c);
      if (obj_c <= obj) {
        beta = beta_c;
        obj = obj_c;
      }
    }
  }

  fit.beta = beta;
  fit.residuals = y - X * beta;
  fit.objective = obj;
  fit.iterations = it;
  return fit;
}

}  // namespace skewt
