#ifndef IPWTT_INFERENCE_HPP
#define IPWTT_INFERENCE_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipwtt/error.hpp"
#include "ipwtt/estimators.hpp"
#include "ipwtt/normal.hpp"
#include "ipwtt/propensity.hpp"
#include "ipwtt/sample.hpp"

namespace ipwtt {

struct ScaleEstimate {
  double v_hat_sq = 0.0;
  /// D_hat; empty in known-propensity mode.
  Eigen::VectorXd d_hat;
  std::size_t n = 0;
  std::size_t k = 0;
};

struct InferenceReport {
  double theta_hat = 0.0;
  double null_value = 0.0;
  double v_hat_sq = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  std::pair<double, double> ci{0.0, 0.0};
  double level = 0.95;
  Eigen::VectorXd d_hat_vec;
  bool known_propensity = false;
};

inline constexpr double kMaxCondition = 1e12;

namespace detail {

/// Trimming indicator I(|centered_i| < threshold) of the tz estimator.
inline std::vector<char> tz_keep(const ZSeries& zs, std::size_t k) {
  const double threshold = estimate_tz(zs, k).threshold;
  std::vector<char> keep(zs.n());
  for (std::size_t i = 0; i < zs.n(); ++i) keep[i] = std::fabs(zs.centered[i]) < threshold;
  return keep;
}

/// Cholesky factor of the information matrix after a condition check.
inline Eigen::LLT<Eigen::MatrixXd> guarded_llt(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw SingularError("information matrix is not finite");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > kMaxCondition)
    throw SingularError("information matrix is singular or ill-conditioned");
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw SingularError("information matrix is not positive definite");
  return llt;
}

}  // namespace detail

/// Plug-in scale V_hat^2 for the (bias-corrected) tail-trimmed estimator
/// with an estimated propensity. Scores enter through
/// w_i = [(1/n) sum S_j S_j']^{-1} S_i and D_hat = -(1/n) sum S_i Z_i I_i.
inline ScaleEstimate variance_estimate(const Sample& sample, const PropensityFit& fit,
                                       const ZSeries& zs, std::size_t k, double b_hat) {
  if (!fit.converged) throw PreconditionError("variance_estimate: propensity fit did not converge");
  if (zs.n() != sample.n()) throw DomainError("variance_estimate: Z series length differs from n");
  const std::size_t n = zs.n();
  const double nd = static_cast<double>(n);
  const auto keep = detail::tz_keep(zs, k);

  const Eigen::MatrixXd s = score_matrix(sample, fit);
  const Eigen::MatrixXd info = s.transpose() * s / nd;
  const auto llt = detail::guarded_llt(info);

  Eigen::VectorXd d_hat = Eigen::VectorXd::Zero(s.cols());
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) d_hat -= s.row(static_cast<Eigen::Index>(i)).transpose() * zs.z[i];
  d_hat /= nd;

  // D_hat' w_i = (M^{-1} D_hat)' S_i.
  const Eigen::VectorXd a = llt.solve(d_hat);
  const Eigen::VectorXd adj = s * a;

  const double recenter = static_cast<double>(n - k) / nd * b_hat;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double term = (keep[i] ? zs.centered[i] : 0.0) + recenter + adj(static_cast<Eigen::Index>(i));
    acc += term * term;
  }
  return {acc / static_cast<double>(n - k), d_hat, n, k};
}

/// V_hat^2 with the propensity known: the score terms drop out.
inline ScaleEstimate variance_estimate_known(const ZSeries& zs, std::size_t k, double b_hat) {
  const std::size_t n = zs.n();
  const auto keep = detail::tz_keep(zs, k);
  const double recenter = static_cast<double>(n - k) / static_cast<double>(n) * b_hat;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double term = (keep[i] ? zs.centered[i] : 0.0) + recenter;
    acc += term * term;
  }
  return {acc / static_cast<double>(n - k), Eigen::VectorXd(), n, k};
}

inline double t_statistic(double theta_hat, double null_value, double v_hat_sq, std::size_t n) {
  if (!(v_hat_sq > 0.0)) throw DegenerateScaleError("t_statistic: V_hat^2 must be positive");
  return std::sqrt(static_cast<double>(n)) * (theta_hat - null_value) / std::sqrt(v_hat_sq);
}

inline std::pair<double, double> confidence_interval(double theta_hat, double v_hat_sq,
                                                     std::size_t n, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  if (!(v_hat_sq >= 0.0)) throw DomainError("V_hat^2 must be non-negative");
  const double half = normal_quantile(0.5 * (1.0 + level)) *
                      std::sqrt(v_hat_sq / static_cast<double>(n));
  return {theta_hat - half, theta_hat + half};
}

/// Bundles the scale, t-statistic and interval. A zero scale leaves t_stat
/// as NaN instead of throwing.
inline InferenceReport make_inference(double theta_hat, const ScaleEstimate& scale,
                                      double level = 0.95, double null_value = 0.0) {
  InferenceReport r;
  r.theta_hat = theta_hat;
  r.null_value = null_value;
  r.v_hat_sq = scale.v_hat_sq;
  r.std_error = std::sqrt(scale.v_hat_sq / static_cast<double>(scale.n));
  r.t_stat = scale.v_hat_sq > 0.0 ? t_statistic(theta_hat, null_value, scale.v_hat_sq, scale.n)
                                  : std::numeric_limits<double>::quiet_NaN();
  r.ci = confidence_interval(theta_hat, scale.v_hat_sq, scale.n, level);
  r.level = level;
  r.d_hat_vec = scale.d_hat;
  r.known_propensity = scale.d_hat.size() == 0;
  return r;
}

}  // namespace ipwtt

#endif  // IPWTT_INFERENCE_HPP
