#ifndef IPWTT_PROPENSITY_HPP
#define IPWTT_PROPENSITY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ipwtt/error.hpp"
#include "ipwtt/normal.hpp"
#include "ipwtt/sample.hpp"

namespace ipwtt {

/// Parametric propensity link p(x, gamma) = F(x'gamma).
enum class LinkFamily { Logit, Probit, Laplace };

inline std::string_view to_string(LinkFamily f) {
  switch (f) {
    case LinkFamily::Logit: return "logit";
    case LinkFamily::Probit: return "probit";
    case LinkFamily::Laplace: return "laplace";
  }
  return "?";
}

inline LinkFamily parse_link(std::string_view s) {
  if (s == "logit") return LinkFamily::Logit;
  if (s == "probit") return LinkFamily::Probit;
  if (s == "laplace") return LinkFamily::Laplace;
  throw DomainError("unknown link family '" + std::string(s) + "'");
}

namespace detail {

inline void require_finite_index(double index) {
  if (!std::isfinite(index)) throw DomainError("link index is not finite");
}

inline double link_cdf(LinkFamily f, double t) {
  switch (f) {
    case LinkFamily::Logit:
      if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
      else {
        const double e = std::exp(t);
        return e / (1.0 + e);
      }
    case LinkFamily::Probit:
      return normal_cdf(t);
    case LinkFamily::Laplace:
      return t <= 0.0 ? 0.5 * std::exp(std::numbers::sqrt2 * t)
                      : 1.0 - 0.5 * std::exp(-std::numbers::sqrt2 * t);
  }
  return 0.0;
}

/// Link quantities at one index. All three links are symmetric, so the
/// complement 1 - F(t) is evaluated as F(-t) to keep tail accuracy.
struct LinkPoint {
  double p;       // F(t)
  double q;       // 1 - F(t)
  double f;       // F'(t)
  double fprime;  // F''(t)
};

inline LinkPoint link_point(LinkFamily fam, double t) {
  LinkPoint lp{link_cdf(fam, t), link_cdf(fam, -t), 0.0, 0.0};
  switch (fam) {
    case LinkFamily::Logit:
      lp.f = lp.p * lp.q;
      lp.fprime = lp.f * (lp.q - lp.p);
      break;
    case LinkFamily::Probit:
      lp.f = normal_pdf(t);
      lp.fprime = -t * lp.f;
      break;
    case LinkFamily::Laplace:
      lp.f = 0.5 * std::numbers::sqrt2 * std::exp(-std::numbers::sqrt2 * std::fabs(t));
      // Right limit at the kink.
      lp.fprime = (t < 0.0 ? 1.0 : -1.0) * std::numbers::sqrt2 * lp.f;
      break;
  }
  return lp;
}

}  // namespace detail

/// F(index) for the given family. Throws DomainError on non-finite input.
inline double link_eval(LinkFamily family, double index) {
  detail::require_finite_index(index);
  return detail::link_cdf(family, index);
}

struct LinkSlope {
  double value = 0.0;
  /// Set when a Laplace link is evaluated exactly at its kink; `value` is
  /// then the right derivative.
  bool at_kink = false;
};

/// dF/d(index).
inline LinkSlope link_derivative(LinkFamily family, double index) {
  detail::require_finite_index(index);
  LinkSlope s{detail::link_point(family, index).f, false};
  if (family == LinkFamily::Laplace && index == 0.0) s.at_kink = true;
  return s;
}

/// Inverse-probability weight h = D/p - (1-D)/(1-p).
inline double h_weight(int d, double p) {
  if (!(p > 0.0 && p < 1.0))
    throw DegenerateProbabilityError("propensity " + std::to_string(p) + " is not inside (0,1)");
  return d == 1 ? 1.0 / p : -1.0 / (1.0 - p);
}

struct FitOptions {
  double tol = 1e-8;
  int max_iter = 100;
  int max_halvings = 30;
  double separation_bound = 50.0;
};

struct PropensityFit {
  LinkFamily family = LinkFamily::Logit;
  Eigen::VectorXd gamma_hat;
  double loglik = 0.0;
  double loglik_init = 0.0;
  int iterations = 0;
  bool converged = false;
  /// p_i(gamma_hat), one per observation.
  std::vector<double> probs;
  /// Max-norm of the mean score at gamma_hat.
  double grad_norm = 0.0;
  std::vector<std::string> warnings;
};

namespace detail {

/// Score weight g = h * f, so that S_i = g_i * x_i. Branching on d avoids
/// 0/0 when the irrelevant probability underflows.
inline double score_weight(int d, const LinkPoint& lp) {
  return d == 1 ? lp.f / lp.p : -lp.f / lp.q;
}

/// d g / d index.
inline double score_weight_slope(int d, const LinkPoint& lp) {
  if (d == 1) {
    const double r = lp.f / lp.p;
    return lp.fprime / lp.p - r * r;
  }
  const double r = lp.f / lp.q;
  return -lp.fprime / lp.q - r * r;
}

inline double loglik_term(int d, const LinkPoint& lp) {
  return d == 1 ? std::log(lp.p) : std::log(lp.q);
}

struct LikelihoodState {
  double loglik = 0.0;
  Eigen::VectorXd score;     // sum of S_i
  Eigen::MatrixXd observed;  // minus the Hessian
  Eigen::MatrixXd expected;  // Fisher information
};

inline double loglik_at(const Sample& s, LinkFamily fam, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd eta = s.x() * gamma;
  double ll = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const auto t = eta(static_cast<Eigen::Index>(i));
    ll += loglik_term(s.d(i), LinkPoint{link_cdf(fam, t), link_cdf(fam, -t), 0.0, 0.0});
  }
  return ll;
}

inline LikelihoodState likelihood_state(const Sample& s, LinkFamily fam,
                                        const Eigen::VectorXd& gamma) {
  const auto q = gamma.size();
  LikelihoodState st{0.0, Eigen::VectorXd::Zero(q), Eigen::MatrixXd::Zero(q, q),
                     Eigen::MatrixXd::Zero(q, q)};
  const Eigen::VectorXd eta = s.x() * gamma;
  Eigen::VectorXd w_obs(eta.size()), w_exp(eta.size()), g(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto lp = link_point(fam, eta(i));
    const int d = s.d(static_cast<std::size_t>(i));
    st.loglik += loglik_term(d, lp);
    g(i) = score_weight(d, lp);
    w_obs(i) = -score_weight_slope(d, lp);
    w_exp(i) = (lp.f / lp.p) * (lp.f / lp.q);
  }
  st.score = s.x().transpose() * g;
  st.observed = s.x().transpose() * w_obs.asDiagonal() * s.x();
  st.expected = s.x().transpose() * w_exp.asDiagonal() * s.x();
  return st;
}

inline std::optional<Eigen::VectorXd> spd_solve(const Eigen::MatrixXd& a,
                                                const Eigen::VectorXd& b) {
  if (!a.allFinite()) return std::nullopt;
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Eigen::VectorXd x = llt.solve(b);
  if (!x.allFinite()) return std::nullopt;
  return x;
}

}  // namespace detail

/// Maximum likelihood fit of p(x, gamma) = F(x'gamma) by Newton-Raphson.
///
/// Each iteration solves with the observed information when it is positive
/// definite, otherwise with the expected (Fisher) information, and once more
/// with a small ridge before giving up with SingularError. Steps are halved
/// until the log-likelihood does not decrease. A non-decreasing step that
/// leaves the box |gamma|_inf <= separation_bound raises SeparationError, as
/// does a final index x'gamma_hat whose sign matches d for every unit.
/// Hitting max_iter returns converged = false with a warning.
inline PropensityFit fit_mle(const Sample& sample, LinkFamily family,
                             std::optional<Eigen::VectorXd> init = std::nullopt,
                             const FitOptions& opts = {}) {
  const auto q = static_cast<Eigen::Index>(sample.k());
  if (q == 0) throw PreconditionError("fit_mle: no covariates");
  Eigen::VectorXd gamma = init.value_or(Eigen::VectorXd::Zero(q));
  if (gamma.size() != q)
    throw PreconditionError("fit_mle: init has length " + std::to_string(gamma.size()) +
                            ", expected " + std::to_string(q));
  const double n = static_cast<double>(sample.n());

  PropensityFit fit;
  fit.family = family;
  auto st = detail::likelihood_state(sample, family, gamma);
  if (!std::isfinite(st.loglik)) throw DomainError("fit_mle: log-likelihood not finite at init");
  fit.loglik_init = st.loglik;

  int iter = 0;
  bool stalled = false;
  for (; iter < opts.max_iter; ++iter) {
    if (st.score.cwiseAbs().maxCoeff() / n <= opts.tol) break;

    auto step = detail::spd_solve(st.observed, st.score);
    if (!step) step = detail::spd_solve(st.expected, st.score);
    if (!step) {
      const double ridge = 1e-10 * (st.expected.trace() / static_cast<double>(q) + 1.0);
      step = detail::spd_solve(
          st.expected + ridge * Eigen::MatrixXd::Identity(q, q), st.score);
    }
    if (!step) throw SingularError("fit_mle: information matrix is singular");

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd candidate;
    for (int h = 0; h <= opts.max_halvings; ++h, t *= 0.5) {
      candidate = gamma + t * *step;
      const double ll = detail::loglik_at(sample, family, candidate);
      if (std::isfinite(ll) && ll >= st.loglik) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    if (candidate.cwiseAbs().maxCoeff() > opts.separation_bound)
      throw SeparationError("fit_mle: coefficients diverge (perfect separation)");
    gamma = candidate;
    st = detail::likelihood_state(sample, family, gamma);
  }

  fit.gamma_hat = gamma;
  fit.loglik = st.loglik;
  fit.iterations = iter;
  fit.grad_norm = st.score.cwiseAbs().maxCoeff() / n;
  fit.converged = fit.grad_norm <= opts.tol;
  if (!fit.converged)
    fit.warnings.push_back(stalled ? "line search could not improve the log-likelihood"
                                   : "maximum iterations reached");

  const Eigen::VectorXd eta = sample.x() * gamma;
  // If x'gamma_hat already classifies every unit by sign, scaling gamma_hat
  // up raises every likelihood term, so no finite maximizer exists.
  bool separates = true;
  for (std::size_t i = 0; i < sample.n() && separates; ++i) {
    const double t = eta(static_cast<Eigen::Index>(i));
    separates = sample.d(i) == 1 ? t > 0.0 : t < 0.0;
  }
  if (separates) throw SeparationError("fit_mle: covariates separate the treatment perfectly");

  fit.probs.resize(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) {
    const double p = detail::link_cdf(family, eta(static_cast<Eigen::Index>(i)));
    if (!(p > 0.0 && p < 1.0))
      throw DegenerateProbabilityError("fit_mle: fitted probability of observation " +
                                       std::to_string(i) + " is 0 or 1");
    fit.probs[i] = p;
  }
  return fit;
}

/// S_i(gamma) = h_i(gamma) * dF(x_i'gamma) * x_i for one observation.
inline Eigen::VectorXd score_contribution(LinkFamily family, int d,
                                          const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& gamma) {
  const double t = x.dot(gamma);
  const double p = link_eval(family, t);
  return h_weight(d, p) * link_derivative(family, t).value * x;
}

/// S_i at the fitted coefficients.
inline Eigen::VectorXd score(const Sample& sample, const PropensityFit& fit, std::size_t i) {
  if (i >= sample.n()) throw DomainError("score: index out of range");
  const Eigen::VectorXd xi = sample.x().row(static_cast<Eigen::Index>(i)).transpose();
  const double t = xi.dot(fit.gamma_hat);
  return h_weight(sample.d(i), fit.probs[i]) * link_derivative(fit.family, t).value * xi;
}

/// All scores as an n x q matrix (row i is S_i').
inline Eigen::MatrixXd score_matrix(const Sample& sample, const PropensityFit& fit) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(sample.n()), fit.gamma_hat.size());
  for (std::size_t i = 0; i < sample.n(); ++i)
    out.row(static_cast<Eigen::Index>(i)) = score(sample, fit, i).transpose();
  return out;
}

}  // namespace ipwtt

#endif  // IPWTT_PROPENSITY_HPP
