#ifndef IPWTT_MONTECARLO_HPP
#define IPWTT_MONTECARLO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "ipwtt/error.hpp"
#include "ipwtt/estimators.hpp"
#include "ipwtt/normal.hpp"
#include "ipwtt/propensity.hpp"
#include "ipwtt/random.hpp"
#include "ipwtt/roster.hpp"
#include "ipwtt/sample.hpp"

namespace ipwtt {

/// Threshold-crossing designs. Scalar cases use x = [1, X]; multivariate
/// cases use x = [1, B, X, X^2] with B ~ Bernoulli(.3).
enum class DesignCase { Scalar, ScalarWithConstant, Multivariate3, Multivariate4 };

inline std::string_view to_string(DesignCase c) {
  switch (c) {
    case DesignCase::Scalar: return "scalar";
    case DesignCase::ScalarWithConstant: return "scalar_constant";
    case DesignCase::Multivariate3: return "multivariate3";
    case DesignCase::Multivariate4: return "multivariate4";
  }
  return "?";
}

inline DesignCase parse_design(std::string_view s) {
  if (s == "scalar" || s == "case1") return DesignCase::Scalar;
  if (s == "scalar_constant" || s == "case2") return DesignCase::ScalarWithConstant;
  if (s == "multivariate3" || s == "case3") return DesignCase::Multivariate3;
  if (s == "multivariate4" || s == "case4") return DesignCase::Multivariate4;
  throw DomainError("unknown design case '" + std::string(s) + "'");
}

/// Intercept each case carries unless overridden.
inline double default_alpha(DesignCase c) {
  return c == DesignCase::ScalarWithConstant || c == DesignCase::Multivariate4 ? 0.25 : 0.0;
}

inline bool is_multivariate(DesignCase c) {
  return c == DesignCase::Multivariate3 || c == DesignCase::Multivariate4;
}

enum class PropensityMode { Known, Estimated };

inline std::string_view to_string(PropensityMode m) {
  return m == PropensityMode::Known ? "known" : "estimated";
}

inline PropensityMode parse_mode(std::string_view s) {
  if (s == "known") return PropensityMode::Known;
  if (s == "estimated") return PropensityMode::Estimated;
  throw DomainError("unknown propensity mode '" + std::string(s) + "'");
}

struct ScenarioConfig {
  std::string name = "scenario";
  DesignCase design = DesignCase::Scalar;
  double alpha = 0.0;
  double beta = 0.25;
  Distribution dist_outcomes = Distribution::StdNormal;
  Distribution dist_x = Distribution::StdNormal;
  Distribution dist_u = Distribution::StdNormal;
  std::size_t n = 100;
  PropensityMode mode = PropensityMode::Known;
  std::vector<EstimatorSpec> estimators = default_roster();
  FractileParams fractiles;
  std::uint64_t seed = 1;
  std::size_t replications = 10000;

  /// The link that matches the latent error's CDF.
  LinkFamily link() const {
    return dist_u == Distribution::StdNormal ? LinkFamily::Probit : LinkFamily::Laplace;
  }
  std::size_t trim_col() const { return is_multivariate(design) ? 2 : 1; }
  std::size_t n_cols() const { return is_multivariate(design) ? 4 : 2; }
};

/// gamma_0 in the column order of the design matrix.
inline Eigen::VectorXd true_gamma(const ScenarioConfig& c) {
  if (is_multivariate(c.design)) {
    Eigen::VectorXd g(4);
    g << c.alpha, 0.5, c.beta, c.beta / 2.0;
    return g;
  }
  Eigen::VectorXd g(2);
  g << c.alpha, c.beta;
  return g;
}

/// Throws on a configuration that cannot run.
inline void validate_config(const ScenarioConfig& c) {
  if (c.n < 2) throw DomainError("scenario '" + c.name + "': n must be at least 2");
  if (c.replications < 2) throw DomainError("need >= 2 replications");
  if (c.estimators.empty()) throw DomainError("scenario '" + c.name + "': no estimators");
  if (!std::isfinite(c.alpha) || !std::isfinite(c.beta))
    throw DomainError("scenario '" + c.name + "': alpha and beta must be finite");
  check_fractiles(c.estimators, c.fractiles, c.n, c.n_cols(), c.trim_col());
}

struct GeneratedData {
  Sample sample;
  std::vector<double> true_probs;
};

/// Draws one data set. Per unit the stream is consumed as Y0, Y1, the
/// covariates (B then X for multivariate cases), then U.
inline GeneratedData generate_dgp(const ScenarioConfig& c, RandomStream& rng) {
  const std::size_t n = c.n;
  const auto cols = static_cast<Eigen::Index>(c.n_cols());
  const Eigen::VectorXd gamma = true_gamma(c);
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  std::vector<int> d(n);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), cols);
  std::vector<double> probs(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const double y0 = draw(c.dist_outcomes, rng);
    const double y1 = draw(c.dist_outcomes, rng);
    x(r, 0) = 1.0;
    if (is_multivariate(c.design)) {
      x(r, 1) = rng.uniform() < 0.3 ? 1.0 : 0.0;
      const double xv = draw(c.dist_x, rng);
      x(r, 2) = xv;
      x(r, 3) = xv * xv;
    } else {
      x(r, 1) = draw(c.dist_x, rng);
    }
    const double u = draw(c.dist_u, rng);
    const double index = x.row(r).dot(gamma);
    d[i] = index - u >= 0.0 ? 1 : 0;
    y(r) = d[i] == 1 ? y1 : y0;
    probs[i] = dist_cdf(c.dist_u, index);
  }
  Schema names;
  names.x = is_multivariate(c.design) ? std::vector<std::string>{"const", "b", "x", "x2"}
                                      : std::vector<std::string>{"const", "x"};
  return {Sample(std::move(y), std::move(d), std::move(x), names), std::move(probs)};
}

struct EstimateDraw {
  double theta = 0.0;
  std::size_t trimmed = 0;
};

struct ReplicationResult {
  std::size_t rep_index = 0;
  bool failed = false;
  std::string failure;
  /// Aligned with ScenarioConfig::estimators; empty when failed.
  std::vector<EstimateDraw> estimates;
};

/// One replication on its own stream (seed, rep_index). Library errors
/// (separation, a one-armed sample, a non-converged fit, ...) mark the
/// replication failed instead of propagating.
inline ReplicationResult run_replication(const ScenarioConfig& c, std::size_t rep_index) {
  ReplicationResult res;
  res.rep_index = rep_index;
  try {
    RandomStream rng(c.seed, rep_index);
    auto data = generate_dgp(c, rng);
    std::vector<double> probs = std::move(data.true_probs);
    if (c.mode == PropensityMode::Estimated) {
      auto fit = fit_mle(data.sample, c.link());
      if (!fit.converged) throw PreconditionError("propensity fit did not converge");
      probs = std::move(fit.probs);
    }
    const auto zs = compute_z(data.sample, probs);
    const auto est = evaluate_estimators(data.sample, zs, probs, c.estimators, c.fractiles, c.trim_col());
    res.estimates.reserve(est.size());
    for (const auto& e : est) res.estimates.push_back({e.report.theta_hat, e.report.trimmed_count});
  } catch (const Error& e) {
    res.failed = true;
    res.failure = e.what();
    res.estimates.clear();
  }
  return res;
}

inline std::size_t default_threads() {
  return std::max<unsigned>(1, std::thread::hardware_concurrency());
}

/// Runs every replication, in parallel when threads > 1. Results are
/// indexed by rep_index, so the output does not depend on scheduling.
inline std::vector<ReplicationResult> run_study(const ScenarioConfig& c, std::size_t threads = 0) {
  validate_config(c);
  const std::size_t reps = c.replications;
  std::vector<ReplicationResult> out(reps);
  if (threads == 0) threads = default_threads();
  threads = std::min(threads, reps);

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    try {
      for (std::size_t r; (r = next.fetch_add(1)) < reps;) out[r] = run_replication(c, r);
    } catch (...) {
      std::lock_guard lock(failure_mu);
      if (!failure) failure = std::current_exception();
      next = reps;
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

/// One-sample two-sided KS distance between theta/s_n and N(0,1), divided
/// by its asymptotic 5% critical value 1.358/sqrt(R).
inline double ks_normality_ratio(std::span<const double> estimates, double s_n) {
  if (!(s_n > 0.0)) throw DegenerateScaleError("ks_normality_ratio: s_n must be positive");
  const std::size_t r = estimates.size();
  if (r < 2) throw DomainError("ks_normality_ratio: need at least 2 estimates");
  std::vector<double> z(estimates.begin(), estimates.end());
  for (double& v : z) v /= s_n;
  std::sort(z.begin(), z.end());
  const double rd = static_cast<double>(r);
  double dmax = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    const double f = normal_cdf(z[i]);
    dmax = std::max({dmax, static_cast<double>(i + 1) / rd - f, f - static_cast<double>(i) / rd});
  }
  return dmax / (1.358 / std::sqrt(rd));
}

struct SummaryRow {
  std::string id;
  std::string label;
  double mean = 0.0;
  double median = 0.0;
  double rmse = 0.0;
  double ks_ratio = 0.0;
  double trim_pct = 0.0;
  double rej01 = 0.0;
  double rej05 = 0.0;
  double rej10 = 0.0;
  std::size_t failed_reps = 0;
  std::size_t reps = 0;
};

namespace detail {

inline double median_of(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  return 0.5 * (*std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)) + hi);
}

}  // namespace detail

/// Summary metrics over the successful replications. The true effect is 0,
/// so rmse = sqrt(mean theta^2) and rejections test |theta / rmse| against
/// two-sided normal critical values.
inline SummaryRow summarize_estimates(std::span<const double> theta,
                                      std::span<const std::size_t> trimmed, std::size_t n) {
  SummaryRow row;
  const std::size_t r = theta.size();
  if (r < 2) throw PreconditionError("need >= 2 replications");
  if (trimmed.size() != r) throw DomainError("summarize: trimmed counts length differs");
  const double rd = static_cast<double>(r);
  double sum = 0.0, sq = 0.0;
  std::size_t tr = 0;
  for (std::size_t i = 0; i < r; ++i) {
    sum += theta[i];
    sq += theta[i] * theta[i];
    tr += trimmed[i];
  }
  row.reps = r;
  row.mean = sum / rd;
  row.median = detail::median_of({theta.begin(), theta.end()});
  row.rmse = std::sqrt(sq / rd);
  row.trim_pct = 100.0 * static_cast<double>(tr) / (rd * static_cast<double>(n));
  if (row.rmse > 0.0) {
    row.ks_ratio = ks_normality_ratio(theta, row.rmse);
    const double c01 = normal_quantile(0.995), c05 = normal_quantile(0.975), c10 = normal_quantile(0.95);
    std::size_t a = 0, b = 0, c = 0;
    for (double t : theta) {
      const double s = std::fabs(t / row.rmse);
      a += s > c01;
      b += s > c05;
      c += s > c10;
    }
    row.rej01 = static_cast<double>(a) / rd;
    row.rej05 = static_cast<double>(b) / rd;
    row.rej10 = static_cast<double>(c) / rd;
  } else {
    row.ks_ratio = std::numeric_limits<double>::quiet_NaN();
  }
  return row;
}

inline std::vector<SummaryRow> summarize(const ScenarioConfig& c,
                                         const std::vector<ReplicationResult>& reps) {
  std::size_t failed = 0;
  for (const auto& r : reps) failed += r.failed;
  std::vector<SummaryRow> rows;
  for (std::size_t e = 0; e < c.estimators.size(); ++e) {
    std::vector<double> theta;
    std::vector<std::size_t> trimmed;
    theta.reserve(reps.size());
    trimmed.reserve(reps.size());
    for (const auto& r : reps) {
      if (r.failed) continue;
      theta.push_back(r.estimates[e].theta);
      trimmed.push_back(r.estimates[e].trimmed);
    }
    // Too few successful replications to summarize: metrics stay NaN.
    SummaryRow row;
    if (theta.size() >= 2) {
      row = summarize_estimates(theta, trimmed, c.n);
    } else {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.mean = row.median = row.rmse = row.ks_ratio = row.trim_pct = nan;
      row.rej01 = row.rej05 = row.rej10 = nan;
      row.reps = theta.size();
    }
    row.id = c.estimators[e].id();
    row.label = c.estimators[e].label();
    row.failed_reps = failed;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace ipwtt

#endif  // IPWTT_MONTECARLO_HPP
