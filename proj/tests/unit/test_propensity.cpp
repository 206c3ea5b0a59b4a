#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ipwtt/propensity.hpp"

using namespace ipwtt;

namespace {

constexpr LinkFamily kFamilies[] = {LinkFamily::Logit, LinkFamily::Probit, LinkFamily::Laplace};

/// Scalar logit data: x = [1, X], P(D=1|X) = logistic(g0 + g1 X).
Sample logit_data(std::uint64_t seed, std::size_t n, double g0, double g1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nx;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), 2);
    std::vector<int> d(n);
    std::size_t treated = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      x(r, 0) = 1.0;
      x(r, 1) = nx(rng);
      d[i] = u(rng) < 1.0 / (1.0 + std::exp(-(g0 + g1 * x(r, 1)))) ? 1 : 0;
      y(r) = nx(rng);
      treated += static_cast<std::size_t>(d[i]);
    }
    if (treated > 0 && treated < n) return Sample(y, d, x);
  }
}

/// Logit log-likelihood written out directly.
double oracle_loglik(const Sample& s, double a, double b) {
  double ll = 0.0;
  for (std::size_t i = 0; i < s.n(); ++i) {
    const double t = a + b * s.x(i, 1);
    const double p = 1.0 / (1.0 + std::exp(-t));
    ll += s.d(i) == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return ll;
}

/// Grid maximizer on a 1e-3 lattice: a coarse pass locates the basin of the
/// concave likelihood, a fine pass scans a window around it.
std::pair<double, double> grid_argmax(const Sample& s) {
  double ba = 0.0, bb = 0.0, best = -1e300;
  for (int i = -100; i <= 100; ++i)
    for (int j = -100; j <= 100; ++j) {
      const double a = 0.05 * i, b = 0.05 * j;
      const double v = oracle_loglik(s, a, b);
      if (v > best) best = v, ba = a, bb = b;
    }
  const double ca = ba, cb = bb;
  for (int i = -250; i <= 250; ++i)
    for (int j = -250; j <= 250; ++j) {
      const double a = ca + 1e-3 * i, b = cb + 1e-3 * j;
      const double v = oracle_loglik(s, a, b);
      if (v > best) best = v, ba = a, bb = b;
    }
  return {ba, bb};
}

}  // namespace

TEST(Link, Values) {
  EXPECT_DOUBLE_EQ(link_eval(LinkFamily::Logit, 0.0), 0.5);
  EXPECT_DOUBLE_EQ(link_eval(LinkFamily::Laplace, 0.0), 0.5);
  EXPECT_NEAR(link_eval(LinkFamily::Laplace, 1.0), 1.0 - 0.5 * std::exp(-std::numbers::sqrt2), 1e-15);
  EXPECT_NEAR(link_eval(LinkFamily::Laplace, 1.0), 0.878436, 1e-5);
  EXPECT_NEAR(link_eval(LinkFamily::Laplace, -1.0), 0.5 * std::exp(-std::numbers::sqrt2), 1e-15);
  EXPECT_THROW(link_eval(LinkFamily::Probit, std::nan("")), DomainError);
  EXPECT_THROW(link_eval(LinkFamily::Logit, INFINITY), DomainError);
}

TEST(Link, Derivatives) {
  EXPECT_DOUBLE_EQ(link_derivative(LinkFamily::Logit, 0.0).value, 0.25);
  EXPECT_NEAR(link_derivative(LinkFamily::Probit, 0.0).value, 0.398942280401433, 1e-14);
  EXPECT_NEAR(link_derivative(LinkFamily::Laplace, -1.0).value,
              std::numbers::sqrt2 / 2.0 * std::exp(-std::numbers::sqrt2), 1e-15);
  EXPECT_NEAR(link_derivative(LinkFamily::Laplace, -1.0).value, 0.171907, 1e-5);
  const auto kink = link_derivative(LinkFamily::Laplace, 0.0);
  EXPECT_TRUE(kink.at_kink);
  EXPECT_NEAR(kink.value, std::numbers::sqrt2 / 2.0, 1e-15);
  EXPECT_FALSE(link_derivative(LinkFamily::Laplace, 0.1).at_kink);
}

TEST(Link, StrictlyInsideUnitIntervalAndMonotone) {
  for (auto f : kFamilies) {
    double prev = 0.0;
    // Beyond |t| ~ 8 the probit CDF rounds to 0 or 1 in double precision.
    for (double t = -8.0; t <= 8.0; t += 0.01) {
      const double p = link_eval(f, t);
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
      EXPECT_GE(p, prev);
      prev = p;
    }
  }
}

TEST(Link, DerivativeMatchesFiniteDifference) {
  const double h = 1e-5;
  for (auto f : kFamilies) {
    for (double t = -5.0; t <= 5.0001; t += 0.05) {
      if (f == LinkFamily::Laplace && std::fabs(t) < 1e-3) continue;
      // Difference on the side where F is small; F(t) = 1 - F(-t) for all
      // three links, and 1 - F near 1 loses digits to cancellation.
      const double fd = t <= 0.0 ? (link_eval(f, t + h) - link_eval(f, t - h)) / (2 * h)
                                 : (link_eval(f, -t + h) - link_eval(f, -t - h)) / (2 * h);
      const double an = link_derivative(f, t).value;
      EXPECT_LE(std::fabs(fd - an), 1e-6 * std::fabs(an)) << to_string(f) << " t=" << t;
    }
  }
}

TEST(HWeight, TwoFormsAgree) {
  for (double p : {1e-8, 1e-5, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-8}) {
    for (int d : {0, 1}) {
      const double alt = (d - p) / (p * (1.0 - p));
      EXPECT_LE(std::fabs(h_weight(d, p) - alt), 1e-12 * std::fabs(alt)) << p << " " << d;
    }
  }
  EXPECT_THROW(h_weight(1, 0.0), DegenerateProbabilityError);
  EXPECT_THROW(h_weight(0, 1.0), DegenerateProbabilityError);
}

TEST(Score, WorkedExamples) {
  Eigen::VectorXd x1(1), g1(1);
  x1 << 1.0;
  g1 << 0.0;
  EXPECT_NEAR(score_contribution(LinkFamily::Logit, 1, x1, g1)(0), 0.5, 1e-15);

  Eigen::VectorXd x2(2), g2(2);
  x2 << 1.0, 2.0;
  g2 << std::log(9.0), 0.0;  // p = .9
  const auto s = score_contribution(LinkFamily::Logit, 0, x2, g2);
  EXPECT_NEAR(s(0), -0.9, 1e-12);
  EXPECT_NEAR(s(1), -1.8, 1e-12);
}

TEST(FitMle, IndependentTreatment) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nx;
  const std::size_t n = 400;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  std::vector<int> d(n);
  double treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = nx(rng);
    d[i] = i % 3 == 0;
    y(i) = nx(rng);
    treated += d[i];
  }
  Sample s(y, d, x);
  auto fit = fit_mle(s, LinkFamily::Logit);
  ASSERT_TRUE(fit.converged);
  const double frac = treated / n;
  // The slope is free, so only the score condition pins gamma exactly; the
  // intercept sits near the logit of the treated share.
  EXPECT_NEAR(fit.gamma_hat(0), std::log(frac / (1 - frac)), 0.05);
  EXPECT_NEAR(fit.gamma_hat(1), 0.0, 0.25);
  const Eigen::MatrixXd sm = score_matrix(s, fit);
  EXPECT_LE((sm.colwise().sum() / static_cast<double>(n)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(FitMle, InterceptOnlyMatchesTreatedShare) {
  const std::size_t n = 50;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(n, 1);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  std::vector<int> d(n, 0);
  for (std::size_t i = 0; i < 20; ++i) d[i] = 1;
  Sample s(y, d, x);
  for (auto f : kFamilies) {
    auto fit = fit_mle(s, f);
    ASSERT_TRUE(fit.converged) << to_string(f);
    EXPECT_NEAR(fit.probs[0], 0.4, 1e-8) << to_string(f);
  }
}

TEST(FitMle, MatchesGridSearch) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto s = logit_data(seed, 40, 0.3, 1.0);
    auto fit = fit_mle(s, LinkFamily::Logit);
    ASSERT_TRUE(fit.converged) << "seed " << seed;
    const auto [a, b] = grid_argmax(s);
    EXPECT_LE(std::fabs(fit.gamma_hat(0) - a), 2e-3) << "seed " << seed;
    EXPECT_LE(std::fabs(fit.gamma_hat(1) - b), 2e-3) << "seed " << seed;
    EXPECT_LE(fit.grad_norm, 1e-8);
    EXPECT_GE(fit.loglik, fit.loglik_init);
    EXPECT_NEAR(fit.loglik, oracle_loglik(s, fit.gamma_hat(0), fit.gamma_hat(1)), 1e-9);
  }
}

TEST(FitMle, ProbitAndLaplaceConverge) {
  auto s = logit_data(99, 300, -0.2, 0.8);
  for (auto f : {LinkFamily::Probit, LinkFamily::Laplace}) {
    auto fit = fit_mle(s, f);
    EXPECT_TRUE(fit.converged) << to_string(f);
    EXPECT_GE(fit.loglik, fit.loglik_init);
    for (double p : fit.probs) {
      EXPECT_GT(p, 0.0);
      EXPECT_LT(p, 1.0);
    }
  }
}

TEST(FitMle, PerfectSeparation) {
  const std::size_t n = 30;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  std::vector<int> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = static_cast<double>(i) - 14.5;
    d[i] = x(i, 1) > 0.0;
  }
  Sample s(y, d, x);
  for (auto f : kFamilies) EXPECT_THROW(fit_mle(s, f), SeparationError) << to_string(f);
}

TEST(FitMle, MaxIterReportsNotConverged) {
  auto s = logit_data(5, 200, 0.1, 1.5);
  FitOptions o;
  o.max_iter = 1;
  auto fit = fit_mle(s, LinkFamily::Logit, std::nullopt, o);
  EXPECT_FALSE(fit.converged);
  ASSERT_FALSE(fit.warnings.empty());
  EXPECT_THROW(fit_mle(s, LinkFamily::Logit, Eigen::VectorXd::Zero(3)), PreconditionError);
}
