#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ipwtt/estimators.hpp"

using namespace ipwtt;

namespace {

/// A sample whose only role is to carry covariate and outcome columns.
Sample carrier(const std::vector<double>& xcol, std::vector<double> y = {}) {
  const auto n = static_cast<Eigen::Index>(xcol.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd yy(n);
  std::vector<int> d(xcol.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = xcol[static_cast<std::size_t>(i)];
    yy(i) = y.empty() ? 0.0 : y[static_cast<std::size_t>(i)];
    d[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
  }
  return Sample(yy, d, x);
}

std::vector<double> heavy_draws(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> z(n);
  for (auto& v : z) {
    const double s = u(rng) < 0.5 ? -1.0 : 1.0;
    v = s * std::pow(1.0 - u(rng), -1.0 / 1.5);
  }
  return z;
}

}  // namespace

TEST(ComputeZ, WorkedExamples) {
  Eigen::VectorXd y(3);
  y << 2.0, 1.0, 0.0;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 1);
  Sample s(y, {1, 0, 1}, x);
  const std::vector<double> p{0.5, 0.9, 0.01};
  auto zs = compute_z(s, p);
  EXPECT_DOUBLE_EQ(zs.z[0], 4.0);
  EXPECT_NEAR(zs.z[1], -10.0, 1e-12);
  EXPECT_EQ(zs.z[2], 0.0);
  const std::vector<double> bad{0.5, 1.0, 0.2};
  EXPECT_THROW(compute_z(s, bad), DegenerateProbabilityError);
}

TEST(Fractiles, TrimmingSchedule) {
  EXPECT_EQ(fractile_k(100), 1u);
  EXPECT_EQ(fractile_k(250), 1u);
  EXPECT_EQ(fractile_k(500), 2u);
  EXPECT_EQ(fractile_k(1000), 2u);
  EXPECT_EQ(fractile_k(2), 1u);
  EXPECT_THROW(fractile_k(1), FractileError);
}

TEST(Fractiles, TrimByXSchedule) {
  EXPECT_EQ(fractile_x(100), 43u);
  EXPECT_EQ(fractile_x(250), 91u);
  EXPECT_EQ(fractile_x(500), 161u);
  EXPECT_EQ(fractile_x(1000), 290u);
}

TEST(Fractiles, TailAndPropensity) {
  EXPECT_EQ(fractile_m_base(100), 5u);
  EXPECT_EQ(fractile_m_base(2), 2u);
  EXPECT_EQ(fractile_p(100, 0.25), 5u);
  EXPECT_EQ(fractile_p(100, 2.0), 43u);
  EXPECT_EQ(fractile_p_half(1), 1u);
  EXPECT_EQ(fractile_p_half(2), 1u);
  EXPECT_EQ(fractile_p_half(5), 3u);
  EXPECT_NEAR(default_nu(100), 1.5272, 1e-4);
}

TEST(Untrimmed, Means) {
  EXPECT_DOUBLE_EQ(estimate_untrimmed(make_zseries({1, 2, 3})).theta_hat, 2.0);
  EXPECT_DOUBLE_EQ(estimate_untrimmed(make_zseries(std::vector<double>(7, 3.25))).theta_hat, 3.25);
  EXPECT_DOUBLE_EQ(estimate_untrimmed(make_zseries({-5, 5})).theta_hat, 0.0);
  EXPECT_EQ(estimate_untrimmed(make_zseries({-5, 5})).trimmed_count, 0u);
}

TEST(TrimByZ, HandComputed) {
  auto zs = make_zseries({1, 2, 3, 4, 10});
  EXPECT_DOUBLE_EQ(zs.mean_z, 4.0);
  EXPECT_EQ(zs.centered, (std::vector<double>{-3, -2, -1, 0, 6}));
  auto r = estimate_tz(zs, 1);
  EXPECT_DOUBLE_EQ(r.threshold, 6.0);
  EXPECT_DOUBLE_EQ(r.theta_hat, 2.5);
  EXPECT_EQ(r.trimmed_count, 1u);
  EXPECT_DOUBLE_EQ(r.trimmed_fraction, 0.2);
}

TEST(TrimByZ, OnlyCenteredMedianSurvives) {
  auto r = estimate_tz(make_zseries({1, 2, 3, 4, 5}), 4);
  EXPECT_DOUBLE_EQ(r.theta_hat, 3.0);
  EXPECT_EQ(r.trimmed_count, 4u);
}

TEST(TrimByZ, TiesShareFate) {
  // |-a| and |a| tie at the threshold, so both are trimmed.
  auto tied = estimate_tz(make_zseries({-2, 0, 2}), 1);
  EXPECT_EQ(tied.trimmed_count, 2u);
  EXPECT_FALSE(tied.diagnostics.empty());
  // Break the tie and exactly one goes.
  auto distinct = estimate_tz(make_zseries({-2, 0, 2.5}), 1);
  EXPECT_EQ(distinct.trimmed_count, 1u);
  EXPECT_TRUE(distinct.diagnostics.empty());
}

TEST(TrimByZ, FractileBounds) {
  auto zs = make_zseries({1, 2, 3});
  EXPECT_THROW(estimate_tz(zs, 0), FractileError);
  EXPECT_THROW(estimate_tz(zs, 3), FractileError);
}

TEST(TrimByX, Fixed) {
  auto s = carrier({0.5, -2.0, 1.0});
  auto zs = make_zseries({3, 30, 6});
  auto r = estimate_tx_fixed(s, zs, default_nu(100), 1);
  EXPECT_DOUBLE_EQ(r.theta_hat, 3.0);
  EXPECT_EQ(r.trimmed_count, 1u);
  EXPECT_DOUBLE_EQ(estimate_tx_fixed(s, zs, INFINITY, 1).theta_hat, zs.mean_z);
  auto none = estimate_tx_fixed(s, zs, 0.0, 1);
  EXPECT_EQ(none.theta_hat, 0.0);
  EXPECT_EQ(none.trimmed_count, 3u);
  EXPECT_THROW(estimate_tx_fixed(s, zs, 1.0, 2), DomainError);
}

TEST(TrimByX, AdaptiveKeepsThresholdStatistic) {
  auto s = carrier({5, -4, 3, 2, -1});
  auto zs = make_zseries({10, 1, 1, 1, 1});
  auto r = estimate_tx_adaptive(s, zs, 2, 1);
  EXPECT_DOUBLE_EQ(r.threshold, 4.0);
  EXPECT_EQ(r.trimmed_count, 1u);
  EXPECT_DOUBLE_EQ(r.theta_hat, 4.0 / 5.0);
  EXPECT_EQ(estimate_tx_adaptive(s, zs, 1, 1).trimmed_count, 0u);
  auto all = estimate_tx_adaptive(s, zs, 5, 1);
  EXPECT_DOUBLE_EQ(all.threshold, 1.0);
  EXPECT_EQ(all.trimmed_count, 4u);
  EXPECT_THROW(estimate_tx_adaptive(s, zs, 6, 1), FractileError);
}

TEST(TrimByP, DoubleInequality) {
  auto zs = make_zseries({1, 2, 3, 4, 5});
  const std::vector<double> p{0.9, 0.8, 0.5, 0.2, 0.1};
  auto r = estimate_tp(zs, p, 2);
  EXPECT_EQ(r.trimmed_count, 2u);
  EXPECT_DOUBLE_EQ(r.theta_hat, (2.0 + 3.0 + 4.0) / 5.0);
  EXPECT_EQ(estimate_tp(zs, p, 1).trimmed_count, 0u);
  EXPECT_DOUBLE_EQ(estimate_tp(zs, p, 1).theta_hat, zs.mean_z);
  const std::vector<double> flat(5, 0.4);
  EXPECT_EQ(estimate_tp(zs, flat, 2).trimmed_count, 0u);
  EXPECT_THROW(estimate_tp(zs, p, 3), FractileError);
}

TEST(TrimByY, KeepsThresholdStatistic) {
  auto s = carrier({0, 0, 0}, {10, -1, 2});
  auto zs = make_zseries({7, 8, 9});
  EXPECT_EQ(estimate_ty(s, zs, 1).trimmed_count, 0u);
  auto r = estimate_ty(s, zs, 2);
  EXPECT_DOUBLE_EQ(r.threshold, 2.0);
  EXPECT_EQ(r.trimmed_count, 1u);
  EXPECT_DOUBLE_EQ(r.theta_hat, 17.0 / 3.0);
  auto zero = carrier({0, 0, 0}, {0, 0, 0});
  EXPECT_DOUBLE_EQ(estimate_ty(zero, zs, 2).theta_hat, zs.mean_z);
}

TEST(ZSeriesProperties, CenteringAndOrder) {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    auto zs = make_zseries(heavy_draws(rng, 50 + rep));
    const double maxz = std::fabs(*std::max_element(zs.z.begin(), zs.z.end(), [](double a, double b) {
      return std::fabs(a) < std::fabs(b);
    }));
    const double sum = std::accumulate(zs.centered.begin(), zs.centered.end(), 0.0);
    EXPECT_LE(std::fabs(sum), 1e-9 * (1.0 + maxz));
    auto perm = zs.abs_order;
    std::sort(perm.begin(), perm.end());
    for (std::size_t i = 0; i < perm.size(); ++i) ASSERT_EQ(perm[i], i);
    for (std::size_t j = 1; j < zs.n(); ++j) EXPECT_GE(zs.abs_order_stat(j - 1), zs.abs_order_stat(j));
  }
}

TEST(TrimByZProperties, ExactlyKTrimmedAndSurvivorMean) {
  std::mt19937_64 rng(4);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 20 + static_cast<std::size_t>(rep);
    auto zs = make_zseries(heavy_draws(rng, n));
    const std::size_t k = 1 + static_cast<std::size_t>(rep) % 5;
    auto r = estimate_tz(zs, k);
    EXPECT_EQ(r.trimmed_count, k);
    double s = 0.0;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (std::fabs(zs.centered[i]) < r.threshold) s += zs.z[i], ++kept;
    EXPECT_EQ(kept, n - k);
    EXPECT_NEAR(r.theta_hat, s / static_cast<double>(kept), 1e-12 * (1.0 + std::fabs(r.theta_hat)));
  }
}

TEST(TrimByZProperties, ScaleEquivariance) {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 100; ++rep) {
    auto z = heavy_draws(rng, 100);
    auto base = estimate_tz(make_zseries(z), 2);
    for (double c : {2.0, 0.125}) {
      auto zc = z;
      for (auto& v : zc) v *= c;
      EXPECT_EQ(estimate_tz(make_zseries(zc), 2).theta_hat, c * base.theta_hat);
    }
    const double c = 3.7;
    auto zc = z;
    for (auto& v : zc) v *= c;
    auto zs_c = make_zseries(zc);
    EXPECT_NEAR(estimate_tz(zs_c, 2).theta_hat, c * base.theta_hat, 1e-12 * c * (1 + std::fabs(base.theta_hat)));
    EXPECT_EQ(estimate_tz(zs_c, 2).trimmed_count, base.trimmed_count);
  }
}

TEST(EstimatorProperties, PermutationInvariance) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 60;
    auto z = heavy_draws(rng, n);
    std::vector<double> xcol(n), ycol(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      xcol[i] = nd(rng);
      ycol[i] = nd(rng);
      p[i] = 0.05 + 0.9 * std::fabs(std::sin(static_cast<double>(i * 7 + rep)));
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto permute = [&](const std::vector<double>& v) {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = v[idx[i]];
      return out;
    };
    auto s1 = carrier(xcol, ycol);
    auto s2 = carrier(permute(xcol), permute(ycol));
    auto z1 = make_zseries(z), z2 = make_zseries(permute(z));
    const auto p2 = permute(p);
    const auto tol = [](double v) { return 1e-12 * (1.0 + std::fabs(v)); };
    double a = estimate_tz(z1, 3).theta_hat;
    EXPECT_NEAR(estimate_tz(z2, 3).theta_hat, a, tol(a));
    a = estimate_tx_fixed(s1, z1, 1.0, 1).theta_hat;
    EXPECT_NEAR(estimate_tx_fixed(s2, z2, 1.0, 1).theta_hat, a, tol(a));
    a = estimate_tx_adaptive(s1, z1, 10, 1).theta_hat;
    EXPECT_NEAR(estimate_tx_adaptive(s2, z2, 10, 1).theta_hat, a, tol(a));
    a = estimate_tp(z1, p, 4).theta_hat;
    EXPECT_NEAR(estimate_tp(z2, p2, 4).theta_hat, a, tol(a));
    a = estimate_ty(s1, z1, 3).theta_hat;
    EXPECT_NEAR(estimate_ty(s2, z2, 3).theta_hat, a, tol(a));
  }
}
