#ifndef IPWTT_TAIL_FIT_HPP
#define IPWTT_TAIL_FIT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ipwtt/error.hpp"
#include "ipwtt/estimators.hpp"

namespace ipwtt {

enum class TailSide { Left, Right };

struct Tails {
  std::vector<double> neg;  // magnitudes of negative centered values, descending
  std::vector<double> pos;  // positive centered values, descending
};

/// Splits centered values into the two tails. Zeros belong to neither.
inline Tails split_tails(std::span<const double> centered) {
  Tails t;
  for (double v : centered) {
    if (v < 0.0) t.neg.push_back(-v);
    else if (v > 0.0) t.pos.push_back(v);
  }
  std::sort(t.neg.begin(), t.neg.end(), std::greater<>{});
  std::sort(t.pos.begin(), t.pos.end(), std::greater<>{});
  return t;
}

inline Tails split_tails(const ZSeries& zs) { return split_tails(zs.centered); }

namespace detail {

/// Hill inverse index from precomputed logs of a descending tail.
inline double hill_inverse_from_logs(std::span<const double> logs, std::size_t m) {
  const double anchor = logs[m - 1];
  double s = 0.0;
  for (std::size_t j = 0; j + 1 < m; ++j) s += logs[j] - anchor;
  return s / static_cast<double>(m - 1);
}

inline void check_hill_input(std::span<const double> tail, std::size_t m) {
  if (m < 2) throw FractileError("hill_index: m must be at least 2");
  if (tail.size() < m)
    throw FractileError("hill_index: tail has " + std::to_string(tail.size()) +
                        " values, m = " + std::to_string(m));
  if (!(tail[m - 1] > 0.0)) throw DomainError("hill_index: tail values must be positive");
}

inline std::vector<double> logs_of(std::span<const double> tail, std::size_t m) {
  std::vector<double> out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = std::log(tail[j]);
  return out;
}

}  // namespace detail

/// Hill estimate of the tail index from the m largest values of a
/// descending positive tail.
inline double hill_index(std::span<const double> tail, std::size_t m) {
  detail::check_hill_input(tail, m);
  const double inv = detail::hill_inverse_from_logs(detail::logs_of(tail, m), m);
  if (!(inv > 0.0)) throw DegenerateTailError("hill_index: top-m tail values are all equal");
  return 1.0 / inv;
}

/// Hall's scale estimate (m/n) * anchor^kappa.
inline double hall_scale(double anchor, std::size_t m, std::size_t n, double kappa_hat) {
  return static_cast<double>(m) / static_cast<double>(n) * std::pow(anchor, kappa_hat);
}

struct TailFit {
  TailSide side = TailSide::Right;
  std::size_t m = 0;
  double kappa_hat = 0.0;
  double d_hat = 0.0;
  double order_stat_m = 0.0;
};

inline TailFit fit_tail(std::span<const double> tail, std::size_t m, std::size_t n,
                        TailSide side) {
  const double kappa = hill_index(tail, m);
  return {side, m, kappa, hall_scale(tail[m - 1], m, n, kappa), tail[m - 1]};
}

namespace detail {

/// d^(1/kappa) kappa/(kappa-1) (k/n)^(1-1/kappa): the mean of one Pareto tail
/// beyond its k/n quantile.
inline double tail_mass_mean(double kappa, double d, double k_over_n) {
  return std::pow(d, 1.0 / kappa) * kappa / (kappa - 1.0) * std::pow(k_over_n, 1.0 - 1.0 / kappa);
}

}  // namespace detail

/// Bias of the tail-trimmed mean implied by Pareto tails with the given
/// indices and scales. Tail 1 is the left tail, tail 2 the right.
inline double bias_approximation(std::size_t n, std::size_t k, double kappa1, double kappa2,
                                 double d1, double d2) {
  if (!(kappa1 > 1.0) || !(kappa2 > 1.0))
    throw InfeasibleBiasError("bias: tail index must exceed 1");
  if (!(d1 > 0.0) || !(d2 > 0.0)) throw DomainError("bias: tail scales must be positive");
  if (k >= n) throw FractileError("bias: need k < n");
  const double a = static_cast<double>(k) / static_cast<double>(n);
  const double lead = static_cast<double>(n) / static_cast<double>(n - k);
  return lead * (detail::tail_mass_mean(kappa2, d2, a) - detail::tail_mass_mean(kappa1, d1, a));
}

inline double bias_estimate(std::size_t n, std::size_t k, const TailFit& left,
                            const TailFit& right) {
  return bias_approximation(n, k, left.kappa_hat, right.kappa_hat, left.d_hat, right.d_hat);
}

struct PhiRange {
  double lo = 2.0;
  double hi = 16.0;
};

struct BiasEstimate {
  double value = 0.0;
  double phi_star = 0.0;
  std::size_t m = 0;
  TailFit left;
  TailFit right;
  bool feasible = false;
  std::size_t feasible_count = 0;
};

/// Candidate tail fractiles [phi ln n] for phi in the range, as integers.
inline std::pair<std::size_t, std::size_t> phi_fractile_bounds(std::size_t n, PhiRange range) {
  const double ln_n = std::log(static_cast<double>(n));
  const std::size_t lo = std::max<std::size_t>(2, round_count(range.lo * ln_n));
  const std::size_t hi = round_count(range.hi * ln_n);
  return {lo, hi};
}

/// Searches the tail fractile m for the bias estimate whose corrected value
/// theta_tz + B is closest to the untrimmed mean. A candidate needs m values
/// in each tail, non-degenerate Hill fits, and both indices above 1. Ties
/// go to the smaller m. No feasible candidate gives feasible = false, value 0.
inline BiasEstimate select_phi(const ZSeries& zs, std::size_t k, PhiRange range = {}) {
  const std::size_t n = zs.n();
  const double theta_tz = estimate_tz(zs, k).theta_hat;
  const double theta_untrimmed = zs.mean_z;

  const Tails tails = split_tails(zs);
  const auto [m_lo, m_hi] = phi_fractile_bounds(n, range);
  const std::size_t m_cap = std::min({m_hi, tails.neg.size(), tails.pos.size()});

  BiasEstimate best;
  if (m_lo > m_cap) return best;
  const auto neg_logs = detail::logs_of(tails.neg, m_cap);
  const auto pos_logs = detail::logs_of(tails.pos, m_cap);

  double best_gap = 0.0;
  for (std::size_t m = m_lo; m <= m_cap; ++m) {
    const double inv_l = detail::hill_inverse_from_logs(neg_logs, m);
    const double inv_r = detail::hill_inverse_from_logs(pos_logs, m);
    if (!(inv_l > 0.0) || !(inv_r > 0.0)) continue;
    const double kl = 1.0 / inv_l, kr = 1.0 / inv_r;
    if (!(kl > 1.0) || !(kr > 1.0)) continue;
    const TailFit left{TailSide::Left, m, kl, hall_scale(tails.neg[m - 1], m, n, kl),
                       tails.neg[m - 1]};
    const TailFit right{TailSide::Right, m, kr, hall_scale(tails.pos[m - 1], m, n, kr),
                        tails.pos[m - 1]};
    const double b = bias_estimate(n, k, left, right);
    if (!std::isfinite(b)) continue;
    ++best.feasible_count;
    const double gap = std::fabs(theta_tz + b - theta_untrimmed);
    if (!best.feasible || gap < best_gap) {
      best.feasible = true;
      best.value = b;
      best.m = m;
      best.left = left;
      best.right = right;
      best_gap = gap;
    }
  }
  if (best.feasible) best.phi_star = static_cast<double>(best.m) / std::log(static_cast<double>(n));
  return best;
}

/// Returns theta_tz + bias when that is strictly closer to the untrimmed
/// mean than theta_tz, else theta_tz.
inline double switch_rule(double theta_tz, double theta_untrimmed, double bias) {
  const double corrected = theta_tz + bias;
  return std::fabs(corrected - theta_untrimmed) < std::fabs(theta_tz - theta_untrimmed)
             ? corrected
             : theta_tz;
}

struct TzoResult {
  EstimateReport report;
  BiasEstimate bias;
};

inline TzoResult estimate_tzo_full(const ZSeries& zs, std::size_t k, PhiRange range = {}) {
  TzoResult out;
  out.report = estimate_tz(zs, k);
  out.report.tag = EstimatorTag::TZO;
  out.bias = select_phi(zs, k, range);
  if (!out.bias.feasible) {
    out.report.diagnostics.push_back("no feasible tail fractile; bias correction skipped");
    return out;
  }
  const double theta = out.report.theta_hat;
  const double chosen = switch_rule(theta, zs.mean_z, out.bias.value);
  if (chosen != theta) {
    out.report.bias_correction = out.bias.value;
    out.report.theta_hat = chosen;
  } else {
    out.report.diagnostics.push_back("bias correction rejected by the switch rule");
  }
  return out;
}

/// Bias-corrected tail-trimmed estimator with the optimal-phi switch rule.
inline EstimateReport estimate_tzo(const ZSeries& zs, std::size_t k, PhiRange range = {}) {
  return estimate_tzo_full(zs, k, range).report;
}

}  // namespace ipwtt

#endif  // IPWTT_TAIL_FIT_HPP
