#ifndef IPWTT_ESTIMATORS_HPP
#define IPWTT_ESTIMATORS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipwtt/error.hpp"
#include "ipwtt/propensity.hpp"
#include "ipwtt/sample.hpp"

namespace ipwtt {

/// Inverse-probability-weighted values Z_i = h_i * Y_i, their mean and the
/// mean-centered values ordered by absolute size.
struct ZSeries {
  std::vector<double> z;
  double mean_z = 0.0;
  std::vector<double> centered;
  /// Indices sorted by |centered| descending; ties keep the lower index first.
  std::vector<std::size_t> abs_order;

  std::size_t n() const noexcept { return z.size(); }
  /// |centered| of the j-th largest (0-based).
  double abs_order_stat(std::size_t j) const { return std::fabs(centered[abs_order[j]]); }
};

inline ZSeries make_zseries(std::vector<double> z) {
  ZSeries zs;
  zs.z = std::move(z);
  const std::size_t n = zs.z.size();
  if (n == 0) throw DomainError("empty Z series");
  zs.mean_z = std::accumulate(zs.z.begin(), zs.z.end(), 0.0) / static_cast<double>(n);
  zs.centered.resize(n);
  for (std::size_t i = 0; i < n; ++i) zs.centered[i] = zs.z[i] - zs.mean_z;
  zs.abs_order.resize(n);
  std::iota(zs.abs_order.begin(), zs.abs_order.end(), std::size_t{0});
  std::stable_sort(zs.abs_order.begin(), zs.abs_order.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(zs.centered[a]) > std::fabs(zs.centered[b]);
  });
  return zs;
}

/// Z_i = h(d_i, p_i) * y_i with the supplied propensities.
inline ZSeries compute_z(const Sample& sample, std::span<const double> probs) {
  if (probs.size() != sample.n()) throw DomainError("compute_z: probs length differs from n");
  std::vector<double> z(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) z[i] = h_weight(sample.d(i), probs[i]) * sample.y(i);
  return make_zseries(std::move(z));
}

inline ZSeries compute_z(const Sample& sample, const PropensityFit& fit) {
  return compute_z(sample, fit.probs);
}

// ---------------------------------------------------------------------------
// Fractiles. The integer bracket is round-half-away-from-zero.

inline std::size_t round_count(double v) {
  return v <= 0.0 ? 0 : static_cast<std::size_t>(std::llround(v));
}

/// Trimming fractile k_n = max{1, [lambda_k (ln n)^(1-iota)]}, capped at n-1.
inline std::size_t fractile_k(std::size_t n, double lambda_k = 0.25, double iota = 1e-10) {
  if (n < 2) throw FractileError("fractile_k: n must be at least 2");
  const double ln_n = std::log(static_cast<double>(n));
  const std::size_t k = std::max<std::size_t>(1, round_count(lambda_k * std::pow(ln_n, 1.0 - iota)));
  return std::min(k, n - 1);
}

/// Adaptive trim-by-X fractile [2n / ln n].
inline std::size_t fractile_x(std::size_t n) {
  if (n < 2) throw FractileError("fractile_x: n must be at least 2");
  const double v = 2.0 * static_cast<double>(n) / std::log(static_cast<double>(n));
  return std::clamp<std::size_t>(round_count(v), 1, n);
}

/// Base tail fractile max{2, [ln n]}; m_n(phi) = [phi ln n].
inline std::size_t fractile_m_base(std::size_t n) {
  return std::max<std::size_t>(2, round_count(std::log(static_cast<double>(n))));
}

/// Trim-by-p(X) fractile [lambda_p n / ln n], at least 1.
inline std::size_t fractile_p(std::size_t n, double lambda_p) {
  const double v = lambda_p * static_cast<double>(n) / std::log(static_cast<double>(n));
  return std::max<std::size_t>(1, round_count(v));
}

/// Trim-by-p(X) fractile matching 2 k_p = k_n.
inline std::size_t fractile_p_half(std::size_t k_n) {
  return std::max<std::size_t>(1, round_count(static_cast<double>(k_n) / 2.0));
}

/// Fixed trim-by-X threshold ln(ln n).
inline double default_nu(std::size_t n) { return std::log(std::log(static_cast<double>(n))); }

// ---------------------------------------------------------------------------
// Point estimators

enum class EstimatorTag { Untrimmed, TZ, TZO, TXFixed, TXAdaptive, TP, TY };

inline std::string_view to_string(EstimatorTag t) {
  switch (t) {
    case EstimatorTag::Untrimmed: return "untrimmed";
    case EstimatorTag::TZ: return "tz";
    case EstimatorTag::TZO: return "tzo";
    case EstimatorTag::TXFixed: return "tx";
    case EstimatorTag::TXAdaptive: return "tx_adaptive";
    case EstimatorTag::TP: return "tp";
    case EstimatorTag::TY: return "ty";
  }
  return "?";
}

struct EstimateReport {
  EstimatorTag tag = EstimatorTag::Untrimmed;
  double theta_hat = 0.0;
  /// Bias correction added to theta_hat; 0 when none was applied.
  double bias_correction = 0.0;
  std::size_t n = 0;
  std::size_t trimmed_count = 0;
  double trimmed_fraction = 0.0;
  /// Trimming threshold on the criterion variable (|Z - mean|, |X|, p, |Y|).
  double threshold = 0.0;
  std::vector<std::string> diagnostics;
};

namespace detail {

inline EstimateReport make_report(EstimatorTag tag, double theta, std::size_t n,
                                  std::size_t trimmed, double threshold) {
  EstimateReport r;
  r.tag = tag;
  r.theta_hat = theta;
  r.n = n;
  r.trimmed_count = trimmed;
  r.trimmed_fraction = static_cast<double>(trimmed) / static_cast<double>(n);
  r.threshold = threshold;
  return r;
}

/// The k-th largest (1-based) of `values`.
inline double kth_largest(std::vector<double> values, std::size_t k) {
  auto nth = values.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(values.begin(), nth, values.end(), std::greater<>{});
  return *nth;
}

/// (1/n) sum of z_i over units whose criterion is <= threshold.
inline EstimateReport keep_at_most(EstimatorTag tag, const ZSeries& zs,
                                   const std::vector<double>& criterion, double threshold) {
  double sum = 0.0;
  std::size_t trimmed = 0;
  for (std::size_t i = 0; i < zs.n(); ++i) {
    if (criterion[i] <= threshold) sum += zs.z[i];
    else ++trimmed;
  }
  return make_report(tag, sum / static_cast<double>(zs.n()), zs.n(), trimmed, threshold);
}

inline std::vector<double> abs_column(const Sample& s, std::size_t col) {
  if (col >= s.k()) throw DomainError("trim column " + std::to_string(col) + " out of range");
  std::vector<double> v(s.n());
  for (std::size_t i = 0; i < s.n(); ++i) v[i] = std::fabs(s.x(i, col));
  return v;
}

}  // namespace detail

/// Untrimmed IPW mean (1/n) sum Z_i.
inline EstimateReport estimate_untrimmed(const ZSeries& zs) {
  return detail::make_report(EstimatorTag::Untrimmed, zs.mean_z, zs.n(), 0, 0.0);
}

/// Tail-trimmed estimator: units with |Z_i - mean| strictly below the k-th
/// largest |Z_j - mean| are summed and scaled by 1/(n-k). Ties at the
/// threshold are all trimmed.
inline EstimateReport estimate_tz(const ZSeries& zs, std::size_t k) {
  const std::size_t n = zs.n();
  if (k < 1 || k >= n)
    throw FractileError("estimate_tz: need 1 <= k < n (k=" + std::to_string(k) +
                        ", n=" + std::to_string(n) + ")");
  const double threshold = zs.abs_order_stat(k - 1);
  double sum = 0.0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::fabs(zs.centered[i]) < threshold) {
      sum += zs.z[i];
      ++kept;
    }
  }
  auto r = detail::make_report(EstimatorTag::TZ, sum / static_cast<double>(n - k), n, n - kept,
                               threshold);
  if (n - kept != k) r.diagnostics.push_back("ties at the trimming threshold");
  return r;
}

/// Trim by |X| against a fixed threshold nu, scale 1/n.
inline EstimateReport estimate_tx_fixed(const Sample& sample, const ZSeries& zs, double nu,
                                        std::size_t trim_col) {
  return detail::keep_at_most(EstimatorTag::TXFixed, zs, detail::abs_column(sample, trim_col), nu);
}

/// Trim by |X| against its k_x-th largest value (kept), scale 1/n.
inline EstimateReport estimate_tx_adaptive(const Sample& sample, const ZSeries& zs,
                                           std::size_t k_x, std::size_t trim_col) {
  if (k_x < 1 || k_x > zs.n()) throw FractileError("estimate_tx_adaptive: need 1 <= k_x <= n");
  auto crit = detail::abs_column(sample, trim_col);
  const double threshold = detail::kth_largest(crit, k_x);
  return detail::keep_at_most(EstimatorTag::TXAdaptive, zs, crit, threshold);
}

/// Trim by the propensity: keep p_(n-k_p+1) <= p_i <= p_(k_p), scale 1/n.
inline EstimateReport estimate_tp(const ZSeries& zs, std::span<const double> probs,
                                  std::size_t k_p) {
  const std::size_t n = zs.n();
  if (probs.size() != n) throw DomainError("estimate_tp: probs length differs from n");
  if (k_p < 1 || 2 * k_p > n) throw FractileError("estimate_tp: need 1 <= k_p <= n/2");
  std::vector<double> sorted(probs.begin(), probs.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>{});
  const double upper = sorted[k_p - 1];
  const double lower = sorted[n - k_p];
  double sum = 0.0;
  std::size_t trimmed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (lower <= probs[i] && probs[i] <= upper) sum += zs.z[i];
    else ++trimmed;
  }
  auto r = detail::make_report(EstimatorTag::TP, sum / static_cast<double>(n), n, trimmed, upper);
  r.diagnostics.push_back("lower threshold " + detail::format_real(lower));
  return r;
}

/// Trim by |Y| against its k_y-th largest value (kept), scale 1/n.
inline EstimateReport estimate_ty(const Sample& sample, const ZSeries& zs, std::size_t k_y) {
  if (k_y < 1 || k_y > zs.n()) throw FractileError("estimate_ty: need 1 <= k_y <= n");
  std::vector<double> crit(sample.n());
  for (std::size_t i = 0; i < sample.n(); ++i) crit[i] = std::fabs(sample.y(i));
  const double threshold = detail::kth_largest(crit, k_y);
  return detail::keep_at_most(EstimatorTag::TY, zs, crit, threshold);
}

}  // namespace ipwtt

#endif  // IPWTT_ESTIMATORS_HPP
