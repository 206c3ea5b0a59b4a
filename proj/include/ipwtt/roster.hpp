#ifndef IPWTT_ROSTER_HPP
#define IPWTT_ROSTER_HPP

#include <cstddef>
#include <cstdio>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ipwtt/error.hpp"
#include "ipwtt/estimators.hpp"
#include "ipwtt/sample.hpp"
#include "ipwtt/tail_fit.hpp"

namespace ipwtt {

/// Fractile tuning shared by every estimator in a run. Unset optionals
/// fall back to the sample-size defaults.
struct FractileParams {
  double lambda_k = 0.25;
  double iota = 1e-10;
  PhiRange phi{};
  std::optional<double> nu;
  std::optional<std::size_t> k_x;
  std::optional<std::size_t> k_p;
  std::optional<std::size_t> k_y;
};

/// Which fractile an estimator uses.
enum class FractileRule { Default, TrimK, LambdaP };

struct EstimatorSpec {
  EstimatorTag tag = EstimatorTag::Untrimmed;
  FractileRule rule = FractileRule::Default;
  double lambda_p = 0.0;

  std::string id() const;
  std::string label() const;
};

namespace detail {
inline std::string short_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}
}  // namespace detail

inline std::string EstimatorSpec::id() const {
  switch (tag) {
    case EstimatorTag::Untrimmed: return "untrimmed";
    case EstimatorTag::TZ: return "tz";
    case EstimatorTag::TZO: return "tzo";
    case EstimatorTag::TXFixed: return "tx";
    case EstimatorTag::TXAdaptive: return rule == FractileRule::TrimK ? "tx_kn" : "tx_kx";
    case EstimatorTag::TP:
      return rule == FractileRule::LambdaP ? "tp_" + detail::short_real(lambda_p) : "tp_kn";
    case EstimatorTag::TY: return "ty";
  }
  return "?";
}

inline std::string EstimatorSpec::label() const {
  switch (tag) {
    case EstimatorTag::Untrimmed: return "No Trim";
    case EstimatorTag::TZ: return "TT(Z)";
    case EstimatorTag::TZO: return "TT-BC(Z)";
    case EstimatorTag::TXFixed: return "TT(X)";
    case EstimatorTag::TXAdaptive: return rule == FractileRule::TrimK ? "TT(X,kn)" : "TT(X,kx)";
    case EstimatorTag::TP: {
      if (rule != FractileRule::LambdaP) return "TT(p,kn/2)";
      std::string s = detail::short_real(lambda_p);
      if (s.starts_with("0.")) s.erase(0, 1);
      return "TT(p," + s + ")";
    }
    case EstimatorTag::TY: return "TT(Y)";
  }
  return "?";
}

inline EstimatorSpec parse_estimator(std::string_view id) {
  if (id == "untrimmed") return {EstimatorTag::Untrimmed};
  if (id == "tz") return {EstimatorTag::TZ};
  if (id == "tzo") return {EstimatorTag::TZO};
  if (id == "tx") return {EstimatorTag::TXFixed};
  if (id == "tx_kx") return {EstimatorTag::TXAdaptive};
  if (id == "tx_kn") return {EstimatorTag::TXAdaptive, FractileRule::TrimK};
  if (id == "tp_kn" || id == "tp") return {EstimatorTag::TP, FractileRule::TrimK};
  if (id == "ty") return {EstimatorTag::TY};
  if (id.starts_with("tp_")) {
    std::string rest(id.substr(3));
    std::size_t used = 0;
    double lam = 0.0;
    try {
      lam = std::stod(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == rest.size() && lam > 0.0) return {EstimatorTag::TP, FractileRule::LambdaP, lam};
  }
  throw DomainError("unknown estimator '" + std::string(id) + "'");
}

inline std::vector<EstimatorSpec> parse_estimator_list(std::string_view csv) {
  std::vector<EstimatorSpec> out;
  for (const auto& tok : detail::split_commas(std::string(csv))) {
    const auto t = detail::trim(tok);
    if (!t.empty()) out.push_back(parse_estimator(t));
  }
  if (out.empty()) throw DomainError("empty estimator list");
  return out;
}

/// No trim, TT(Z), TT-BC(Z), three TT(X) variants, five TT(p) variants, TT(Y).
inline std::vector<EstimatorSpec> default_roster() {
  std::vector<EstimatorSpec> r{{EstimatorTag::Untrimmed}, {EstimatorTag::TZ},
                               {EstimatorTag::TZO},       {EstimatorTag::TXFixed},
                               {EstimatorTag::TXAdaptive}, {EstimatorTag::TXAdaptive, FractileRule::TrimK}};
  for (double lam : {0.25, 0.5, 1.0, 2.0}) r.push_back({EstimatorTag::TP, FractileRule::LambdaP, lam});
  r.push_back({EstimatorTag::TP, FractileRule::TrimK});
  r.push_back({EstimatorTag::TY});
  return r;
}

/// Fractiles resolved for one sample size.
struct ResolvedFractiles {
  std::size_t k_n = 0;
  std::size_t k_x = 0;
  std::size_t k_y = 0;
  double nu = 0.0;
};

inline ResolvedFractiles resolve_fractiles(const FractileParams& fp, std::size_t n) {
  ResolvedFractiles r;
  r.k_n = fractile_k(n, fp.lambda_k, fp.iota);
  r.k_x = fp.k_x.value_or(fractile_x(n));
  r.k_y = fp.k_y.value_or(r.k_n);
  r.nu = fp.nu.value_or(default_nu(n));
  return r;
}

inline std::size_t tp_fractile(const EstimatorSpec& spec, const FractileParams& fp,
                               const ResolvedFractiles& rf, std::size_t n) {
  if (fp.k_p) return *fp.k_p;
  return spec.rule == FractileRule::LambdaP ? fractile_p(n, spec.lambda_p) : fractile_p_half(rf.k_n);
}

/// Checks every fractile against n before any data is touched.
inline void check_fractiles(const std::vector<EstimatorSpec>& specs, const FractileParams& fp,
                            std::size_t n, std::size_t n_cols, std::size_t trim_col) {
  const auto rf = resolve_fractiles(fp, n);
  if (!(fp.phi.lo > 0.0 && fp.phi.lo <= fp.phi.hi)) throw FractileError("phi range must satisfy 0 < lo <= hi");
  for (const auto& s : specs) {
    switch (s.tag) {
      case EstimatorTag::TXFixed:
      case EstimatorTag::TXAdaptive:
        if (trim_col >= n_cols) throw FractileError("trim column out of range");
        if (s.tag == EstimatorTag::TXAdaptive) {
          const std::size_t kx = s.rule == FractileRule::TrimK ? rf.k_n : rf.k_x;
          if (kx < 1 || kx > n) throw FractileError(s.id() + ": k_x must lie in [1, n]");
        }
        break;
      case EstimatorTag::TP: {
        const std::size_t kp = tp_fractile(s, fp, rf, n);
        if (kp < 1 || 2 * kp > n) throw FractileError(s.id() + ": k_p must lie in [1, n/2]");
        break;
      }
      case EstimatorTag::TY:
        if (rf.k_y < 1 || rf.k_y > n) throw FractileError("ty: k_y must lie in [1, n]");
        break;
      default: break;
    }
  }
}

struct NamedEstimate {
  EstimatorSpec spec;
  EstimateReport report;
  /// Filled for TT-BC(Z).
  std::optional<BiasEstimate> bias;
};

/// Evaluates each requested estimator on one sample.
inline std::vector<NamedEstimate> evaluate_estimators(const Sample& sample, const ZSeries& zs,
                                                      std::span<const double> probs,
                                                      const std::vector<EstimatorSpec>& specs,
                                                      const FractileParams& fp,
                                                      std::size_t trim_col) {
  const std::size_t n = sample.n();
  const auto rf = resolve_fractiles(fp, n);
  std::vector<NamedEstimate> out;
  out.reserve(specs.size());
  for (const auto& s : specs) {
    NamedEstimate e{s, {}, std::nullopt};
    switch (s.tag) {
      case EstimatorTag::Untrimmed: e.report = estimate_untrimmed(zs); break;
      case EstimatorTag::TZ: e.report = estimate_tz(zs, rf.k_n); break;
      case EstimatorTag::TZO: {
        auto full = estimate_tzo_full(zs, rf.k_n, fp.phi);
        e.report = std::move(full.report);
        e.bias = full.bias;
        break;
      }
      case EstimatorTag::TXFixed: e.report = estimate_tx_fixed(sample, zs, rf.nu, trim_col); break;
      case EstimatorTag::TXAdaptive:
        e.report = estimate_tx_adaptive(sample, zs, s.rule == FractileRule::TrimK ? rf.k_n : rf.k_x,
                                        trim_col);
        break;
      case EstimatorTag::TP: e.report = estimate_tp(zs, probs, tp_fractile(s, fp, rf, n)); break;
      case EstimatorTag::TY: e.report = estimate_ty(sample, zs, rf.k_y); break;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace ipwtt

#endif  // IPWTT_ROSTER_HPP
