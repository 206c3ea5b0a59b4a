#ifndef IPWTT_IO_JSON_REPORT_HPP
#define IPWTT_IO_JSON_REPORT_HPP

// JSON documents written by the command-line tool. Keys keep insertion
// order and no timestamps are written, so equal inputs give equal bytes.
// Non-finite numbers are written as null and read back as NaN.

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipwtt/error.hpp"
#include "ipwtt/inference.hpp"
#include "ipwtt/montecarlo.hpp"
#include "ipwtt/propensity.hpp"
#include "ipwtt/roster.hpp"

namespace ipwtt::io {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Malformed summary or reference document.
class ReportError : public Error {
 public:
  using Error::Error;
};

inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json vector_json(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
  return a;
}

inline Json fractiles_json(const FractileParams& fp) {
  Json j;
  j["lambda_k"] = fp.lambda_k;
  j["iota"] = fp.iota;
  j["phi"] = {fp.phi.lo, fp.phi.hi};
  j["nu"] = fp.nu ? Json(*fp.nu) : Json(nullptr);
  j["k_x"] = fp.k_x ? Json(*fp.k_x) : Json(nullptr);
  j["k_p"] = fp.k_p ? Json(*fp.k_p) : Json(nullptr);
  j["k_y"] = fp.k_y ? Json(*fp.k_y) : Json(nullptr);
  return j;
}

inline Json config_json(const ScenarioConfig& c) {
  Json j;
  j["design"] = to_string(c.design);
  j["alpha"] = c.alpha;
  j["beta"] = c.beta;
  j["outcomes"] = to_string(c.dist_outcomes);
  j["covariate"] = to_string(c.dist_x);
  j["latent"] = to_string(c.dist_u);
  j["link"] = to_string(c.link());
  j["n"] = c.n;
  j["mode"] = to_string(c.mode);
  Json est = Json::array();
  for (const auto& e : c.estimators) est.push_back(e.id());
  j["estimators"] = est;
  j["fractiles"] = fractiles_json(c.fractiles);
  j["seed"] = c.seed;
  j["replications"] = c.replications;
  return j;
}

inline Json row_json(const SummaryRow& r) {
  Json j;
  j["estimator"] = r.id;
  j["label"] = r.label;
  j["mean"] = number(r.mean);
  j["median"] = number(r.median);
  j["rmse"] = number(r.rmse);
  j["ks_ratio"] = number(r.ks_ratio);
  j["trim_pct"] = number(r.trim_pct);
  j["rej01"] = number(r.rej01);
  j["rej05"] = number(r.rej05);
  j["rej10"] = number(r.rej10);
  j["failed_reps"] = r.failed_reps;
  j["reps"] = r.reps;
  return j;
}

/// One summarized scenario as stored in (and read back from) JSON.
struct ScenarioSummary {
  std::string name;
  Json config;
  std::vector<SummaryRow> rows;
};

inline Json scenario_json(const ScenarioSummary& s) {
  Json j;
  j["name"] = s.name;
  j["config"] = s.config;
  Json rows = Json::array();
  for (const auto& r : s.rows) rows.push_back(row_json(r));
  j["rows"] = rows;
  return j;
}

inline Json summary_json(const std::vector<ScenarioSummary>& scenarios) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = "summary";
  Json arr = Json::array();
  for (const auto& s : scenarios) arr.push_back(scenario_json(s));
  j["scenarios"] = arr;
  return j;
}

namespace detail {

inline double read_number(const Json& row, const char* key, const std::string& where) {
  if (!row.contains(key)) throw ReportError(where + ": missing '" + key + "'");
  const auto& v = row.at(key);
  if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!v.is_number()) throw ReportError(where + ": '" + key + "' is not a number");
  return v.get<double>();
}

inline SummaryRow read_row(const Json& j, const std::string& where) {
  if (!j.is_object()) throw ReportError(where + ": row is not an object");
  SummaryRow r;
  if (!j.contains("estimator") || !j.at("estimator").is_string())
    throw ReportError(where + ": row without an 'estimator' string");
  r.id = j.at("estimator").get<std::string>();
  r.label = j.contains("label") && j.at("label").is_string() ? j.at("label").get<std::string>() : r.id;
  const std::string w = where + "/" + r.id;
  r.mean = read_number(j, "mean", w);
  r.median = read_number(j, "median", w);
  r.rmse = read_number(j, "rmse", w);
  r.ks_ratio = read_number(j, "ks_ratio", w);
  r.trim_pct = read_number(j, "trim_pct", w);
  r.rej01 = read_number(j, "rej01", w);
  r.rej05 = read_number(j, "rej05", w);
  r.rej10 = read_number(j, "rej10", w);
  if (j.contains("failed_reps") && j.at("failed_reps").is_number_unsigned())
    r.failed_reps = j.at("failed_reps").get<std::size_t>();
  if (j.contains("reps") && j.at("reps").is_number_unsigned()) r.reps = j.at("reps").get<std::size_t>();
  return r;
}

}  // namespace detail

/// Parses a summary document. Reference files may omit metrics by writing
/// null; the "kind" field is optional there.
inline std::vector<ScenarioSummary> parse_summary(const Json& doc) {
  if (!doc.is_object()) throw ReportError("summary: top level is not an object");
  if (doc.contains("kind") && doc.at("kind") != "summary")
    throw ReportError("summary: kind is not \"summary\"");
  if (!doc.contains("scenarios") || !doc.at("scenarios").is_array())
    throw ReportError("summary: missing 'scenarios' array");
  std::vector<ScenarioSummary> out;
  for (const auto& s : doc.at("scenarios")) {
    if (!s.is_object() || !s.contains("name") || !s.at("name").is_string())
      throw ReportError("summary: scenario without a name");
    ScenarioSummary ss;
    ss.name = s.at("name").get<std::string>();
    ss.config = s.contains("config") ? s.at("config") : Json::object();
    if (!s.contains("rows") || !s.at("rows").is_array())
      throw ReportError("summary: scenario '" + ss.name + "' has no 'rows' array");
    for (const auto& r : s.at("rows")) ss.rows.push_back(detail::read_row(r, ss.name));
    out.push_back(std::move(ss));
  }
  return out;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ReportError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ReportError(path + ": malformed JSON: " + e.what());
  }
}

inline std::vector<ScenarioSummary> load_summary(const std::string& path) {
  return parse_summary(read_json_file(path));
}

/// Writes `doc` with two-space indentation and a trailing newline.
inline void write_json_file(const Json& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// Estimate documents

inline Json propensity_json(const PropensityFit& fit, const std::vector<std::string>& names) {
  Json j;
  j["link"] = to_string(fit.family);
  Json g;
  for (Eigen::Index i = 0; i < fit.gamma_hat.size(); ++i) {
    const auto idx = static_cast<std::size_t>(i);
    g[idx < names.size() ? names[idx] : "x" + std::to_string(i)] = number(fit.gamma_hat(i));
  }
  j["gamma_hat"] = g;
  j["loglik"] = number(fit.loglik);
  j["loglik_init"] = number(fit.loglik_init);
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["grad_norm"] = number(fit.grad_norm);
  j["warnings"] = fit.warnings;
  return j;
}

inline Json tail_json(const TailFit& t) {
  Json j;
  j["m"] = t.m;
  j["kappa_hat"] = number(t.kappa_hat);
  j["d_hat"] = number(t.d_hat);
  j["order_stat_m"] = number(t.order_stat_m);
  return j;
}

inline Json estimate_json(const NamedEstimate& e) {
  Json j;
  j["estimator"] = e.spec.id();
  j["label"] = e.spec.label();
  j["theta_hat"] = number(e.report.theta_hat);
  j["bias_correction"] = number(e.report.bias_correction);
  j["trimmed_count"] = e.report.trimmed_count;
  j["trimmed_fraction"] = number(e.report.trimmed_fraction);
  j["threshold"] = number(e.report.threshold);
  j["diagnostics"] = e.report.diagnostics;
  if (e.bias) {
    Json b;
    b["feasible"] = e.bias->feasible;
    b["value"] = number(e.bias->value);
    b["phi_star"] = number(e.bias->phi_star);
    b["m"] = e.bias->m;
    b["feasible_count"] = e.bias->feasible_count;
    if (e.bias->feasible) {
      b["left"] = tail_json(e.bias->left);
      b["right"] = tail_json(e.bias->right);
    }
    j["bias"] = b;
  }
  return j;
}

inline Json inference_json(const InferenceReport& r) {
  Json j;
  j["theta_hat"] = number(r.theta_hat);
  j["null_value"] = number(r.null_value);
  j["v_hat_sq"] = number(r.v_hat_sq);
  j["std_error"] = number(r.std_error);
  j["t_stat"] = number(r.t_stat);
  j["level"] = r.level;
  j["ci"] = {number(r.ci.first), number(r.ci.second)};
  j["known_propensity"] = r.known_propensity;
  if (r.d_hat_vec.size() > 0) j["d_hat"] = vector_json(r.d_hat_vec);
  return j;
}

}  // namespace ipwtt::io

#endif  // IPWTT_IO_JSON_REPORT_HPP
