// ipwtt: tail-trimmed IPW estimation and Monte Carlo studies.
//
//   ipwtt estimate --data d.csv --y y --d d --x x1,x2 [--link logit] [--out r.json]
//   ipwtt simulate (--scenario s.yaml | --preset table1a | --table 1a) [--reps R] --out dir
//   ipwtt report --summary dir/summary.json [--compare ref.json] [--format markdown]
//
// Exit status: 0 ok, 1 runtime or configuration error, 2 usage error (and an
// infeasible fractile setup for `estimate`).

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ipwtt/io/json_report.hpp"
#include "ipwtt/io/render.hpp"
#include "ipwtt/io/scenario.hpp"
#include "ipwtt/ipwtt.hpp"

#ifndef IPWTT_PRESET_DIR
#define IPWTT_PRESET_DIR "presets"
#endif

namespace fs = std::filesystem;
using namespace ipwtt;
using io::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Failure that maps to exit status 2.
struct UsageFailure : Error {
  using Error::Error;
};

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::string(v);
}

std::uint64_t parse_u64(const std::string& s, const char* what) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!s.empty() && s.front() == '-') throw std::invalid_argument(s);
    v = std::stoull(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw UsageFailure(std::string(what) + ": not a non-negative integer: '" + s + "'");
  return v;
}

/// Fractile overrides shared by `estimate` and `simulate`.
struct FractileFlags {
  double lambda_k = 0.25;
  double iota = 1e-10;
  std::vector<double> phi;
  double nu = 0.0;
  std::size_t k_x = 0, k_p = 0, k_y = 0;
  double lambda_p = 0.0;
  CLI::Option *o_lambda_k{}, *o_iota{}, *o_phi{}, *o_nu{}, *o_kx{}, *o_kp{}, *o_ky{}, *o_lambda_p{};

  void attach(CLI::App* app) {
    o_lambda_k = app->add_option("--lambda-k", lambda_k, "Trimming fractile scale lambda_k (default .25)");
    o_iota = app->add_option("--iota", iota, "Exponent offset iota in k_n (default 1e-10)");
    o_phi = app->add_option("--phi-range", phi, "Bias-correction phi range: LO HI (default 2 16)")
                ->expected(2)
                ->delimiter(',');
    o_nu = app->add_option("--nu", nu, "Fixed TT(X) threshold (default ln ln n)");
    o_kx = app->add_option("--k-x", k_x, "Adaptive TT(X) fractile (default round(2n/ln n))");
    o_kp = app->add_option("--k-p", k_p, "TT(p) fractile for every TT(p) estimator");
    o_ky = app->add_option("--k-y", k_y, "TT(Y) fractile (default k_n)");
    o_lambda_p = app->add_option("--lambda-p", lambda_p, "Adds TT(p) with k_p = round(lambda_p n/ln n)");
  }

  void apply(FractileParams& fp) const {
    if (o_lambda_k->count()) fp.lambda_k = lambda_k;
    if (o_iota->count()) fp.iota = iota;
    if (o_phi->count()) fp.phi = {phi.at(0), phi.at(1)};
    if (o_nu->count()) fp.nu = nu;
    if (o_kx->count()) fp.k_x = k_x;
    if (o_kp->count()) fp.k_p = k_p;
    if (o_ky->count()) fp.k_y = k_y;
  }

  void extend(std::vector<EstimatorSpec>& specs) const {
    if (!o_lambda_p->count()) return;
    if (!(lambda_p > 0.0)) throw UsageFailure("--lambda-p must be positive");
    EstimatorSpec s{EstimatorTag::TP, FractileRule::LambdaP, lambda_p};
    for (const auto& e : specs)
      if (e.id() == s.id()) return;
    specs.push_back(s);
  }
};

std::vector<EstimatorSpec> estimator_list(const std::string& csv) {
  if (csv == "default" || csv == "all") return default_roster();
  try {
    return parse_estimator_list(csv);
  } catch (const DomainError& e) {
    throw UsageFailure(std::string("--estimators: ") + e.what());
  }
}

void write_text(const std::string& text, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string data, y, d, link = "logit", known, trim_col, out;
  std::vector<std::string> x;
  bool no_intercept = false;
  std::string estimators = "untrimmed,tz,tzo";
  double level = 0.95;
  FractileFlags fr;
};

Sample build_sample(const CsvTable& table, const EstimateArgs& a) {
  Schema schema;
  schema.y = a.y;
  schema.d = a.d;
  schema.x = a.x;
  Sample raw = sample_from_table(table, schema);
  if (a.no_intercept) {
    if (raw.k() == 0) throw UsageFailure("--no-intercept needs at least one --x column");
    return raw;
  }
  std::string name = "const";
  while (std::find(a.x.begin(), a.x.end(), name) != a.x.end()) name = "_" + name;
  Eigen::MatrixXd x(static_cast<Eigen::Index>(raw.n()), static_cast<Eigen::Index>(raw.k() + 1));
  x.col(0).setOnes();
  if (raw.k() > 0) x.rightCols(static_cast<Eigen::Index>(raw.k())) = raw.x();
  schema.x.insert(schema.x.begin(), name);
  return Sample(raw.y(), raw.d(), std::move(x), schema);
}

int cmd_estimate(const EstimateArgs& a) {
  const CsvTable table = read_csv_table(a.data);
  const Sample sample = build_sample(table, a);
  const std::size_t n = sample.n();

  auto specs = estimator_list(a.estimators);
  a.fr.extend(specs);
  FractileParams fp;
  a.fr.apply(fp);

  bool needs_x = false;
  for (const auto& s : specs)
    needs_x = needs_x || s.tag == EstimatorTag::TXFixed || s.tag == EstimatorTag::TXAdaptive;
  std::size_t trim_col = 0;
  if (!a.trim_col.empty()) {
    trim_col = sample.covariate_index(a.trim_col);
  } else if (needs_x) {
    if (a.x.empty()) throw UsageFailure("trim-by-X estimators need an --x column");
    trim_col = a.no_intercept ? 0 : 1;
  }
  try {
    check_fractiles(specs, fp, n, sample.k(), trim_col);
  } catch (const FractileError& e) {
    throw UsageFailure(std::string("infeasible fractiles: ") + e.what());
  }

  Json doc;
  doc["schema_version"] = io::kSchemaVersion;
  doc["kind"] = "estimate";
  Json data;
  data["path"] = a.data;
  data["n"] = n;
  data["treated"] = sample.treated();
  data["control"] = n - sample.treated();
  data["covariates"] = sample.names().x;
  doc["data"] = data;

  std::vector<double> probs;
  std::optional<PropensityFit> fit;
  if (!a.known.empty()) {
    probs = real_column(table, a.known);
    Json p;
    p["known_column"] = a.known;
    doc["propensity"] = p;
  } else {
    fit = fit_mle(sample, parse_link(a.link));
    if (!fit->converged) throw Error("propensity fit did not converge after " + std::to_string(fit->iterations) + " iterations");
    probs = fit->probs;
    doc["propensity"] = io::propensity_json(*fit, sample.names().x);
  }

  const auto zs = compute_z(sample, probs);
  const auto rf = resolve_fractiles(fp, n);
  Json fr = io::fractiles_json(fp);
  fr["k_n"] = rf.k_n;
  fr["k_x"] = rf.k_x;
  fr["k_y"] = rf.k_y;
  fr["nu"] = rf.nu;
  fr["trim_col"] = needs_x || !a.trim_col.empty() ? Json(sample.names().x.at(trim_col)) : Json(nullptr);
  doc["fractiles"] = fr;

  const auto est = evaluate_estimators(sample, zs, probs, specs, fp, trim_col);
  Json arr = Json::array();
  for (const auto& e : est) arr.push_back(io::estimate_json(e));
  doc["estimates"] = arr;

  for (const auto& e : est) {
    if (e.spec.tag != EstimatorTag::TZO) continue;
    const double b = e.bias && e.bias->feasible ? e.bias->value : 0.0;
    const ScaleEstimate scale = fit ? variance_estimate(sample, *fit, zs, rf.k_n, b)
                                    : variance_estimate_known(zs, rf.k_n, b);
    doc["inference"] = io::inference_json(make_inference(e.report.theta_hat, scale, a.level));
    break;
  }

  if (a.out.empty()) {
    std::cout << doc.dump(2) << '\n';
  } else {
    io::write_json_file(doc, a.out);
    for (const auto& e : est)
      std::cout << e.spec.label() << ": " << ipwtt::detail::format_real(e.report.theta_hat) << '\n';
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string scenario, preset, table, preset_dir, out = "ipwtt_out", estimators, format = "text";
  std::vector<std::size_t> n;
  std::size_t reps = 0, threads = 0;
  std::string seed;
  bool quiet = false;
  CLI::Option *o_reps{}, *o_seed{}, *o_threads{};
  FractileFlags fr;
};

std::string preset_path(const SimulateArgs& a) {
  std::string name = a.preset;
  if (!a.table.empty()) name = "table" + a.table;
  const std::string dir = !a.preset_dir.empty() ? a.preset_dir : env("IPWTT_PRESET_DIR").value_or(IPWTT_PRESET_DIR);
  const fs::path p = fs::path(dir) / (name + ".yaml");
  if (!fs::exists(p)) throw Error("unknown preset '" + name + "' (looked for " + p.string() + ")");
  return p.string();
}

int cmd_simulate(const SimulateArgs& a) {
  const int sources = !a.scenario.empty() + !a.preset.empty() + !a.table.empty();
  if (sources != 1) throw UsageFailure("give exactly one of --scenario, --preset, --table");
  const std::string path = a.scenario.empty() ? preset_path(a) : a.scenario;

  YAML::Node root = io::load_yaml(path);
  if (!a.n.empty()) root = io::with_sizes(root, a.n);
  auto scenarios = io::parse_scenarios(root);

  std::optional<std::uint64_t> seed;
  if (a.o_seed->count()) seed = parse_u64(a.seed, "--seed");
  else if (auto e = env("IPWTT_SEED")) seed = parse_u64(*e, "IPWTT_SEED");
  std::size_t threads = a.threads;
  if (!a.o_threads->count())
    if (auto e = env("IPWTT_THREADS")) threads = static_cast<std::size_t>(parse_u64(*e, "IPWTT_THREADS"));

  for (auto& c : scenarios) {
    if (a.o_reps->count()) c.replications = a.reps;
    if (seed) c.seed = *seed;
    if (!a.estimators.empty()) c.estimators = estimator_list(a.estimators);
    a.fr.extend(c.estimators);
    a.fr.apply(c.fractiles);
    validate_config(c);
  }

  const auto fmt = io::parse_table_format(a.format);
  fs::create_directories(a.out);
  std::vector<io::ScenarioSummary> all;
  for (const auto& c : scenarios) {
    const auto reps = run_study(c, threads);
    io::ScenarioSummary s{c.name, io::config_json(c), summarize(c, reps)};
    const fs::path base = fs::path(a.out) / c.name;
    write_text(io::summary_csv(s.rows), base.string() + ".csv");
    io::write_json_file(io::summary_json({s}), base.string() + ".json");
    if (!a.quiet) {
      std::cerr << c.name << ": " << c.replications << " replications, "
                << (s.rows.empty() ? 0 : s.rows.front().failed_reps) << " failed\n";
      std::cout << io::render_summary({s}, fmt) << '\n';
    }
    all.push_back(std::move(s));
  }
  io::write_json_file(io::summary_json(all), (fs::path(a.out) / "summary.json").string());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string summary, compare, format = "markdown", out;
};

int cmd_report(const ReportArgs& a) {
  const auto fmt = io::parse_table_format(a.format);
  const auto doc = io::load_summary(a.summary);
  if (doc.empty()) throw io::ReportError("summary has no scenarios");
  std::optional<std::vector<io::ScenarioSummary>> ref;
  if (!a.compare.empty()) ref = io::load_summary(a.compare);
  const std::string text = io::render_summary(doc, fmt, ref ? &*ref : nullptr);
  if (a.out.empty()) std::cout << text;
  else write_text(text, a.out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tail-trimmed inverse probability weighted ATE estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ipwtt 1.0.0");

  EstimateArgs ea;
  auto* est = app.add_subcommand("estimate", "Estimate the ATE from a CSV file");
  est->add_option("--data", ea.data, "Input CSV with a header row")->required()->check(CLI::ExistingFile);
  est->add_option("--y", ea.y, "Outcome column")->required();
  est->add_option("--d", ea.d, "Treatment column (0/1)")->required();
  est->add_option("--x", ea.x, "Covariate columns")->delimiter(',');
  est->add_flag("--no-intercept", ea.no_intercept, "Do not add a constant column");
  est->add_option("--link", ea.link, "Propensity link: logit, probit or laplace")
      ->check(CLI::IsMember({"logit", "probit", "laplace"}));
  est->add_option("--known-propensity", ea.known, "Column holding known propensities (skips the fit)");
  est->add_option("--estimators", ea.estimators, "Comma list of estimator ids, or 'default'");
  est->add_option("--trim-col", ea.trim_col, "Covariate used by trim-by-X (default the first --x)");
  est->add_option("--level", ea.level, "Confidence level (default .95)");
  est->add_option("--out", ea.out, "Write the JSON report here (default stdout)");
  ea.fr.attach(est);

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Run a Monte Carlo study");
  sim->add_option("--scenario", sa.scenario, "YAML scenario file")->check(CLI::ExistingFile);
  sim->add_option("--preset", sa.preset, "Preset name in the preset directory");
  sim->add_option("--table", sa.table, "Shorthand for --preset table<NAME>");
  sim->add_option("--preset-dir", sa.preset_dir, "Preset directory (env IPWTT_PRESET_DIR)");
  sim->add_option("--n", sa.n, "Override sample sizes")->delimiter(',');
  sa.o_reps = sim->add_option("--reps", sa.reps, "Override replications");
  sa.o_seed = sim->add_option("--seed", sa.seed, "Override the seed (env IPWTT_SEED)");
  sa.o_threads = sim->add_option("--threads", sa.threads, "Worker threads (env IPWTT_THREADS)");
  sim->add_option("--estimators", sa.estimators, "Override the estimator roster");
  sim->add_option("--out", sa.out, "Output directory");
  sim->add_option("--format", sa.format, "Console table format: text or markdown");
  sim->add_flag("--quiet", sa.quiet, "No console tables");
  sa.fr.attach(sim);

  ReportArgs ra;
  auto* rep = app.add_subcommand("report", "Render a summary JSON as tables");
  rep->add_option("--summary", ra.summary, "summary.json written by simulate")->required();
  rep->add_option("--compare", ra.compare, "Reference summary for deviation columns");
  rep->add_option("--format", ra.format, "markdown or text");
  rep->add_option("--out", ra.out, "Write the table here (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const bool is_estimate = est->parsed();
  try {
    if (is_estimate) return cmd_estimate(ea);
    if (sim->parsed()) return cmd_simulate(sa);
    return cmd_report(ra);
  } catch (const UsageFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
