#ifndef IPWTT_IO_SCENARIO_HPP
#define IPWTT_IO_SCENARIO_HPP

// YAML scenario files. A file holds either one scenario mapping or a
// `scenarios:` list, with an optional `defaults:` mapping merged under each
// entry. `beta`, `n` and `distributions` may be lists; a list expands into
// one scenario per combination, named <name>_<dist>_b<beta>_n<n>; a part is
// appended whenever its value is written as a list, even a one-element one.
//
//   name: sym
//   design: scalar            # scalar | scalar_constant | multivariate3 | multivariate4
//   alpha: 0                  # default depends on the design
//   beta: [0.25, 1, 2]
//   distributions: [normal, laplace, {outcomes: laplace, covariate: laplace, latent: normal}]
//   n: [100, 250]
//   mode: known               # known | estimated
//   estimators: default       # or a list / comma string of ids
//   fractiles: {lambda_k: 0.25, iota: 1e-10, phi: [2, 16], nu: .., k_x: .., k_p: .., k_y: ..}
//   seed: 1
//   replications: 10000

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "ipwtt/error.hpp"
#include "ipwtt/montecarlo.hpp"
#include "ipwtt/roster.hpp"

namespace ipwtt::io {

/// Malformed or inconsistent scenario file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct DistTriple {
  Distribution outcomes = Distribution::StdNormal;
  Distribution covariate = Distribution::StdNormal;
  Distribution latent = Distribution::StdNormal;
  std::string label;
};

namespace detail {

inline const std::set<std::string>& scenario_keys() {
  static const std::set<std::string> keys{"name",         "design", "alpha",      "beta",
                                          "distributions", "n",      "mode",       "estimators",
                                          "fractiles",    "seed",   "replications"};
  return keys;
}

inline void check_keys(const YAML::Node& node, const std::set<std::string>& allowed,
                       const std::string& where) {
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
T scalar_as(const YAML::Node& node, const std::string& what) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("invalid value for '" + what + "'");
  }
}

template <class T>
std::vector<T> scalar_or_list(const YAML::Node& node, const std::string& what) {
  std::vector<T> out;
  if (node.IsSequence()) {
    for (const auto& v : node) out.push_back(scalar_as<T>(v, what));
    if (out.empty()) throw ConfigError("'" + what + "' must not be an empty list");
  } else {
    out.push_back(scalar_as<T>(node, what));
  }
  return out;
}

inline char dist_letter(Distribution d) { return d == Distribution::StdNormal ? 'n' : 'l'; }

inline Distribution dist_from(const YAML::Node& node, const std::string& what) {
  try {
    return parse_distribution(scalar_as<std::string>(node, what));
  } catch (const DomainError& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

inline DistTriple parse_triple(const YAML::Node& node) {
  DistTriple t;
  if (node.IsScalar()) {
    const auto d = dist_from(node, "distributions");
    t = {d, d, d, std::string(to_string(d))};
    return t;
  }
  if (!node.IsMap()) throw ConfigError("distributions: expected a name or a mapping");
  check_keys(node, {"outcomes", "covariate", "latent", "label"}, "distributions");
  if (!node["latent"]) throw ConfigError("distributions: 'latent' is required");
  t.latent = dist_from(node["latent"], "latent");
  t.outcomes = node["outcomes"] ? dist_from(node["outcomes"], "outcomes") : t.latent;
  t.covariate = node["covariate"] ? dist_from(node["covariate"], "covariate") : t.outcomes;
  if (node["label"]) {
    t.label = scalar_as<std::string>(node["label"], "label");
  } else if (t.outcomes == t.covariate && t.covariate == t.latent) {
    t.label = std::string(to_string(t.latent));
  } else {
    t.label = {dist_letter(t.outcomes), dist_letter(t.covariate), dist_letter(t.latent)};
  }
  return t;
}

inline std::vector<EstimatorSpec> parse_estimators(const YAML::Node& node) {
  try {
    if (node.IsSequence()) {
      std::vector<EstimatorSpec> out;
      for (const auto& v : node) out.push_back(parse_estimator(scalar_as<std::string>(v, "estimators")));
      if (out.empty()) throw ConfigError("estimators: empty list");
      return out;
    }
    const auto s = scalar_as<std::string>(node, "estimators");
    return s == "default" ? default_roster() : parse_estimator_list(s);
  } catch (const DomainError& e) {
    throw ConfigError(std::string("estimators: ") + e.what());
  }
}

inline std::size_t positive_count(const YAML::Node& node, const std::string& what) {
  const auto v = scalar_as<long long>(node, what);
  if (v < 0) throw ConfigError("'" + what + "' must be non-negative");
  return static_cast<std::size_t>(v);
}

inline FractileParams parse_fractiles(const YAML::Node& node) {
  if (!node.IsMap()) throw ConfigError("fractiles: expected a mapping");
  check_keys(node, {"lambda_k", "iota", "phi", "nu", "k_x", "k_p", "k_y"}, "fractiles");
  FractileParams fp;
  if (node["lambda_k"]) fp.lambda_k = scalar_as<double>(node["lambda_k"], "lambda_k");
  if (node["iota"]) fp.iota = scalar_as<double>(node["iota"], "iota");
  if (node["phi"]) {
    const auto v = scalar_or_list<double>(node["phi"], "phi");
    if (v.size() != 2) throw ConfigError("phi: expected [lo, hi]");
    fp.phi = {v[0], v[1]};
  }
  if (node["nu"]) fp.nu = scalar_as<double>(node["nu"], "nu");
  if (node["k_x"]) fp.k_x = positive_count(node["k_x"], "k_x");
  if (node["k_p"]) fp.k_p = positive_count(node["k_p"], "k_p");
  if (node["k_y"]) fp.k_y = positive_count(node["k_y"], "k_y");
  return fp;
}

inline std::string beta_tag(double b) {
  std::string s = ipwtt::detail::short_real(b);
  for (auto& c : s)
    if (c == '.') c = 'p';
  return s;
}

/// Entry keys override defaults; nested mappings are replaced whole.
inline YAML::Node merge(const YAML::Node& defaults, const YAML::Node& entry) {
  YAML::Node out(YAML::NodeType::Map);
  if (defaults)
    for (const auto& kv : defaults) out[kv.first.as<std::string>()] = kv.second;
  for (const auto& kv : entry) out[kv.first.as<std::string>()] = kv.second;
  return out;
}

inline std::vector<ScenarioConfig> expand_entry(const YAML::Node& node, std::size_t index) {
  if (!node.IsMap()) throw ConfigError("scenario " + std::to_string(index + 1) + ": expected a mapping");
  const std::string where = node["name"] ? scalar_as<std::string>(node["name"], "name")
                                         : "scenario" + std::to_string(index + 1);
  check_keys(node, scenario_keys(), where);

  ScenarioConfig base;
  base.name = where;
  try {
    if (node["design"]) base.design = parse_design(scalar_as<std::string>(node["design"], "design"));
    if (node["mode"]) base.mode = parse_mode(scalar_as<std::string>(node["mode"], "mode"));
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  base.alpha = node["alpha"] ? scalar_as<double>(node["alpha"], "alpha") : default_alpha(base.design);
  if (node["estimators"]) base.estimators = parse_estimators(node["estimators"]);
  if (node["fractiles"]) base.fractiles = parse_fractiles(node["fractiles"]);
  if (node["seed"]) base.seed = scalar_as<std::uint64_t>(node["seed"], "seed");
  if (node["replications"]) base.replications = positive_count(node["replications"], "replications");

  const auto betas = node["beta"] ? scalar_or_list<double>(node["beta"], "beta") : std::vector<double>{base.beta};
  std::vector<std::size_t> ns;
  if (node["n"]) {
    for (auto v : scalar_or_list<long long>(node["n"], "n")) {
      if (v < 2) throw ConfigError(where + ": n must be at least 2");
      ns.push_back(static_cast<std::size_t>(v));
    }
  } else {
    ns.push_back(base.n);
  }
  std::vector<DistTriple> dists;
  if (node["distributions"]) {
    const auto& dn = node["distributions"];
    if (dn.IsSequence()) {
      for (const auto& d : dn) dists.push_back(parse_triple(d));
      if (dists.empty()) throw ConfigError(where + ": empty distributions list");
    } else {
      dists.push_back(parse_triple(dn));
    }
  } else {
    dists.push_back({Distribution::StdNormal, Distribution::StdNormal, Distribution::StdNormal, "normal"});
  }

  std::vector<ScenarioConfig> out;
  for (const auto& d : dists)
    for (double b : betas)
      for (std::size_t n : ns) {
        ScenarioConfig c = base;
        c.dist_outcomes = d.outcomes;
        c.dist_x = d.covariate;
        c.dist_u = d.latent;
        c.beta = b;
        c.n = n;
        if (node["distributions"] && node["distributions"].IsSequence()) c.name += "_" + d.label;
        if (node["beta"] && node["beta"].IsSequence()) c.name += "_b" + beta_tag(b);
        if (node["n"] && node["n"].IsSequence()) c.name += "_n" + std::to_string(n);
        out.push_back(std::move(c));
      }
  return out;
}

}  // namespace detail

inline std::vector<ScenarioConfig> parse_scenarios(const YAML::Node& root) {
  if (!root || root.IsNull()) throw ConfigError("scenario file is empty");
  if (!root.IsMap()) throw ConfigError("scenario file: expected a mapping at the top level");
  std::vector<ScenarioConfig> out;
  if (root["scenarios"]) {
    detail::check_keys(root, {"scenarios", "defaults"}, "scenario file");
    const YAML::Node defaults = root["defaults"];
    if (defaults && !defaults.IsMap()) throw ConfigError("defaults: expected a mapping");
    const YAML::Node list = root["scenarios"];
    if (!list.IsSequence() || list.size() == 0) throw ConfigError("scenarios: expected a non-empty list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (!list[i].IsMap()) throw ConfigError("scenario " + std::to_string(i + 1) + ": expected a mapping");
      auto part = detail::expand_entry(detail::merge(defaults, list[i]), i);
      out.insert(out.end(), part.begin(), part.end());
    }
  } else {
    out = detail::expand_entry(root, 0);
  }
  std::set<std::string> names;
  for (const auto& c : out)
    if (!names.insert(c.name).second) throw ConfigError("duplicate scenario name '" + c.name + "'");
  return out;
}

/// Copy of a scenario document with every entry's `n` replaced by `sizes`
/// (written as a list, so names carry the _n suffix).
inline YAML::Node with_sizes(const YAML::Node& root, const std::vector<std::size_t>& sizes) {
  YAML::Node out = YAML::Clone(root);
  YAML::Node list(YAML::NodeType::Sequence);
  for (auto n : sizes) list.push_back(n);
  if (out.IsMap() && out["scenarios"] && out["scenarios"].IsSequence()) {
    for (auto entry : out["scenarios"])
      if (entry.IsMap()) entry["n"] = list;
  } else if (out.IsMap()) {
    out["n"] = list;
  }
  return out;
}

inline YAML::Node load_yaml(const std::string& path) {
  try {
    return YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError("cannot open scenario file '" + path + "'");
  } catch (const YAML::Exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline std::vector<ScenarioConfig> parse_scenarios_string(const std::string& text) {
  try {
    return parse_scenarios(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("scenario YAML: ") + e.what());
  }
}

inline std::vector<ScenarioConfig> load_scenarios(const std::string& path) {
  return parse_scenarios(load_yaml(path));
}

}  // namespace ipwtt::io

#endif  // IPWTT_IO_SCENARIO_HPP
