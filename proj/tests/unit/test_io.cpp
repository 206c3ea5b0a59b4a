#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "ipwtt/io/json_report.hpp"
#include "ipwtt/io/render.hpp"
#include "ipwtt/io/scenario.hpp"

using namespace ipwtt;
using namespace ipwtt::io;

namespace {

SummaryRow make_row(const std::string& id, const std::string& label, double base) {
  SummaryRow r;
  r.id = id;
  r.label = label;
  r.mean = base;
  r.median = base / 2;
  r.rmse = 0.2 + base;
  r.ks_ratio = 1.0;
  r.trim_pct = 1.0;
  r.rej01 = 0.01;
  r.rej05 = 0.05;
  r.rej10 = 0.1;
  r.failed_reps = 0;
  r.reps = 100;
  return r;
}

std::vector<ScenarioSummary> three_rows() {
  return {{"s", Json::object(),
           {make_row("untrimmed", "No Trim", 0.001), make_row("tz", "TT(Z)", 0.002),
            make_row("tzo", "TT-BC(Z)", 0.003)}}};
}

std::size_t count_char(const std::string& s, char c) {
  std::size_t k = 0;
  for (char x : s) k += x == c;
  return k;
}

std::string line(const std::string& text, std::size_t i) {
  std::size_t pos = 0;
  for (std::size_t k = 0; k < i; ++k) pos = text.find('\n', pos) + 1;
  return text.substr(pos, text.find('\n', pos) - pos);
}

}  // namespace

TEST(Scenario, SingleMappingDefaults) {
  const auto v = parse_scenarios_string("name: one\nbeta: 2\n");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].name, "one");
  EXPECT_EQ(v[0].beta, 2.0);
  EXPECT_EQ(v[0].design, DesignCase::Scalar);
  EXPECT_EQ(v[0].dist_u, Distribution::StdNormal);
  EXPECT_FALSE(v[0].estimators.empty());
}

TEST(Scenario, GridExpansionAndNames) {
  const auto v = parse_scenarios_string(R"(
name: g
beta: [0.25, 1]
n: [100, 250]
distributions:
  - normal
  - {outcomes: laplace, covariate: laplace, latent: normal, label: lap_un}
)");
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v[0].name, "g_normal_b0p25_n100");
  EXPECT_EQ(v[7].name, "g_lap_un_b1_n250");
  EXPECT_EQ(v[7].dist_outcomes, Distribution::UnitLaplace);
  EXPECT_EQ(v[7].dist_u, Distribution::StdNormal);
  EXPECT_EQ(v[7].link(), LinkFamily::Probit);
}

TEST(Scenario, OneElementListStillTagsName) {
  const auto v = parse_scenarios_string("name: a\nn: [100]\nbeta: 1\n");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].name, "a_n100");
}

TEST(Scenario, DefaultsMergeUnderEntries) {
  const auto v = parse_scenarios_string(R"(
defaults: {beta: 1, replications: 50, mode: estimated}
scenarios:
  - {name: a}
  - {name: b, beta: 2, design: scalar_constant}
)");
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[0].beta, 1.0);
  EXPECT_EQ(v[0].replications, 50u);
  EXPECT_EQ(v[0].mode, PropensityMode::Estimated);
  EXPECT_EQ(v[1].beta, 2.0);
  EXPECT_EQ(v[1].alpha, 0.25);
}

TEST(Scenario, EstimatorForms) {
  EXPECT_EQ(parse_scenarios_string("estimators: untrimmed,tz,tzo\n")[0].estimators.size(), 3u);
  const auto v = parse_scenarios_string("estimators: [tx_kx, tp_0.5]\n");
  ASSERT_EQ(v[0].estimators.size(), 2u);
  EXPECT_EQ(v[0].estimators[1].id(), "tp_0.5");
}

TEST(Scenario, Fractiles) {
  const auto v = parse_scenarios_string("fractiles: {lambda_k: 0.5, phi: [3, 12], k_x: 40}\n");
  EXPECT_EQ(v[0].fractiles.lambda_k, 0.5);
  EXPECT_EQ(v[0].fractiles.phi.lo, 3.0);
  EXPECT_EQ(v[0].fractiles.phi.hi, 12.0);
  ASSERT_TRUE(v[0].fractiles.k_x.has_value());
  EXPECT_EQ(*v[0].fractiles.k_x, 40u);
}

TEST(Scenario, Errors) {
  EXPECT_THROW(parse_scenarios_string(""), ConfigError);
  EXPECT_THROW(parse_scenarios_string("bogus: 1\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("design: case9\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("n: 1\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("beta: []\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("estimators: [nope]\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("distributions: {outcomes: normal}\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("scenarios: [{name: a}, {name: a}]\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("fractiles: {phi: [1]}\n"), ConfigError);
  EXPECT_THROW(parse_scenarios_string("name: [unclosed\n"), ConfigError);
}

TEST(Scenario, WithSizesOverridesN) {
  const auto root = YAML::Load("scenarios:\n  - {name: a, n: 100}\n  - {name: b}\n");
  const auto v = parse_scenarios(with_sizes(root, {50, 60}));
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0].name, "a_n50");
  EXPECT_EQ(v[3].n, 60u);
  EXPECT_EQ(parse_scenarios(root).size(), 2u);
}

TEST(JsonReport, SummaryRoundTrip) {
  auto s = three_rows();
  s[0].rows[1].ks_ratio = std::nan("");
  s[0].rows[2].failed_reps = 7;
  const auto back = parse_summary(Json::parse(summary_json(s).dump()));
  ASSERT_EQ(back.size(), 1u);
  ASSERT_EQ(back[0].rows.size(), 3u);
  EXPECT_EQ(back[0].rows[0].mean, s[0].rows[0].mean);
  EXPECT_EQ(back[0].rows[2].rmse, s[0].rows[2].rmse);
  EXPECT_TRUE(std::isnan(back[0].rows[1].ks_ratio));
  EXPECT_EQ(back[0].rows[2].failed_reps, 7u);
  EXPECT_EQ(back[0].rows[2].label, "TT-BC(Z)");
}

TEST(JsonReport, RejectsMalformed) {
  EXPECT_THROW(parse_summary(Json::array()), ReportError);
  EXPECT_THROW(parse_summary(Json::parse(R"({"scenarios": 3})")), ReportError);
  EXPECT_THROW(parse_summary(Json::parse(R"({"kind": "estimate", "scenarios": []})")), ReportError);
  EXPECT_THROW(parse_summary(Json::parse(R"({"scenarios": [{"name": "a", "rows": [{"estimator": "tz"}]}]})")),
               ReportError);
}

TEST(JsonReport, ConfigKeys) {
  ScenarioConfig c;
  c.estimators = {EstimatorSpec{EstimatorTag::TZO}};
  const Json j = config_json(c);
  for (const char* k : {"design", "alpha", "beta", "outcomes", "covariate", "latent", "link", "n", "mode",
                        "estimators", "fractiles", "seed", "replications"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["estimators"][0], "tzo");
}

TEST(Render, MarkdownHasNineMetricColumns) {
  const std::string md = render_summary(three_rows(), TableFormat::Markdown);
  EXPECT_EQ(line(md, 0), "### s");
  const std::string head = line(md, 2);
  EXPECT_EQ(count_char(head, '|'), 11u);  // estimator + 9 metrics
  for (auto m : kMetricColumns) EXPECT_NE(head.find(std::string(m)), std::string::npos);
  EXPECT_NE(md.find("TT-BC(Z)"), std::string::npos);
  EXPECT_EQ(count_char(md, '\n'), 7u);
}

TEST(Render, CompareAppendsDeviationColumns) {
  auto ref = three_rows();
  for (auto& r : ref[0].rows) {
    r.mean = 0.0;
    r.median = std::nan("");
  }
  ref[0].rows.pop_back();
  const std::string md = render_summary(three_rows(), TableFormat::Markdown, &ref);
  const std::string head = line(md, 2);
  EXPECT_NE(head.find("d_mean"), std::string::npos);
  EXPECT_EQ(head.find("d_median"), std::string::npos);  // all-null in the reference
  EXPECT_EQ(head.find("d_failed_reps"), std::string::npos);
  EXPECT_EQ(count_char(head, '|'), 11u + 7u);
  EXPECT_NE(line(md, 4).find("0.0010"), std::string::npos);  // 0.001 - 0
  EXPECT_NE(line(md, 6).find(" - |"), std::string::npos);    // no reference row
}

TEST(Render, CompareMatchesByLabelAndFlagsMissingScenario) {
  auto ref = three_rows();
  ref[0].rows[0].id = "other";
  const std::string md = render_summary(three_rows(), TableFormat::Text, &ref);
  EXPECT_EQ(md.find(" - "), std::string::npos);
  ref[0].name = "elsewhere";
  EXPECT_NE(render_summary(three_rows(), TableFormat::Text, &ref).find("no reference"), std::string::npos);
}

TEST(Render, EmptyInputsThrow) {
  EXPECT_THROW(render_summary({}, TableFormat::Markdown), ReportError);
  std::vector<ScenarioSummary> s{{"x", Json::object(), {}}};
  EXPECT_THROW(render_summary(s, TableFormat::Text), ReportError);
  EXPECT_THROW(parse_table_format("html"), DomainError);
}

TEST(Render, CsvColumns) {
  const std::string csv = summary_csv(three_rows()[0].rows);
  EXPECT_EQ(line(csv, 0), "estimator,mean,median,rmse,ks_ratio,trim_pct,rej01,rej05,rej10,failed_reps");
  EXPECT_EQ(count_char(line(csv, 1), ','), 9u);
  EXPECT_EQ(line(csv, 1).substr(0, 10), "untrimmed,");
  EXPECT_EQ(std::stod(line(csv, 1).substr(10)), 0.001);
  EXPECT_EQ(count_char(csv, '\n'), 4u);
}
