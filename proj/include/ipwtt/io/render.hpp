#ifndef IPWTT_IO_RENDER_HPP
#define IPWTT_IO_RENDER_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "ipwtt/error.hpp"
#include "ipwtt/io/json_report.hpp"

namespace ipwtt::io {

enum class TableFormat { Markdown, Text };

inline TableFormat parse_table_format(std::string_view s) {
  if (s == "markdown" || s == "md") return TableFormat::Markdown;
  if (s == "text" || s == "txt") return TableFormat::Text;
  throw DomainError("unknown table format '" + std::string(s) + "'");
}

/// The metric columns, in output order.
inline constexpr std::array<std::string_view, 9> kMetricColumns{
    "mean", "median", "rmse", "ks_ratio", "trim_pct", "rej01", "rej05", "rej10", "failed_reps"};

namespace detail {

inline double metric(const SummaryRow& r, std::size_t i) {
  switch (i) {
    case 0: return r.mean;
    case 1: return r.median;
    case 2: return r.rmse;
    case 3: return r.ks_ratio;
    case 4: return r.trim_pct;
    case 5: return r.rej01;
    case 6: return r.rej05;
    case 7: return r.rej10;
    default: return static_cast<double>(r.failed_reps);
  }
}

inline std::string cell(double v, int decimals = 4) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline const SummaryRow* find_row(const ScenarioSummary& s, const SummaryRow& key) {
  for (const auto& r : s.rows)
    if (r.id == key.id) return &r;
  for (const auto& r : s.rows)
    if (r.label == key.label) return &r;
  return nullptr;
}

inline const ScenarioSummary* find_scenario(const std::vector<ScenarioSummary>& ref, const std::string& name) {
  for (const auto& s : ref)
    if (s.name == name) return &s;
  return nullptr;
}

inline std::string render_grid(const std::vector<std::vector<std::string>>& grid, TableFormat fmt) {
  std::vector<std::size_t> width(grid.front().size(), 0);
  for (const auto& row : grid)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  auto pad = [&](const std::string& s, std::size_t c) {
    const std::string fill(width[c] - s.size(), ' ');
    return c == 0 ? s + fill : fill + s;
  };
  std::string out;
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (fmt == TableFormat::Markdown) {
      out += '|';
      for (std::size_t c = 0; c < grid[r].size(); ++c) out += ' ' + pad(grid[r][c], c) + " |";
      out += '\n';
      if (r == 0) {
        out += '|';
        for (std::size_t c = 0; c < width.size(); ++c)
          out += c == 0 ? ' ' + std::string(width[c], '-') + " |"
                        : ' ' + std::string(width[c] - 1, '-') + ": |";
        out += '\n';
      }
    } else {
      for (std::size_t c = 0; c < grid[r].size(); ++c) out += (c ? "  " : "") + pad(grid[r][c], c);
      out += '\n';
      if (r == 0) {
        std::size_t total = 0;
        for (std::size_t c = 0; c < width.size(); ++c) total += width[c] + (c ? 2 : 0);
        out += std::string(total, '-') + '\n';
      }
    }
  }
  return out;
}

}  // namespace detail

/// One table per scenario. With a reference, each metric the reference
/// reports gains a d_<metric> column holding (value - reference).
inline std::string render_summary(const std::vector<ScenarioSummary>& scenarios, TableFormat fmt,
                                  const std::vector<ScenarioSummary>* reference = nullptr) {
  if (scenarios.empty()) throw ReportError("summary has no scenarios");
  std::string out;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    const auto& sc = scenarios[s];
    if (sc.rows.empty()) throw ReportError("scenario '" + sc.name + "' has no rows");
    if (s) out += '\n';
    out += fmt == TableFormat::Markdown ? "### " + sc.name + "\n\n" : sc.name + "\n";

    const ScenarioSummary* ref = reference ? detail::find_scenario(*reference, sc.name) : nullptr;
    std::vector<std::size_t> dev_cols;
    if (ref)
      for (std::size_t i = 0; i + 1 < kMetricColumns.size(); ++i)
        for (const auto& r : ref->rows)
          if (!std::isnan(detail::metric(r, i))) {
            dev_cols.push_back(i);
            break;
          }

    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> head{"estimator"};
    for (auto m : kMetricColumns) head.emplace_back(m);
    for (auto i : dev_cols) head.push_back("d_" + std::string(kMetricColumns[i]));
    grid.push_back(head);
    for (const auto& r : sc.rows) {
      std::vector<std::string> line{r.label};
      for (std::size_t i = 0; i + 1 < kMetricColumns.size(); ++i) line.push_back(detail::cell(detail::metric(r, i)));
      line.push_back(std::to_string(r.failed_reps));
      const SummaryRow* rr = ref ? detail::find_row(*ref, r) : nullptr;
      for (auto i : dev_cols) {
        const double want = rr ? detail::metric(*rr, i) : std::nan("");
        line.push_back(std::isnan(want) ? "-" : detail::cell(detail::metric(r, i) - want));
      }
      grid.push_back(std::move(line));
    }
    if (reference && !ref) out += fmt == TableFormat::Markdown ? "_no reference values_\n\n" : "(no reference values)\n";
    out += detail::render_grid(grid, fmt);
  }
  return out;
}

/// CSV with one row per estimator.
inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  std::string out = "estimator";
  for (auto m : kMetricColumns) out += "," + std::string(m);
  out += '\n';
  for (const auto& r : rows) {
    out += r.id;
    for (std::size_t i = 0; i + 1 < kMetricColumns.size(); ++i)
      out += "," + ipwtt::detail::format_real(detail::metric(r, i));
    out += "," + std::to_string(r.failed_reps) + '\n';
  }
  return out;
}

}  // namespace ipwtt::io

#endif  // IPWTT_IO_RENDER_HPP
