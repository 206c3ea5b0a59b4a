#ifndef IPWTT_SAMPLE_HPP
#define IPWTT_SAMPLE_HPP

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ipwtt/error.hpp"

namespace ipwtt {

/// One unit: realized outcome, treatment indicator and covariates.
struct Observation {
  double y = 0.0;
  int d = 0;
  std::vector<double> x;
};

/// Column names of a sample; `x` may contain a constant column.
struct Schema {
  std::string y = "y";
  std::string d = "d";
  std::vector<std::string> x;
};

/// An immutable set of n observations stored column-wise. Row i is the i-th
/// ingested observation and keeps that identity everywhere downstream.
///
/// Construction enforces n >= 2, d in {0,1} and both treatment arms
/// nonempty. Finiteness is not enforced here; `load_csv` rejects
/// non-finite cells and `validate` reports them.
class Sample {
 public:
  Sample(Eigen::VectorXd y, std::vector<int> d, Eigen::MatrixXd x,
         Schema names = {})
      : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)),
        names_(std::move(names)) {
    check();
  }

  explicit Sample(const std::vector<Observation>& obs, Schema names = {})
      : names_(std::move(names)) {
    const auto n = static_cast<Eigen::Index>(obs.size());
    const auto k = obs.empty() ? Eigen::Index{0}
                               : static_cast<Eigen::Index>(obs.front().x.size());
    y_.resize(n);
    d_.resize(obs.size());
    x_.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& o = obs[static_cast<std::size_t>(i)];
      if (static_cast<Eigen::Index>(o.x.size()) != k)
        throw ValidationError("observation " + std::to_string(i) +
                              " has covariate length " +
                              std::to_string(o.x.size()) + ", expected " +
                              std::to_string(k));
      y_(i) = o.y;
      d_[static_cast<std::size_t>(i)] = o.d;
      for (Eigen::Index j = 0; j < k; ++j) x_(i, j) = o.x[static_cast<std::size_t>(j)];
    }
    check();
  }

  std::size_t n() const noexcept { return d_.size(); }
  std::size_t k() const noexcept { return static_cast<std::size_t>(x_.cols()); }

  const Eigen::VectorXd& y() const noexcept { return y_; }
  const std::vector<int>& d() const noexcept { return d_; }
  const Eigen::MatrixXd& x() const noexcept { return x_; }
  double y(std::size_t i) const { return y_(static_cast<Eigen::Index>(i)); }
  int d(std::size_t i) const { return d_[i]; }
  double x(std::size_t i, std::size_t j) const {
    return x_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Schema& names() const noexcept { return names_; }

  std::size_t treated() const {
    return static_cast<std::size_t>(std::count(d_.begin(), d_.end(), 1));
  }

  Observation observation(std::size_t i) const {
    Observation o;
    o.y = y(i);
    o.d = d(i);
    o.x.resize(k());
    for (std::size_t j = 0; j < k(); ++j) o.x[j] = x(i, j);
    return o;
  }

  /// Index of covariate `name`; throws SchemaError if absent.
  std::size_t covariate_index(const std::string& name) const {
    const auto it = std::find(names_.x.begin(), names_.x.end(), name);
    if (it == names_.x.end()) throw SchemaError("no covariate named '" + name + "'");
    return static_cast<std::size_t>(it - names_.x.begin());
  }

 private:
  void check() {
    const std::size_t n = d_.size();
    if (static_cast<std::size_t>(y_.size()) != n ||
        static_cast<std::size_t>(x_.rows()) != n)
      throw ValidationError("column lengths differ");
    if (n < 2) throw ValidationError("sample needs at least 2 observations");
    for (std::size_t i = 0; i < n; ++i)
      if (d_[i] != 0 && d_[i] != 1)
        throw ValidationError("d must be 0 or 1 (observation " + std::to_string(i) + ")");
    const std::size_t t = treated();
    if (t == 0) throw ValidationError("treatment arm empty");
    if (t == n) throw ValidationError("control arm empty");
    if (names_.x.empty()) {
      for (std::size_t j = 0; j < k(); ++j) names_.x.push_back("x" + std::to_string(j + 1));
    } else if (names_.x.size() != k()) {
      throw ValidationError("covariate name count does not match k");
    }
  }

  Eigen::VectorXd y_;
  std::vector<int> d_;
  Eigen::MatrixXd x_;
  Schema names_;
};

// ---------------------------------------------------------------------------
// CSV

/// Raw CSV contents: header plus string cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw SchemaError("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string> split_commas(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    out.emplace_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_real(const std::string& cell, std::size_t row, const std::string& col) {
  if (cell.empty()) throw ParseError(row, "missing value in column '" + col + "'");
  double v = 0.0;
  const char* first = cell.data();
  const char* last = first + cell.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw ParseError(row, "non-numeric value '" + cell + "' in column '" + col + "'");
  if (!std::isfinite(v))
    throw ParseError(row, "non-finite value '" + cell + "' in column '" + col + "'");
  return v;
}

inline int parse_treatment(const std::string& cell, std::size_t row, const std::string& col) {
  if (cell == "0") return 0;
  if (cell == "1") return 1;
  if (cell.empty()) throw ParseError(row, "missing value in column '" + col + "'");
  throw ParseError(row, "treatment value '" + cell + "' in column '" + col +
                            "' is not 0 or 1");
}

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads a comma-separated file with a mandatory header row. Blank lines are
/// skipped; a row with the wrong number of fields is a ParseError.
inline CsvTable read_csv_table(std::istream& in) {
  CsvTable t;
  std::string line;
  bool have_header = false;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    if (!have_header) {
      // Strip a UTF-8 byte order mark.
      if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
      t.header = detail::split_commas(line);
      have_header = true;
      continue;
    }
    ++row;
    auto cells = detail::split_commas(line);
    if (cells.size() != t.header.size())
      throw ParseError(row, "expected " + std::to_string(t.header.size()) +
                                " fields, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw SchemaError("empty CSV: header row missing");
  return t;
}

inline CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  return read_csv_table(in);
}

/// Numeric column by name, with row-numbered parse errors.
inline std::vector<double> real_column(const CsvTable& t, const std::string& name) {
  const std::size_t c = t.column(name);
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    out.push_back(detail::parse_real(t.rows[r][c], r + 1, name));
  return out;
}

inline Sample sample_from_table(const CsvTable& t, const Schema& schema) {
  const std::size_t cy = t.column(schema.y);
  const std::size_t cd = t.column(schema.d);
  std::vector<std::size_t> cx;
  for (const auto& name : schema.x) cx.push_back(t.column(name));

  const auto n = static_cast<Eigen::Index>(t.rows.size());
  Eigen::VectorXd y(n);
  std::vector<int> d(t.rows.size());
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(cx.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& cells = t.rows[r];
    const auto i = static_cast<Eigen::Index>(r);
    y(i) = detail::parse_real(cells[cy], r + 1, schema.y);
    d[r] = detail::parse_treatment(cells[cd], r + 1, schema.d);
    for (std::size_t j = 0; j < cx.size(); ++j)
      x(i, static_cast<Eigen::Index>(j)) = detail::parse_real(cells[cx[j]], r + 1, schema.x[j]);
  }
  return Sample(std::move(y), std::move(d), std::move(x), schema);
}

/// Loads a sample from CSV. Throws SchemaError, ParseError (with the 1-based
/// data row) or ValidationError.
inline Sample load_csv(const std::string& path, const Schema& schema) {
  return sample_from_table(read_csv_table(path), schema);
}

/// Writes y, d, x columns with 17 significant digits.
inline void write_csv(const Sample& s, std::ostream& out) {
  out << s.names().y << ',' << s.names().d;
  for (const auto& name : s.names().x) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < s.n(); ++i) {
    out << detail::format_real(s.y(i)) << ',' << s.d(i);
    for (std::size_t j = 0; j < s.k(); ++j) out << ',' << detail::format_real(s.x(i, j));
    out << '\n';
  }
}

inline void write_csv(const Sample& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path + "'");
  write_csv(s, out);
}

// ---------------------------------------------------------------------------
// Validation report

struct ValidationReport {
  std::size_t treated = 0;
  std::size_t control = 0;
  /// "row i: column c is not finite" entries, 0-based row index.
  std::vector<std::string> violations;
  std::vector<std::string> constant_columns;
  std::vector<std::pair<std::size_t, std::size_t>> duplicate_rows;
  std::vector<std::string> warnings;
};

inline ValidationReport validate(const Sample& s) {
  ValidationReport rep;
  rep.treated = s.treated();
  rep.control = s.n() - rep.treated;

  for (std::size_t i = 0; i < s.n(); ++i) {
    if (!std::isfinite(s.y(i)))
      rep.violations.push_back("row " + std::to_string(i) + ": " + s.names().y + " is not finite");
    for (std::size_t j = 0; j < s.k(); ++j)
      if (!std::isfinite(s.x(i, j)))
        rep.violations.push_back("row " + std::to_string(i) + ": " + s.names().x[j] +
                                 " is not finite");
  }

  for (std::size_t j = 0; j < s.k(); ++j) {
    const auto col = s.x().col(static_cast<Eigen::Index>(j));
    if ((col.array() == col(0)).all()) rep.constant_columns.push_back(s.names().x[j]);
  }
  if (rep.constant_columns.size() >= 2)
    rep.warnings.push_back("collinear constant: columns " + rep.constant_columns[0] + " and " +
                           rep.constant_columns[1] + " are both constant");

  // Duplicate rows: bucket by full row content.
  std::map<std::vector<double>, std::size_t> seen;
  for (std::size_t i = 0; i < s.n(); ++i) {
    std::vector<double> key;
    key.reserve(s.k() + 2);
    key.push_back(s.y(i));
    key.push_back(static_cast<double>(s.d(i)));
    for (std::size_t j = 0; j < s.k(); ++j) key.push_back(s.x(i, j));
    if (std::any_of(key.begin(), key.end(), [](double v) { return std::isnan(v); })) continue;
    const auto [it, inserted] = seen.emplace(std::move(key), i);
    if (!inserted) rep.duplicate_rows.emplace_back(it->second, i);
  }
  if (!rep.duplicate_rows.empty())
    rep.warnings.push_back(std::to_string(rep.duplicate_rows.size()) + " duplicate row(s)");
  return rep;
}

}  // namespace ipwtt

#endif  // IPWTT_SAMPLE_HPP
