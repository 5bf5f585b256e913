#pragma once

// CSV and JSON serialization.
//
// CSV: comma-separated, header row, '.' decimal point, rows in time order.
// Numbers are written in shortest round-trip form, so write + read is exact.

#include <nlohmann/json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "seqicp/dataset.hpp"
#include "seqicp/error.hpp"
#include "seqicp/search.hpp"
#include "seqicp/simulation.hpp"

namespace seqicp {

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                         : comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_number(const std::string& cell, std::size_t row, std::size_t col, const std::string& name) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = cell.data() + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc() || ptr != end || !std::isfinite(value))
    throw Error(ErrorCode::ParseError, "row " + std::to_string(row) + ", column " + std::to_string(col) + " (" +
                                           name + "): '" + cell + "' is not a finite number");
  return value;
}

}  // namespace detail

inline std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

/// Column selector: a header name, or a 0-based index written as "#k".
inline Dataset parse_csv(std::istream& in, const std::string& target) {
  std::string line;
  // skip a UTF-8 byte order mark and blank lines before the header
  while (std::getline(in, line)) {
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!detail::trim(line).empty()) break;
  }
  require(!detail::trim(line).empty(), ErrorCode::ParseError, "missing header row");
  const auto header = detail::split_csv_line(line);

  std::size_t target_col = header.size();
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == target) target_col = c;
  if (target_col == header.size() && target.size() > 1 && target[0] == '#') {
    std::size_t idx = 0;
    const auto [ptr, ec] = std::from_chars(target.data() + 1, target.data() + target.size(), idx);
    if (ec == std::errc() && ptr == target.data() + target.size() && idx < header.size()) target_col = idx;
  }
  require(target_col < header.size(), ErrorCode::MissingTarget, "target column '" + target + "' not found");

  std::vector<std::vector<double>> rows;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    require(cells.size() == header.size(), ErrorCode::ParseError,
            "row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(header.size()));
    std::vector<double> values(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      values[c] = detail::parse_number(cells[c], row_number, c + 1, header[c]);
    rows.push_back(std::move(values));
  }

  Dataset data;
  data.target_name = header[target_col];
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  data.y.resize(n);
  data.x.resize(n, d);
  for (std::size_t c = 0; c < header.size(); ++c)
    if (c != target_col) data.column_names.push_back(header[c]);
  for (Eigen::Index r = 0; r < n; ++r) {
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target_col)
        data.y(r) = rows[static_cast<std::size_t>(r)][c];
      else
        data.x(r, j++) = rows[static_cast<std::size_t>(r)][c];
    }
  }
  data.validate();
  return data;
}

inline Dataset load_csv(const std::string& path, const std::string& target) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::ParseError, "cannot open " + path);
  return parse_csv(in, target);
}

/// Target column first, then the predictors.
inline void write_csv(std::ostream& out, const Dataset& data) {
  out << data.target_name;
  for (const auto& name : data.column_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index r = 0; r < data.n(); ++r) {
    out << format_double(data.y(r));
    for (Eigen::Index j = 0; j < data.d(); ++j) out << ',' << format_double(data.x(r, j));
    out << '\n';
  }
}

inline void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::InvalidArgument, "cannot write " + path);
  write_csv(out, data);
}

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

inline nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline std::vector<std::string> subset_names(Subset s, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (int j : s.indices()) out.push_back(names.at(static_cast<std::size_t>(j)));
  return out;
}

/// 1-based column indices.
inline std::vector<int> subset_indices_1based(Subset s) {
  auto idx = s.indices();
  for (int& j : idx) ++j;
  return idx;
}

inline nlohmann::json to_json(const NullSummary& s) {
  return {{"count", s.count}, {"min", s.min}, {"max", s.max},
          {"quantiles", {{"0.5", s.q50}, {"0.9", s.q90}, {"0.95", s.q95}, {"0.99", s.q99}}}};
}

inline nlohmann::json to_json(const TestOutcome& o) {
  return {{"statistic", o.statistic_value}, {"p_value", o.p_value}, {"reject", o.reject},
          {"null_summary", to_json(o.null_summary)}};
}

inline nlohmann::json to_json(const StatisticSpec& s) {
  nlohmann::json j{{"family", std::string(to_string(s.family))}};
  if (is_block_family(s.family)) {
    j["combiner"] = std::string(to_string(s.combiner));
    j["comparison"] = s.layout.kind == ComparisonKind::F1 ? "f1" : "f2";
    j["grid"] = s.layout.grid ? nlohmann::json(*s.layout.grid) : nlohmann::json("default");
    if (s.layout.min_size) j["min_size"] = *s.layout.min_size;
  } else {
    j["bandwidth"] = s.bandwidth.fixed ? nlohmann::json(*s.bandwidth.fixed) : nlohmann::json("auto");
  }
  return j;
}

inline nlohmann::json config_json(const TestConfig& c, TestKind test) {
  nlohmann::json j{{"test", test == TestKind::Decoupled ? "decoupled" : "single"},
                   {"B", c.B},
                   {"alpha", c.alpha},
                   {"lags", c.lags},
                   {"seed", c.seed}};
  StatisticSpec spec = c.statistic;
  if (test == TestKind::Decoupled) {
    j["stat"] = "decoupled";
    j["combiner"] = std::string(to_string(spec.combiner));
    j["comparison"] = spec.layout.kind == ComparisonKind::F1 ? "f1" : "f2";
    j["grid"] = spec.layout.grid ? nlohmann::json(*spec.layout.grid) : nlohmann::json("default");
  } else {
    j["stat"] = to_json(spec);
  }
  return j;
}

inline nlohmann::json to_json(const SubsetResult& r, const std::vector<std::string>& names) {
  nlohmann::json j{{"indices", subset_indices_1based(r.subset)},
                   {"names", subset_names(r.subset, names)},
                   {"p_value", r.outcome.p_value},
                   {"statistic", r.outcome.statistic_value},
                   {"accepted", r.accepted}};
  if (r.decoupled) {
    j["components"] = nlohmann::json::array(
        {{{"stat", "t1"}, {"statistic", r.decoupled->coefficient.statistic_value},
          {"p_value", r.decoupled->coefficient.p_value}},
         {{"stat", "t2"}, {"statistic", r.decoupled->variance.statistic_value},
          {"p_value", r.decoupled->variance.p_value}}});
  }
  return j;
}

inline nlohmann::json to_json(const SearchReport& report) {
  nlohmann::json j;
  j["estimate"] = subset_names(report.estimate, report.column_names);
  nlohmann::json vars = nlohmann::json::array();
  for (std::size_t k = 0; k < report.column_names.size(); ++k)
    vars.push_back({{"name", report.column_names[k]},
                    {"p_value", nullable(k < report.variable_p_values.size() ? report.variable_p_values[k]
                                                                             : std::nan(""))}});
  j["variables"] = vars;
  nlohmann::json subsets = nlohmann::json::array();
  for (const auto& r : report.subset_results) subsets.push_back(to_json(r, report.column_names));
  j["subsets"] = subsets;
  j["config"] = config_json(report.config, report.test);
  j["stats"] = {{"tested", report.tested}, {"skipped", report.skipped}, {"any_accepted", report.any_accepted}};
  if (report.strategy) {
    j["config"]["strategy"] = *report.strategy == LagStrategy::MaxSet ? "max-set" : "bonferroni-union";
    j["config"]["lag_set"] = report.lag_set;
    nlohmann::json per_lag = nlohmann::json::array();
    for (const auto& sub : report.per_lag) {
      auto entry = to_json(sub);
      entry["lag"] = sub.config.lags;
      per_lag.push_back(std::move(entry));
    }
    j["per_lag"] = per_lag;
  }
  return j;
}

inline nlohmann::json ground_truth_json(const LabeledDataset& ld) {
  nlohmann::json envs = nlohmann::json::array();
  for (const auto& e : ld.environments) envs.push_back(nlohmann::json(e));
  return {{"kind", std::string(to_string(ld.kind))},
          {"n", ld.dataset.n()},
          {"seed", ld.seed},
          {"target", ld.dataset.target_name},
          {"columns", ld.dataset.column_names},
          {"true_parents", subset_names(ld.true_parents, ld.dataset.column_names)},
          {"true_change_points", ld.true_change_points},
          {"parameters", nlohmann::json(ld.parameters)},
          {"environments", envs}};
}

inline nlohmann::json to_json(const Cell& c) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, c);
}

inline nlohmann::json to_json(const ExperimentTable& t) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : t.rows) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t c = 0; c < t.columns.size(); ++c) obj[t.columns[c]] = to_json(row[c]);
    rows.push_back(std::move(obj));
  }
  return {{"columns", t.columns}, {"rows", rows}};
}

inline void write_csv(std::ostream& out, const ExperimentTable& t) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
    return q + "\"";
  };
  for (std::size_t c = 0; c < t.columns.size(); ++c) out << (c ? "," : "") << t.columns[c];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ',';
      std::visit(
          [&](const auto& v) {
            using V = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::string>)
              out << quote(v);
            else if constexpr (std::is_same_v<V, double>)
              out << format_double(v);
            else
              out << v;
          },
          row[c]);
    }
    out << '\n';
  }
}

}  // namespace seqicp
