#pragma once

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "medeff/data.hpp"
#include "medeff/error.hpp"
#include "medeff/metrics.hpp"

namespace medeff::io {

/// Shortest text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  for (int precision = 15; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

/// Splits one CSV line; double quotes delimit fields containing commas and
/// "" is an escaped quote.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return j;
    }
    throw ValidationError("column '" + name + "' not found in CSV header");
  }
};

inline CsvTable parse_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    for (auto& f : fields) f = trim(f);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw ValidationError("CSV line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw ValidationError("CSV input is empty (header row required)");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "' for reading");
  return parse_csv(in);
}

inline bool parse_number(const std::string& text, double& out) {
  if (text.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(text.c_str(), &end);
  return end == text.c_str() + text.size() && errno != ERANGE && std::isfinite(out);
}

struct ColumnRoles {
  std::string outcome;
  std::string exposure;
  std::vector<std::string> confounders;
};

struct DatasetLoad {
  Dataset data;
  std::size_t rows_read = 0;
  std::size_t rows_dropped = 0;  // rows with an empty cell in a mapped column
};

/// Builds a Dataset from mapped columns, dropping rows with any missing
/// (empty) mapped cell. Non-numeric cells and non-binary exposure are errors.
inline DatasetLoad dataset_from_table(const CsvTable& table, const ColumnRoles& roles) {
  if (roles.outcome.empty() || roles.exposure.empty()) {
    throw ValidationError("outcome and exposure columns must be named");
  }
  const std::size_t y_col = table.column(roles.outcome);
  const std::size_t a_col = table.column(roles.exposure);
  std::vector<std::size_t> c_cols;
  for (const auto& c : roles.confounders) c_cols.push_back(table.column(c));

  DatasetLoad out;
  out.rows_read = table.rows.size();
  out.data.outcome_name = roles.outcome;
  out.data.exposure_name = roles.exposure;
  out.data.confounder_names = roles.confounders;
  std::vector<std::vector<double>> kept;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    std::vector<double> values;
    bool missing = false;
    auto take = [&](std::size_t col, const std::string& name) {
      if (row[col].empty()) {
        missing = true;
        return;
      }
      double v = 0.0;
      if (!parse_number(row[col], v)) {
        throw ValidationError("non-numeric value '" + row[col] + "' in column '" + name + "' (data row " +
                              std::to_string(r + 1) + ")");
      }
      values.push_back(v);
    };
    take(y_col, roles.outcome);
    take(a_col, roles.exposure);
    for (std::size_t k = 0; k < c_cols.size(); ++k) take(c_cols[k], roles.confounders[k]);
    if (missing) {
      ++out.rows_dropped;
      continue;
    }
    if (values[1] != 0.0 && values[1] != 1.0) {
      throw ValidationError("exposure column '" + roles.exposure + "' must be binary (0/1); data row " +
                            std::to_string(r + 1) + " has " + row[a_col]);
    }
    kept.push_back(std::move(values));
  }
  if (kept.empty()) throw ValidationError("no complete cases in the mapped columns");
  const std::size_t n = kept.size();
  out.data.outcome.resize(n);
  out.data.exposure.resize(n);
  out.data.confounders.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c_cols.size()));
  for (std::size_t i = 0; i < n; ++i) {
    out.data.outcome[i] = kept[i][0];
    out.data.exposure[i] = kept[i][1];
    for (std::size_t k = 0; k < c_cols.size(); ++k) {
      out.data.confounders(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = kept[i][k + 2];
    }
  }
  return out;
}

inline DatasetLoad read_dataset(const std::string& path, const ColumnRoles& roles) {
  return dataset_from_table(read_csv_file(path), roles);
}

/// Header: outcome, exposure, confounders in order.
inline void write_dataset(std::ostream& out, const Dataset& data) {
  out << data.outcome_name << ',' << data.exposure_name;
  for (const auto& c : data.confounder_names) out << ',' << c;
  out << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    out << format_double(data.outcome[i]) << ',' << format_double(data.exposure[i]);
    for (Eigen::Index j = 0; j < data.confounders.cols(); ++j) {
      out << ',' << format_double(data.confounders(static_cast<Eigen::Index>(i), j));
    }
    out << '\n';
  }
}

inline ColumnRoles roles_of(const Dataset& data) {
  return {data.outcome_name, data.exposure_name, data.confounder_names};
}

// ---------------------------------------------------------------------------
// Simulation results

inline const std::vector<std::string>& replicates_header() {
  static const std::vector<std::string> h{"confounding", "scenario", "method",  "replicate",
                                          "delta_hat",   "se_hat",   "ci_lower", "ci_upper"};
  return h;
}

inline const std::vector<std::string>& metrics_header() {
  static const std::vector<std::string> h{"confounding",
                                          "scenario",
                                          "method",
                                          "bias",
                                          "relative_bias_pct",
                                          "empirical_se",
                                          "model_se",
                                          "relative_error_se_pct",
                                          "coverage_pct",
                                          "mcse_bias",
                                          "mcse_relative_bias_pct",
                                          "mcse_empirical_se",
                                          "mcse_model_se",
                                          "mcse_relative_error_se_pct",
                                          "mcse_coverage_pct"};
  return h;
}

inline const std::vector<std::string>& plotdata_header() {
  static const std::vector<std::string> h{"confounding", "scenario", "method", "bias", "mcse_bias"};
  return h;
}

inline void write_header(std::ostream& out, const std::vector<std::string>& header) {
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << '\n';
}

inline void write_replicates(std::ostream& out, const std::vector<ReplicateRecord>& records) {
  write_header(out, replicates_header());
  for (const auto& r : records) {
    out << r.confounding << ',' << r.scenario << ',' << method_label(r.method) << ',' << r.replicate << ','
        << format_double(r.delta_hat) << ',' << format_double(r.se_hat) << ',' << format_double(r.ci_lower) << ','
        << format_double(r.ci_upper) << '\n';
  }
}

inline void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows) {
  write_header(out, metrics_header());
  for (const auto& m : rows) {
    out << m.confounding << ',' << m.scenario << ',' << method_label(m.method);
    for (const double v : {m.bias, m.relative_bias_pct, m.empirical_se, m.model_se, m.relative_error_se_pct,
                           m.coverage_pct, m.mcse_bias, m.mcse_relative_bias_pct, m.mcse_empirical_se,
                           m.mcse_model_se, m.mcse_relative_error_se_pct, m.mcse_coverage_pct}) {
      out << ',' << format_double(v);
    }
    out << '\n';
  }
}

/// Long-format bias by scenario and method.
inline void write_plotdata(std::ostream& out, const std::vector<MetricsRow>& rows) {
  write_header(out, plotdata_header());
  for (const auto& m : rows) {
    out << m.confounding << ',' << m.scenario << ',' << method_label(m.method) << ',' << format_double(m.bias)
        << ',' << format_double(m.mcse_bias) << '\n';
  }
}

inline std::vector<ReplicateRecord> read_replicates(std::istream& in) {
  const CsvTable t = parse_csv(in);
  if (t.header != replicates_header()) throw ValidationError("replicates CSV has an unexpected header");
  std::vector<ReplicateRecord> out;
  for (const auto& row : t.rows) {
    ReplicateRecord r;
    r.confounding = row[0];
    r.scenario = row[1];
    r.method = parse_method(row[2]);
    double rep = 0.0;
    double vals[4];
    bool ok = parse_number(row[3], rep);
    for (int k = 0; k < 4; ++k) ok = ok && parse_number(row[4 + k], vals[k]);
    if (!ok || rep < 0.0) throw ValidationError("replicates CSV has a malformed row");
    r.replicate = static_cast<std::size_t>(rep);
    r.delta_hat = vals[0];
    r.se_hat = vals[1];
    r.ci_lower = vals[2];
    r.ci_upper = vals[3];
    out.push_back(std::move(r));
  }
  return out;
}

template <class Writer>
void write_file(const std::string& path, const Writer& writer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  writer(out);
  out.flush();
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace medeff::io
