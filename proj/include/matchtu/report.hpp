#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "matchtu/bench.hpp"

namespace matchtu {

enum class ReportFormat { kJson, kCsv };

inline std::optional<ReportFormat> parse_report_format(
    const std::string& name) {
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  return std::nullopt;
}

namespace detail {

// 17 significant digits round-trip any double exactly.
inline std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted += c;
  }
  quoted += '"';
  return quoted;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> columns = {
      "schema_version", "mode", "size", "batch_size", "dim", "iters",
      "warmup_iters", "beta", "seed", "mean_time_per_iter_s",
      "peak_solver_bytes", "memory_measured", "machine", "generator",
      "per_iter_times_s"};
  return columns;
}

}  // namespace detail

inline nlohmann::json report_json(const std::vector<ExperimentRecord>& records) {
  nlohmann::json j;
  j["schema_version"] = kReportSchemaVersion;
  j["records"] = nlohmann::json::array();
  for (const auto& r : records) j["records"].push_back(record_to_json(r));
  return j;
}

// Writes the records in a stable column order; the CSV carries the same
// fields as the JSON schema (iteration times joined with ';') so the two
// formats convert into each other losslessly.
inline void emit_report(const std::vector<ExperimentRecord>& records,
                        ReportFormat format,
                        const std::filesystem::path& path) {
  if (records.empty()) {
    throw std::invalid_argument("emit_report: no records");
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error(path.string() + ": cannot open for writing");
  }
  if (format == ReportFormat::kJson) {
    out << report_json(records).dump(2) << "\n";
    return;
  }

  const auto& columns = detail::csv_columns();
  for (std::size_t i = 0; i < columns.size(); ++i) {
    out << (i == 0 ? "" : ",") << columns[i];
  }
  out << "\n";
  for (const auto& r : records) {
    std::string times;
    for (std::size_t i = 0; i < r.per_iter_times_s.size(); ++i) {
      if (i > 0) times += ';';
      times += detail::format_double(r.per_iter_times_s[i]);
    }
    out << kReportSchemaVersion << "," << detail::csv_quote(r.mode) << ","
        << r.size << "," << r.batch_size << "," << r.dim << "," << r.iters
        << "," << r.warmup_iters << "," << detail::format_double(r.beta)
        << "," << r.seed << ","
        << detail::format_double(r.mean_time_per_iter_s) << ","
        << r.peak_solver_bytes << "," << (r.memory_measured ? "true" : "false")
        << "," << detail::csv_quote(r.machine) << ","
        << detail::csv_quote(r.generator) << "," << detail::csv_quote(times)
        << "\n";
  }
}

inline std::vector<ExperimentRecord> read_report(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open");

  // Sniff: JSON reports start with '{'.
  const int first = in.peek();
  if (first == '{') {
    nlohmann::json j;
    in >> j;
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      throw std::runtime_error(path.string() + ": unknown schema version");
    }
    std::vector<ExperimentRecord> records;
    for (const auto& rj : j.at("records")) {
      records.push_back(record_from_json(rj));
    }
    return records;
  }

  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(path.string() + ": empty report");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (detail::csv_split(line) != detail::csv_columns()) {
    throw std::runtime_error(path.string() + ": unexpected CSV header");
  }
  std::vector<ExperimentRecord> records;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = detail::csv_split(line);
    if (fields.size() != detail::csv_columns().size()) {
      throw std::runtime_error(path.string() + ": malformed CSV row");
    }
    if (std::stoi(fields[0]) != kReportSchemaVersion) {
      throw std::runtime_error(path.string() + ": unknown schema version");
    }
    ExperimentRecord r;
    r.mode = fields[1];
    r.size = std::stoull(fields[2]);
    r.batch_size = std::stoull(fields[3]);
    r.dim = std::stoull(fields[4]);
    r.iters = std::stoi(fields[5]);
    r.warmup_iters = std::stoi(fields[6]);
    r.beta = std::stod(fields[7]);
    r.seed = std::stoull(fields[8]);
    r.mean_time_per_iter_s = std::stod(fields[9]);
    r.peak_solver_bytes = std::stoull(fields[10]);
    r.memory_measured = fields[11] == "true";
    r.machine = fields[12];
    r.generator = fields[13];
    if (!fields[14].empty()) {
      std::istringstream ts(fields[14]);
      std::string tok;
      while (std::getline(ts, tok, ';')) {
        r.per_iter_times_s.push_back(std::stod(tok));
      }
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw std::runtime_error(path.string() + ": report has no records");
  }
  return records;
}

}  // namespace matchtu
