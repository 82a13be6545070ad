#pragma once

// Result rows and their CSV form. One metric per row; numbers are written
// with %.17g so a rerun reproduces the file byte for byte.

#include "posce/core.hpp"

#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace posce::harness {

inline constexpr const char* kCsvHeader =
    "experiment,scheme,bem,mode,sweep_var,sweep_value,metric,value,trials,seed,config_hash";

struct ResultRow {
  std::string experiment;
  std::string scheme;
  std::string bem;
  std::string mode;
  std::string sweep_var;
  double sweep_value = 0.0;
  std::string metric;
  double value = 0.0;
  int trials = 0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv_line(const ResultRow& r) {
  std::ostringstream os;
  os << r.experiment << ',' << r.scheme << ',' << r.bem << ',' << r.mode << ',' << r.sweep_var << ','
     << format_double(r.sweep_value) << ',' << r.metric << ',' << format_double(r.value) << ',' << r.trials << ','
     << r.seed << ',' << r.config_hash;
  return os.str();
}

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  os << kCsvHeader << '\n';
  for (const ResultRow& r : rows) os << to_csv_line(r) << '\n';
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
  std::ostringstream os;
  write_csv(os, rows);
  return os.str();
}

/// Parses a results file. Rows stamped with different config hashes cannot be
/// aggregated together and are rejected.
inline std::vector<ResultRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw Error("csv: missing or wrong header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw Error("csv: expected 11 fields, got " + std::to_string(f.size()));
    ResultRow r;
    r.experiment = f[0];
    r.scheme = f[1];
    r.bem = f[2];
    r.mode = f[3];
    r.sweep_var = f[4];
    r.sweep_value = std::stod(f[5]);
    r.metric = f[6];
    r.value = std::stod(f[7]);
    r.trials = std::stoi(f[8]);
    r.seed = std::stoull(f[9]);
    r.config_hash = f[10];
    if (!rows.empty() && rows.front().config_hash != r.config_hash)
      throw Error("csv: mixed config hashes cannot be aggregated");
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace posce::harness
