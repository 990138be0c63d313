#pragma once

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sgflow/mesh.hpp"
#include "sgflow/types.hpp"

namespace sgflow {

inline std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw ConfigError("csv: missing column " + name);
  }
};

// Full-precision CSV: written values re-import bitwise.
inline void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream f(path);
  if (!f) throw SolverError("cannot open " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i)
    f << (i ? "," : "") << table.header[i];
  f << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i)
      f << (i ? "," : "") << format_full(row[i]);
    f << "\n";
  }
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw SolverError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(f, line)) throw SolverError("empty csv: " + path);
  std::stringstream hs(line);
  std::string cell;
  while (std::getline(hs, cell, ',')) t.header.push_back(cell);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    while (std::getline(ls, cell, ',')) row.push_back(std::strtod(cell.c_str(), nullptr));
    t.rows.push_back(std::move(row));
  }
  return t;
}

// nodal field as (x, y, value) rows
inline void export_field_csv(const Vector& field, const std::vector<double>& xs,
                             const std::vector<double>& ys,
                             const std::string& path) {
  require(field.size() == static_cast<int>(xs.size()) &&
              xs.size() == ys.size(),
          "export_field_csv: field length must match the node count");
  CsvTable t;
  t.header = {"x", "y", "value"};
  for (int i = 0; i < field.size(); ++i)
    t.rows.push_back({xs[i], ys[i], field(i)});
  write_csv(path, t);
}

inline Vector import_field_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int c = t.col("value");
  Vector v(static_cast<int>(t.rows.size()));
  for (std::size_t i = 0; i < t.rows.size(); ++i) v(static_cast<int>(i)) = t.rows[i][c];
  return v;
}

// ---------------------------------------------------------------------------
// gnuplot scripts reading the exported CSVs
// ---------------------------------------------------------------------------

inline void write_gnuplot_timestep(const std::string& path,
                                   const std::string& history_csv) {
  std::ofstream f(path);
  f << "set datafile separator ','\n"
    << "set logscale y\n"
    << "set xlabel 't [s]'\nset ylabel 'time step k [s]'\n"
    << "plot '" << history_csv
    << "' every ::1 using 2:3 with steps title 'step size'\n";
}

inline void write_gnuplot_coeff_norms(const std::string& path,
                                      const std::string& norms_csv,
                                      int n_modes) {
  std::ofstream f(path);
  f << "set datafile separator ','\n"
    << "set logscale y\nset xlabel 't [s]'\nset ylabel '||u_k||_2'\n"
    << "plot ";
  for (int k = 0; k < n_modes; ++k)
    f << (k ? ", " : "") << "'" << norms_csv << "' every ::1 using 1:"
      << (k + 2) << " with lines title 'mode " << (k + 1) << "'";
  f << "\n";
}

inline void write_gnuplot_pdf(const std::string& path,
                              const std::vector<std::string>& pdf_csvs) {
  std::ofstream f(path);
  f << "set datafile separator ','\n"
    << "set xlabel 'velocity'\nset ylabel 'estimated pdf'\n"
    << "plot ";
  for (std::size_t i = 0; i < pdf_csvs.size(); ++i)
    f << (i ? ", " : "") << "'" << pdf_csvs[i]
      << "' every ::1 using 1:2 with lines title '" << pdf_csvs[i] << "'";
  f << "\n";
}

}  // namespace sgflow
