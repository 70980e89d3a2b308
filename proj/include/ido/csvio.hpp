#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ido/errors.hpp"

namespace ido {

// 17 significant digits: doubles round-trip exactly through this format.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // rows[i] parsed from line i+2
};

inline CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open file: " + path);
  CsvFile csv;
  std::string line;
  if (!std::getline(in, line)) throw parse_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  csv.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    csv.rows.push_back(split_csv_line(line));
  }
  return csv;
}

inline double parse_double_cell(const std::string& cell, const std::string& path, size_t line_no,
                                const std::string& col) {
  try {
    size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw parse_error(path + ": line " + std::to_string(line_no) + ": non-numeric value '" +
                      cell + "' in column " + col);
  }
}

inline int parse_int_cell(const std::string& cell, const std::string& path, size_t line_no,
                          const std::string& col) {
  try {
    size_t pos = 0;
    const int v = std::stoi(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw parse_error(path + ": line " + std::to_string(line_no) + ": non-integer value '" +
                      cell + "' in column " + col);
  }
}

}  // namespace ido
