#pragma once

// Minimal comma-separated tables. Values never contain commas or quotes.

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "wwtp/checkpoint.hpp"
#include "wwtp/errors.hpp"

namespace wwtp {

inline std::string csv_number(double v) { return std::isnan(v) ? std::string() : format_double(v); }

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header, bool append = false)
      : path_(path), columns_(header.size()) {
    const bool existing = append && std::ifstream(path).good();
    out_.open(path, append ? std::ios::app : std::ios::trunc);
    if (!out_) throw UsageError("cannot write '" + path + "'");
    if (!existing) write(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_)
      throw UsageError("csv '" + path_ + "': row has " + std::to_string(cells.size()) + " cells, header has " +
                       std::to_string(columns_));
    write(cells);
  }

  void flush() { out_.flush(); }

 private:
  void write(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

  std::string path_;
  std::size_t columns_;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw UsageError("csv: no column '" + name + "'");
  }

  bool has_column(const std::string& name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  // Empty cells read as NaN.
  std::vector<double> numbers(const std::string& name) const {
    const std::size_t c = column(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r[c].empty() ? std::nan("") : parse_double(r[c]));
    return out;
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw UsageError("csv '" + path + "' is empty");
  t.header = split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size())
      throw UsageError("csv '" + path + "' line " + std::to_string(line_no) + ": expected " +
                       std::to_string(t.header.size()) + " cells, got " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace wwtp
