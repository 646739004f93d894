#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ropt/types.hpp"

namespace ropt {

// Shortest decimal string that round-trips back to the same double.
inline std::string fmt_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string fmt_int(std::int64_t v) { return std::to_string(v); }

class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path) : out_(path) {
    if (!out_) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  }

  void header(const std::vector<std::string>& cols) { line(cols); }

  void line(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  void close() { out_.close(); }

 private:
  std::ofstream out_;
};

// One row per sample: feature columns then the label.
inline std::vector<Sample> load_samples_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open '" + path + "'");
  std::vector<Sample> samples;
  std::string row;
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw std::runtime_error("csv: non-numeric cell '" + cell + "' in '" + path + "'");
      }
    }
    if (cells.size() < 2) throw std::runtime_error("csv: rows need at least one feature and a label");
    Sample s;
    s.x = Eigen::Map<const Vec>(cells.data(), static_cast<Eigen::Index>(cells.size()) - 1);
    s.y = cells.back();
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw std::runtime_error("csv: no rows in '" + path + "'");
  for (const auto& s : samples)
    if (s.x.size() != samples.front().x.size())
      throw std::runtime_error("csv: inconsistent column counts in '" + path + "'");
  return samples;
}

}  // namespace ropt
