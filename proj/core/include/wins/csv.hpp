#pragma once

#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace wins {

/// Line-oriented CSV writer with fixed "%.10g" number formatting so that
/// identical runs produce byte-identical files.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(std::initializer_list<double> values);
  void row(const std::vector<double>& values);

 private:
  void write_row(const double* v, size_t n);
  std::ofstream out_;
  size_t columns_;
};

std::string format_double(double v);

}  // namespace wins
