#include "wins/csv.hpp"

#include <cstdio>

namespace wins {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  for (size_t i = 0; i < header.size(); ++i) {
    out_ << header[i] << (i + 1 < header.size() ? "," : "\n");
  }
}

void CsvWriter::write_row(const double* v, size_t n) {
  if (n != columns_) throw std::invalid_argument("csv row width mismatch");
  for (size_t i = 0; i < n; ++i) {
    out_ << format_double(v[i]) << (i + 1 < n ? "," : "\n");
  }
}

void CsvWriter::row(std::initializer_list<double> values) {
  write_row(values.begin(), values.size());
}

void CsvWriter::row(const std::vector<double>& values) {
  write_row(values.data(), values.size());
}

}  // namespace wins
