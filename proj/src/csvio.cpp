#include "stapsdr/csvio.hpp"

#include <cstdio>
#include <stdexcept>

namespace stapsdr::csv {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt(int v) { return std::to_string(v); }
std::string fmt(long v) { return std::to_string(v); }

Writer::Writer(const std::string& path, const std::vector<std::string>& header)
    : out_(path), columns_(header.size()) {
  if (!out_) throw std::runtime_error("cannot open CSV for writing: " + path);
  for (size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
  out_ << "\n";
}

void Writer::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw std::runtime_error("CSV row width mismatch");
  for (size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
  out_ << "\n";
}

void Writer::close() { out_.close(); }

}  // namespace stapsdr::csv
