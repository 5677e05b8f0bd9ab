#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "stapsdr/types.hpp"

namespace stapsdr::csv {

/// Shortest round-trip decimal representation, stable across runs.
std::string fmt(double v);
std::string fmt(int v);
std::string fmt(long v);

class Writer {
 public:
  Writer(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  size_t columns_;
};

}  // namespace stapsdr::csv
