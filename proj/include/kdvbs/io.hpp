// Text formatting shared by the CSV and JSON writers.
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "kdvbs/errors.hpp"

namespace kdvbs {

// 17 significant digits: round-trips every double.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open output file " + path.string());
  return out;
}

}  // namespace kdvbs
