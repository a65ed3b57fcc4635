// Flat `key = value` run configuration and initial-condition profiles.
#pragma once

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kdvbs/errors.hpp"
#include "kdvbs/mesh.hpp"
#include "kdvbs/transforms.hpp"

namespace kdvbs {

enum class InitialProfile { gauss_bump, raised_cosine, stationary_2pi, custom_csv };

inline const char* to_string(InitialProfile p) {
  switch (p) {
    case InitialProfile::gauss_bump: return "gauss_bump";
    case InitialProfile::raised_cosine: return "raised_cosine";
    case InitialProfile::stationary_2pi: return "stationary_2pi";
    case InitialProfile::custom_csv: return "custom_csv";
  }
  return "?";
}

struct SimConfig {
  double L = 1.0;
  double lambda = 1.0;
  std::size_t n = 101;
  std::optional<double> dt;       // default h
  std::optional<double> T;        // default 10/lambda, or 10 when lambda = 0
  std::optional<double> epsilon;  // default lambda/2
  double kernel_tol = 1e-6;
  int kernel_max_degree = 16;
  InitialProfile initial_condition = InitialProfile::gauss_bump;
  double ic_amplitude = 1.0;
  std::optional<double> ic_center;  // gauss_bump, default L/2
  std::optional<double> ic_width;   // gauss_bump, default L/16
  std::string ic_file;              // custom_csv
  std::string output_prefix = "kdvbs";
  std::uint64_t seed = 1;
  bool open_loop = false;
  std::size_t output_stride = 1;  // trajectory CSV keeps every stride-th snapshot

  double spacing() const { return L / static_cast<double>(n - 1); }
  double resolved_dt() const { return dt.value_or(spacing()); }
  double resolved_T() const { return T.value_or(lambda > 0.0 ? 10.0 / lambda : 10.0); }
  double resolved_epsilon() const { return epsilon.value_or(0.5 * lambda); }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// A real, optionally written as a multiple of pi ("2pi", "0.5*pi", "pi").
inline double parse_real(const std::string& key, const std::string& text) {
  std::string t = text;
  double factor = 1.0;
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    factor = std::numbers::pi;
    t.resize(t.size() - 2);
    if (!t.empty() && t.back() == '*') t.pop_back();
    if (t.empty()) return factor;
  }
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError(key, "expected a real number, got '" + text + "'");
  }
  return v * factor;
}

inline long long parse_integer(const std::string& key, const std::string& text) {
  errno = 0;
  char* end = nullptr;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw ConfigError(key, "expected an integer, got '" + text + "'");
  }
  return v;
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key, "expected true or false, got '" + text + "'");
}

inline bool near_two_pi(double L) { return std::abs(L - 2.0 * std::numbers::pi) <= 1e-12 * 2.0 * std::numbers::pi; }

}  // namespace detail

/// Checks the invariants that span several keys.
inline void validate(const SimConfig& c) {
  if (!(c.L > 0.0)) throw ConfigError("L", "must be positive");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda", "must be >= 0");
  if (c.n < 21) throw ConfigError("n", "must be at least 21");
  if (c.dt && !(*c.dt > 0.0)) throw ConfigError("dt", "must be positive");
  if (c.T && !(*c.T > 0.0)) throw ConfigError("T", "must be positive");
  if (c.lambda > 0.0) {
    const double eps = c.resolved_epsilon();
    if (!(eps > 0.0 && eps < c.lambda)) throw ConfigError("epsilon", "must lie in (0, lambda)");
  }
  if (!(c.kernel_tol > 0.0)) throw ConfigError("kernel_tol", "must be positive");
  if (c.kernel_max_degree < 4) throw ConfigError("kernel_max_degree", "must be at least 4");
  if (c.ic_width && !(*c.ic_width > 0.0)) throw ConfigError("ic_width", "must be positive");
  if (c.initial_condition == InitialProfile::stationary_2pi && !detail::near_two_pi(c.L)) {
    throw ConfigError("L", "stationary_2pi requires L = 2pi");
  }
  if (c.initial_condition == InitialProfile::custom_csv && c.ic_file.empty()) {
    throw ConfigError("ic_file", "custom_csv needs ic_file");
  }
  if (c.output_prefix.empty()) throw ConfigError("output_prefix", "must not be empty");
  if (c.output_stride < 1) throw ConfigError("output_stride", "must be at least 1");
}

/// One `key = value` per line, `#` starts a comment. Later lines override
/// earlier ones, so command-line overrides can be appended as text.
inline SimConfig parse_config(const std::string& text) {
  SimConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(line, "expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (value.empty()) throw ConfigError(key, "missing value");

    if (key == "L") {
      c.L = detail::parse_real(key, value);
    } else if (key == "lambda") {
      c.lambda = detail::parse_real(key, value);
    } else if (key == "n") {
      const long long v = detail::parse_integer(key, value);
      if (v < 21) throw ConfigError(key, "must be at least 21");
      c.n = static_cast<std::size_t>(v);
    } else if (key == "dt") {
      c.dt = detail::parse_real(key, value);
    } else if (key == "T") {
      c.T = detail::parse_real(key, value);
    } else if (key == "epsilon") {
      c.epsilon = detail::parse_real(key, value);
    } else if (key == "kernel_tol") {
      c.kernel_tol = detail::parse_real(key, value);
    } else if (key == "kernel_max_degree") {
      c.kernel_max_degree = static_cast<int>(detail::parse_integer(key, value));
    } else if (key == "initial_condition") {
      if (value == "gauss_bump") c.initial_condition = InitialProfile::gauss_bump;
      else if (value == "raised_cosine") c.initial_condition = InitialProfile::raised_cosine;
      else if (value == "stationary_2pi") c.initial_condition = InitialProfile::stationary_2pi;
      else if (value == "custom_csv") c.initial_condition = InitialProfile::custom_csv;
      else throw ConfigError(key, "unknown profile '" + value + "'");
    } else if (key == "ic_amplitude") {
      c.ic_amplitude = detail::parse_real(key, value);
    } else if (key == "ic_center") {
      c.ic_center = detail::parse_real(key, value);
    } else if (key == "ic_width") {
      c.ic_width = detail::parse_real(key, value);
    } else if (key == "ic_file") {
      c.ic_file = value;
    } else if (key == "output_prefix") {
      c.output_prefix = value;
    } else if (key == "seed") {
      const long long v = detail::parse_integer(key, value);
      if (v < 0) throw ConfigError(key, "must be >= 0");
      c.seed = static_cast<std::uint64_t>(v);
    } else if (key == "open_loop") {
      c.open_loop = detail::parse_bool(key, value);
    } else if (key == "output_stride") {
      const long long v = detail::parse_integer(key, value);
      if (v < 1) throw ConfigError(key, "must be at least 1");
      c.output_stride = static_cast<std::size_t>(v);
    } else {
      throw ConfigError(key, "unknown key");
    }
  }
  validate(c);
  return c;
}

inline SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot read " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

/// Two-column CSV (x, value); a non-numeric first line is taken as a header.
inline Field read_profile_csv(const std::filesystem::path& path, const IntervalGrid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("ic_file", "cannot read " + path.string());
  std::vector<double> xs, vs;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("ic_file", "expected two columns: " + line);
    const std::string a = detail::trim(line.substr(0, comma)), b = detail::trim(line.substr(comma + 1));
    char* end = nullptr;
    const double x = std::strtod(a.c_str(), &end);
    if (end != a.c_str() + a.size() || a.empty()) {
      if (first) {
        first = false;
        continue;
      }
      throw ConfigError("ic_file", "bad number in line: " + line);
    }
    first = false;
    xs.push_back(x);
    vs.push_back(detail::parse_real("ic_file", b));
  }
  if (xs.size() < 2) throw ConfigError("ic_file", "need at least two samples");
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw ConfigError("ic_file", "x must increase");
  }
  const double slack = 1e-12 * grid.length();
  if (xs.front() > slack || xs.back() < grid.length() - slack) {
    throw ConfigError("ic_file", "samples must cover [0, L]");
  }
  return Field::sample(grid, [&](double x) {
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return vs.front();
    if (it == xs.end()) return vs.back();
    const std::size_t j = static_cast<std::size_t>(it - xs.begin());
    const double s = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
    return (1.0 - s) * vs[j - 1] + s * vs[j];
  });
}

inline Field initial_profile(const SimConfig& c, const IntervalGrid& grid) {
  const double L = grid.length();
  const double amp = c.ic_amplitude;
  switch (c.initial_condition) {
    case InitialProfile::gauss_bump: {
      const double center = c.ic_center.value_or(0.5 * L);
      const double width = c.ic_width.value_or(L / 16.0);
      return Field::sample(grid, [&](double x) {
        return amp * std::exp(-(x - center) * (x - center) / (2.0 * width * width));
      });
    }
    case InitialProfile::raised_cosine:
      return Field::sample(grid, [&](double x) { return amp * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * x / L)); });
    case InitialProfile::stationary_2pi: {
      Field f = Field::sample(grid, [&](double x) { return amp * (1.0 - std::cos(x)); });
      f.samples.back() = 0.0;  // cos(2pi) rounds to 1 only approximately once L is rounded
      return f;
    }
    case InitialProfile::custom_csv:
      return read_profile_csv(c.ic_file, grid);
  }
  throw ConfigError("initial_condition", "unsupported profile");
}

}  // namespace kdvbs
