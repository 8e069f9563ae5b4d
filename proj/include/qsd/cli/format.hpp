#pragma once

// Locale-independent number formatting for CSV and metadata output.

#include <charconv>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>

#include "qsd/errors.hpp"

namespace qsd::cli {

/// Scientific notation with `digits` significant digits, e.g. 1.2500000000000000e-01.
inline std::string format_scientific(double v, int digits = 17) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific, digits - 1);
  return std::string(buf, res.ptr);
}

/// Shortest representation that parses back to the same double.
inline std::string format_shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Writes `t,sigma2,alpha` rows; alpha is left blank where it is undefined.
inline void write_trajectory_csv(std::ostream& os, std::span<const double> t,
                                 std::span<const double> sigma2,
                                 std::span<const std::optional<double>> alpha, int digits) {
  os << "t,sigma2,alpha\n";
  for (std::size_t i = 0; i < t.size(); ++i) {
    os << format_scientific(t[i], digits) << ',' << format_scientific(sigma2[i], digits) << ',';
    if (alpha[i]) os << format_scientific(*alpha[i], digits);
    os << '\n';
  }
}

}  // namespace qsd::cli
