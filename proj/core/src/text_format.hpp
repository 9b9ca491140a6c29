#pragma once

#include <charconv>
#include <cmath>
#include <string>

#include "lesionuq/error.hpp"

namespace lesionuq::detail {

/// Shortest-form-independent text for a double: 17 significant digits,
/// which round-trips every finite value exactly.
inline std::string format_real(double value) {
  if (!std::isfinite(value)) throw DataError("cannot serialise a non-finite real");
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc{}) throw DataError("real formatting failed");
  return std::string(buf, end);
}

inline void append_real(std::string& out, double value) { out += format_real(value); }

}  // namespace lesionuq::detail
