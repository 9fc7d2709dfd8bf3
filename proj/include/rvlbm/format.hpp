#pragma once

#include <cstdio>
#include <string>

namespace rvlbm {

/// 17 significant digits: round-trips every double, stable across runs.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_short(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace rvlbm
