#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace akhcfs {

// Bad or missing input data (CSV rows, profiles, unknown event ids).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or violated numeric preconditions.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration (unknown keys, out-of-range values).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] void throw_non_finite(const char* what);

inline void require_finite(double value, const char* what) {
  if (!std::isfinite(value)) throw_non_finite(what);
}

}  // namespace akhcfs
