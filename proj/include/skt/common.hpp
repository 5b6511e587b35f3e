#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace skt {

// Error categories map to CLI exit codes (config=2, data=3, numeric=4).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : NumericError {
  using NumericError::NumericError;
};

inline void check_finite(const double* p, std::size_t n, const char* context) {
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i])) {
      throw NumericError(std::string(context) + ": non-finite value at index " +
                         std::to_string(i));
    }
  }
}

}  // namespace skt
