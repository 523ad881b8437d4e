#pragma once

#include <stdexcept>
#include <string>

namespace rhem {

// Invalid run configuration, unreadable inputs, or a statistic/data mismatch.
// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure during model fitting (separation, singular information,
// non-finite statistics). The CLI maps this to exit code 3.
struct EstimationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace rhem
