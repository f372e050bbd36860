#pragma once

#include <stdexcept>
#include <string>

namespace dacmdp {

// Invalid hyperparameters or malformed invocation.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, datasets, models).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite intermediates or numerical divergence.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace dacmdp
