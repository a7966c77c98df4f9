#pragma once

#include <stdexcept>
#include <string>

namespace revnet {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or contract violations (wrong rank, mismatched dims, bad handles).
struct ShapeError : Error {
  using Error::Error;
};

// Malformed files, out-of-range ids, vocabulary mismatches. CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Non-finite values or divergence. CLI exit code 3.
struct NumericError : Error {
  using Error::Error;
};

// Bad or unknown configuration keys/values.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace revnet
