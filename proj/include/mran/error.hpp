#pragma once

#include <stdexcept>
#include <string>

namespace mran {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not line up for the requested operation.
struct DimensionError : Error {
  using Error::Error;
};

// A configuration value is out of its allowed range.
struct ConfigError : Error {
  using Error::Error;
};

// An API was called in a way its contract forbids.
struct UsageError : Error {
  using Error::Error;
};

// Input text could not be parsed.
struct ParseError : Error {
  using Error::Error;
};

// Data failed a semantic validity check (e.g. a non-normalized distribution).
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace mran
