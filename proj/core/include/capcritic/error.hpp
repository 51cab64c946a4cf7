#pragma once

#include <stdexcept>
#include <string>

namespace capcritic {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent, or missing input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor or parameter shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace capcritic
