#pragma once

#include <stdexcept>
#include <string>

namespace sgap {

// Base of every error the library throws. The CLI maps the subclasses onto
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Corrupt or incompatible checkpoint container.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A committed value would have become NaN or Inf.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace sgap
