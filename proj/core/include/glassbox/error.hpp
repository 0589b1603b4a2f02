#pragma once

#include <stdexcept>
#include <string>

namespace glassbox {

// Base class for every error raised by the library. The subclasses mirror the
// failure categories callers are expected to distinguish (the CLI maps
// ValidationError/ParameterError/DimensionError to exit code 2).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed user input: config files, CSV files, probe suites.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace glassbox
