#pragma once

#include <stdexcept>
#include <string>

namespace growflow {

// Every failure raised by the library derives from Error; the CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Violated precondition or API misuse.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration document, flag, or parameter value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or missing input data (dataset files, checkpoints, images).
class DataError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, solver failures, degenerate geometry.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace growflow
