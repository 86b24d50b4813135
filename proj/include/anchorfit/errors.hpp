#pragma once

#include <stdexcept>
#include <string>

namespace anchorfit {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed data handed to an operation (non-finite values, bad sizes, ...).
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

// A configuration value outside its documented range.
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

// An API precondition was violated by the caller.
class ContractViolationError : public Error {
 public:
  using Error::Error;
};

// Inputs are structurally valid but cannot constrain the fit.
class UnderconstrainedInputError : public Error {
 public:
  using Error::Error;
};

// Exact projection requested for a point at or behind the near plane.
class BehindCameraError : public InvalidInputError {
 public:
  using InvalidInputError::InvalidInputError;
};

// Structured-text document violates its schema. `where` carries the
// document path plus the field path inside it.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& where, const std::string& what)
      : Error(where + ": " + what), where_(where) {}
  const std::string& where() const { return where_; }

 private:
  std::string where_;
};

class ScenarioError : public Error {
 public:
  using Error::Error;
};

}  // namespace anchorfit
