#pragma once

#include <stdexcept>
#include <string>

namespace cadsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: unreadable file, bad JSON, wrong field type, unknown field.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Input parses but breaks a domain invariant (duplicate id, bad probabilities...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure unrelated to content.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cadsim
