#pragma once

#include <stdexcept>
#include <string>

namespace xlemo {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input data or configuration. CLI exit code 1, HTTP 400.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A referenced entity does not exist. HTTP 404.
class NotFoundError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// The request conflicts with already-recorded state. HTTP 409.
class ConflictError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A file could not be opened, read or written. CLI exit code 2.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace xlemo
