#pragma once

#include <stdexcept>
#include <string>

namespace pmvol {

/// Base class for every error raised by the toolkit. The subclass picks the
/// process exit code used by the command-line driver.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  [[nodiscard]] virtual int exit_code() const noexcept { return 2; }
};

/// Bad input: malformed config, violated precondition, unknown column.
class ValidationError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 1; }
};

/// Numerical failure: rank deficiency, non-convergence, degenerate sample.
class ComputationError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 2; }
};

/// Filesystem or network failure.
class IoError : public Error {
 public:
  using Error::Error;
  [[nodiscard]] int exit_code() const noexcept override { return 3; }
};

/// A file was readable but its header does not match the expected schema.
class SchemaError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace pmvol
