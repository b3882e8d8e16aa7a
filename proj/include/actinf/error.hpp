#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace actinf {

/// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 2,
  kData = 3,
  kNumerical = 4,
};

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode exit_code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Invalid argument or configuration value.
class ArgumentError : public Error {
 public:
  explicit ArgumentError(const std::string& what)
      : Error(ExitCode::kConfig, what) {}
};

/// Problems with input data: malformed rows, missing labels, bad shapes.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::kData, what) {}
};

/// A row of a CSV file that could not be parsed. `line` is 1-based and
/// counts the header.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Column layout does not match the data (unknown column, dimension mismatch).
class SchemaError : public DataError {
 public:
  explicit SchemaError(const std::string& what) : DataError(what) {}
};

/// Numerical failure: singular systems, degenerate inputs, non-convergence.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

class SingularError : public NumericalError {
 public:
  explicit SingularError(const std::string& what) : NumericalError(what) {}
};

class DegenerateError : public NumericalError {
 public:
  explicit DegenerateError(const std::string& what) : NumericalError(what) {}
};

/// Operation called on an object in the wrong state (e.g. unfitted model).
class StateError : public Error {
 public:
  explicit StateError(const std::string& what)
      : Error(ExitCode::kConfig, what) {}
};

}  // namespace actinf
