#pragma once

#include <stdexcept>
#include <string>

namespace glgmix {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Arguments outside the support of a distribution or parameter space.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A requested exponential moment of the random effect is infinite.
class MomentDoesNotExist : public Error {
 public:
  using Error::Error;
};

// An inner iterative search gave up; `last_iterate` is where it stopped.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double last_iterate)
      : Error(what), last_iterate_(last_iterate) {}
  double last_iterate() const noexcept { return last_iterate_; }

 private:
  double last_iterate_;
};

// Malformed input data. Row is 1-based counting the header as row 1;
// row 0 means the error is not tied to a specific row.
class ParseError : public Error {
 public:
  enum class Kind { MissingColumn, BadResponse, BadNumber, RaggedRow, EmptyFile, BadSpec, Io };

  ParseError(Kind kind, std::size_t row, std::string column, const std::string& message)
      : Error(message), kind_(kind), row_(row), column_(std::move(column)) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  Kind kind_;
  std::size_t row_;
  std::string column_;
};

// Model cannot be fitted as posed (e.g. collinear design).
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace glgmix
