#pragma once

#include <stdexcept>
#include <string>

namespace indcal {

// Root of every error the library throws. The CLI maps ConfigError and
// ParseError to exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation
// (probability not in (0,1), empty sample, non-finite input, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration: bad hyper-parameters, unknown keys, missing columns.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based row and column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, long row = -1, long column = -1)
      : Error(what), row_(row), column_(column) {}
  long row() const noexcept { return row_; }
  long column() const noexcept { return column_; }

 private:
  long row_;
  long column_;
};

// Tensor / feature dimension mismatch.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller broke an API contract (e.g. a forward trace used with other params).
class ContractError : public Error {
 public:
  using Error::Error;
};

// A loss specification that does not satisfy its declared properties.
class SpecError : public Error {
 public:
  using Error::Error;
};

// Optimisation produced a non-finite loss or gradient.
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace indcal
