#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace selfsense {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. negative force).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Pressure-evaluated coefficients or states left the operating envelope.
class EnvelopeError : public Error {
 public:
  using Error::Error;
};

/// A parameter that must be invertible is (numerically) zero.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Least-squares design matrix without full column rank.
class RankDeficientError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration, filter settings, bounds, or scenario block.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Isotonic load cannot be balanced inside the admissible length range.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// Input data problem: unparsable text, bad timestamps, too few samples.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& reason, std::size_t line, const std::string& source = {})
      : DataError((source.empty() ? "line " : source + ":") + std::to_string(line) + ": " + reason),
        line_(line),
        reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

class MissingColumnError : public DataError {
 public:
  explicit MissingColumnError(const std::string& column)
      : DataError("missing required column '" + column + "'"), column_(column) {}

  const std::string& column() const noexcept { return column_; }

 private:
  std::string column_;
};

}  // namespace selfsense
