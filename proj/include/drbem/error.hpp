#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace drbem {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. p outside (0,1)).
class DomainError : public Error {
public:
  using Error::Error;
};

/// Mismatched vector/matrix/horizon sizes.
class ShapeError : public Error {
public:
  using Error::Error;
};

class DimensionError : public ShapeError {
public:
  using ShapeError::ShapeError;
};

/// Invalid model or policy specification.
class SpecError : public Error {
public:
  using Error::Error;
};

/// A sample variance of zero where a positive one is required.
class DegenerateVariance : public Error {
public:
  using Error::Error;
};

/// A decision rule would depend on a disturbance that is not yet observed.
class CausalityError : public Error {
public:
  using Error::Error;
};

/// Tuning target that cannot be reached inside the admissible range.
class NotAttainable : public Error {
public:
  using Error::Error;
};

/// Malformed text input; carries the 1-based line and column of the offending token.
class ParseError : public Error {
public:
  ParseError(const std::string& what, int line, int column, std::string source = {})
      : Error(format(what, line, column, source)), line_(line), column_(column),
        source_(std::move(source)) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::string& source() const noexcept { return source_; }

private:
  static std::string format(const std::string& what, int line, int column,
                            const std::string& source) {
    std::string out = source.empty() ? std::string("<input>") : source;
    out += ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what;
    return out;
  }

  int line_;
  int column_;
  std::string source_;
};

} // namespace drbem
