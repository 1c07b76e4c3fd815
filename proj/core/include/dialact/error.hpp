#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dialact {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input text. `line()` is 1-based, 0 when the
/// problem is not tied to a line (e.g. a missing file).
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, const std::string& what);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string source_;
  std::size_t line_;
};

/// Structurally valid input that violates a semantic rule (unknown goal,
/// unknown act, too-small corpus, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Deleted-interpolation weights could not be estimated.
class EstimationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialact
