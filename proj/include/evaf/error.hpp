#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evaf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Precondition or argument violation (bad window, non-positive dt, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

  /// Same error with `prefix` (typically a file path) prepended to the message.
  static ParseError in_context(const std::string& prefix, const ParseError& e) {
    return ParseError(prefix + ": " + e.what(), e.line_, Raw{});
  }

 private:
  struct Raw {};
  ParseError(const std::string& message, std::size_t line, Raw) : Error(message), line_(line) {}

  std::size_t line_;
};

/// Raised by searches that need at least one event.
class EmptyStreamError : public Error {
 public:
  EmptyStreamError() : Error("no events to focus on") {}
};

/// Filesystem failures; the message includes the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace evaf
