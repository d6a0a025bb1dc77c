#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dcl {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (non-finite angle, wrong vector length, ...).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Configuration that cannot produce a valid code table, loss or experiment.
class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Zero-area or non-positive-sided geometry.
class DegenerateInput : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss, exp overflow or similar numeric breakdown.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// AP requested for a class without any countable ground truth.
class UndefinedAP : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line), message_(what) {}

  std::size_t line() const noexcept { return line_; }
  /// Message without the line prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::size_t line_;
  std::string message_;
};

}  // namespace dcl
