#pragma once

#include <stdexcept>
#include <string>

namespace pnnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
 public:
  ShapeError(std::string op, std::string axis, std::size_t expected, std::size_t actual)
      : Error(op + ": axis '" + axis + "' expected " + std::to_string(expected) + ", got " +
              std::to_string(actual)),
        op_(std::move(op)),
        axis_(std::move(axis)) {}
  ShapeError(std::string op, std::string message) : Error(op + ": " + message), op_(std::move(op)) {}

  const std::string& op() const noexcept { return op_; }
  /// Name of the offending axis, empty when the mismatch is not axis specific.
  const std::string& axis() const noexcept { return axis_; }

 private:
  std::string op_;
  std::string axis_;
};

/// NaN or Inf where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed on-disk data (checkpoints, descriptor files, text lists).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// File-backed input with a line number attached.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& message)
      : FormatError(path + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnnet
