#pragma once

#include <stdexcept>
#include <string>

namespace adgan {

/// Base of every error raised by the library. The CLI maps each subclass
/// to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a documented precondition (batch mismatch, mixed schemas...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A value lies outside the domain an operation accepts (e.g. BCE target > 1).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Malformed binary input. Carries the byte offset where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A loss or gradient became NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace adgan
