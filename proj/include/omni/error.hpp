#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace omni {

/// Base of every error thrown by the library. `exit_code()` is what the CLI
/// returns when the error escapes a command.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 1; }
};

/// Malformed WKT/GeoJSON. `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }
  int exit_code() const override { return 2; }

 private:
  std::size_t offset_;
};

class UnsupportedGeometry : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class InfeasibleBudget : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 3; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 4; }
};

class MissingEmbedding : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class SamplingError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class HttpError : public Error {
 public:
  HttpError(const std::string& what, int status) : Error(what), status_(status) {}
  /// HTTP status, or 0 when no response was received.
  int status() const { return status_; }
  int exit_code() const override { return 4; }

 private:
  int status_;
};

}  // namespace omni
