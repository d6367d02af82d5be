#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nsdx {

// Root of every error the library throws. The CLI maps ValidationFailure
// subclasses to exit code 1 and everything else to exit code 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input supplied by the caller: files, flags, payloads, configs.
class ValidationFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationFailure {
 public:
  ParseError(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValueError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

// Morphology probabilities that cannot be repaired by renormalization.
class NormalizationError : public ValueError {
 public:
  using ValueError::ValueError;
};

class ConfigError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class DimensionError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class EmptyInputError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what);
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class CorruptModelError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Review workflow errors; map onto HTTP 404 / 409 / 400.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class PayloadError : public ValidationFailure {
 public:
  using ValidationFailure::ValidationFailure;
};

class StartupError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure inside one pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what);
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace nsdx
