#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace getnet {

/// Base of every error raised by the library. The CLI maps each subclass to
/// its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

/// Missing or garbled header field, bad magic, unparsable text.
class FormatError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

class SizeError : public Error {
 public:
  SizeError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + " (expected " + std::to_string(expected) + " bytes, got " +
              std::to_string(actual) + ")"),
        expected_(expected),
        actual_(actual) {}
  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }
  int exit_code() const noexcept override { return 4; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Non-finite or out-of-domain values in otherwise well-formed data.
class DataError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 5; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 6; }
};

class DegeneracyError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 7; }
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best)
      : Error(what), best_(std::move(best)) {}
  /// Best iterate reached before giving up.
  const std::vector<double>& best_iterate() const noexcept { return best_; }
  int exit_code() const noexcept override { return 8; }

 private:
  std::vector<double> best_;
};

class CapacityError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 9; }
};

class NumericError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 10; }
};

class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : NumericError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 11; }
};

/// Raised by the pipeline; wraps the failing stage's error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error("stage '" + stage + "' failed: " + cause.what()),
        stage_(std::move(stage)),
        code_(cause.exit_code()) {}
  const std::string& stage() const noexcept { return stage_; }
  int exit_code() const noexcept override { return code_; }

 private:
  std::string stage_;
  int code_;
};

}  // namespace getnet
