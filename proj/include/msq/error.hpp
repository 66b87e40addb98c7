#pragma once

#include <stdexcept>
#include <string>

namespace msq {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
  kInput = 2,    // malformed or missing input data, shape mismatch
  kConfig = 3,   // invalid scheme, unknown device, bad parameters
  kNumeric = 4,  // divergence, overflow
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::kInput, what) {}
};

class SchemeError : public Error {
 public:
  explicit SchemeError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfig, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::kNumeric, what) {}
};

class TrainingError : public NumericError {
 public:
  TrainingError(int epoch, const std::string& what)
      : NumericError("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace msq
