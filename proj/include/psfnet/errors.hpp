#pragma once

#include <stdexcept>
#include <string>

namespace psfnet {

// Exit codes used by the command-line tool for each error family.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 1,
  kIo = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfig; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class StateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

class IoError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kIo; }
};

}  // namespace psfnet
