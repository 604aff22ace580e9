#pragma once

#include <stdexcept>
#include <string>

namespace rlbd {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t actual)
      : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Invalid user-supplied configuration (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable, malformed or unsupported artifact such as a checkpoint (exit code 3).
class ArtifactError : public Error {
 public:
  using Error::Error;
};

// A verified property failed to hold (exit code 4).
class VerificationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace rlbd
