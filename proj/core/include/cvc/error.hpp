#pragma once

#include <stdexcept>
#include <string>

namespace cvc {

// Failure categories map one-to-one onto the CLI exit codes.
enum class ErrorKind {
  input = 2,      // malformed or inconsistent input
  numerical = 3,  // singular / ill-conditioned / degenerate estimates
  io = 4,         // unreadable or unwritable files
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

}  // namespace cvc
