#pragma once

#include <stdexcept>
#include <string>

namespace revexp {

// Exit-code mapping used by the CLI: validation 1, io 2, network 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

class TransportError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
};

// Raised when more than one candidate comment matches a dataset comment.
class AmbiguousMatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

}  // namespace revexp
