#pragma once

#include <stdexcept>
#include <string>

namespace confspec {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const { return 3; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class ModelMismatch : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
  int exit_code() const override { return 2; }
};

class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace confspec
