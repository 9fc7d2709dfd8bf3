#pragma once

#include <stdexcept>
#include <string>

namespace rvlbm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NonLatticeVelocity : public Error {
 public:
  using Error::Error;
};

class DivisionByZero : public Error {
 public:
  using Error::Error;
};

class OrderUnavailable : public Error {
 public:
  using Error::Error;
};

class NonConstantShift : public Error {
 public:
  using Error::Error;
};

class BranchAmbiguity : public Error {
 public:
  using Error::Error;
};

class PoorFit : public Error {
 public:
  using Error::Error;
};

class MismatchBeyondTolerance : public Error {
 public:
  using Error::Error;
};

// Configuration errors. `path` is a JSON pointer into the offending document.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, const std::string& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace rvlbm
