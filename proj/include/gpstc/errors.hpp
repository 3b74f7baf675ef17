#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace gpstc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated (e.g. m outside 1..M).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// An object was used before it was ready (e.g. predicting with an unfitted model).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown: factorization failure, non-finite values, large PSD violations.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be read or written, or its contents are malformed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Configuration failed validation. Carries one message per violated field.
class ValidationError : public Error {
 public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}

  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& problems) {
    std::string out = "invalid configuration:";
    for (const auto& p : problems) out += "\n  - " + p;
    return out;
  }

  std::vector<std::string> problems_;
};

}  // namespace gpstc
