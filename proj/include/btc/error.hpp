#pragma once

#include <stdexcept>
#include <string>

namespace btc {

// Failure classes map one-to-one onto CLI exit diagnostics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Parameters or inputs that violate an operation's preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Factorization failure, solver non-convergence, or a broken numerical invariant.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace btc
