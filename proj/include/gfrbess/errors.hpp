#pragma once

#include <stdexcept>
#include <string>

namespace gfrbess {

/// Bad input: wrong length, non-finite value, out-of-range parameter.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative or factorisation routine did not produce a usable result.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The electrical operating point cannot be realised (e.g. non-positive
/// terminal voltage, empty capability region).
class InfeasibleOperatingPoint : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal contract broken; indicates a bug rather than bad input.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidArgument(message);
}

}  // namespace detail
}  // namespace gfrbess
