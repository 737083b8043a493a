#pragma once

#include <stdexcept>
#include <string>

namespace spikeforge {

// Base for all library errors. The CLI maps the subclasses onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, configs or invocations.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Malformed, missing or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Optimizer aborts, non-finite values, degenerate fits.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace spikeforge
