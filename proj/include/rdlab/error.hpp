#pragma once

#include <stdexcept>
#include <string>

namespace rdlab {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Raised by step() when every event rate is zero.
class AbsorbedState : public Error {
 public:
  using Error::Error;
};

/// Coupled configuration lost pathwise domination. Always an implementation bug.
class DominationViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class ZeroReaction : public Error {
 public:
  using Error::Error;
};

class OrderViolation : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace rdlab
