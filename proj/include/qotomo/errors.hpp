#pragma once

#include <stdexcept>
#include <string>

namespace qotomo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operands with incompatible or invalid shapes.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// The entangled input matrix cannot be inverted reliably.
class NonInvertibleEntangler : public Error {
public:
  explicit NonInvertibleEntangler(const std::string& what)
      : Error("non-invertible entangler: " + what) {}
};

/// A Choi matrix with eigenvalues below the clipping tolerance.
class NotCompletelyPositive : public Error {
public:
  explicit NotCompletelyPositive(const std::string& what)
      : Error("not completely positive: " + what) {}
};

/// An operation that violates its defining bound (contraction, Kraus sum).
class InvalidOperation : public Error {
public:
  using Error::Error;
};

/// Numerical failure inside one of the estimation stages. The message
/// always starts with the name of the failing stage.
class NumericalError : public Error {
public:
  NumericalError(const std::string& stage, const std::string& what)
      : Error(stage + ": " + what) {}
};

/// Invalid experiment configuration.
class ConfigError : public Error {
public:
  explicit ConfigError(const std::string& what) : Error("config: " + what) {}
};

} // namespace qotomo
