#pragma once

#include <stdexcept>
#include <string>

namespace shps {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something malformed: bad order, wrong shape, out-of-range parameter.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A vector field expected to be tangent to the surface has a normal component.
class TangencyError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Mesh-level problems: ambiguous or nonconforming connectivity, disconnected meshes.
class MeshError : public Error {
 public:
  using Error::Error;
};

/// Malformed mesh or cache file. The message carries line/element context.
class ParseError : public MeshError {
 public:
  using MeshError::MeshError;
};

/// Numerical breakdown: singular local or interface systems, degenerate
/// geometry, non-finite coefficients, diverging time integration.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class DegenerateElementError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularLeafError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SingularMergeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class CoefficientError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& what, long step) : NumericalError(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

/// A cached factorization was built for a different implicit operator.
class StaleFactorizationError : public Error {
 public:
  using Error::Error;
};

/// Factorization cache file that is unreadable, corrupt, or built for a
/// different mesh, operator, or scalar type.
class CacheError : public Error {
 public:
  using Error::Error;
};

}  // namespace shps
