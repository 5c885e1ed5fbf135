#pragma once

#include <stdexcept>
#include <string>

namespace gsgs {

// Base of every exception thrown by the library. The CLI maps these to exit
// code 1; usage problems are handled before any Error can surface.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand sizes do not line up (composition, apply on a wrong-length vector).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid geometry or sampler configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Distribution parameters outside their support.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Dense fallback requested for a problem above the configured cap.
class SizeError : public Error {
 public:
  using Error::Error;
};

// A zero first direction was handed to the conjugate-set builder.
class DegenerateDirectionError : public Error {
 public:
  using Error::Error;
};

// A direction with non-positive curvature, or a failed Cholesky factorization.
class IndefinitePrecisionError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf detected in chain state.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace gsgs
