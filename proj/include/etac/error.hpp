#pragma once

#include <stdexcept>
#include <string>

namespace etac {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear-algebra problem that has no admissible solution (e.g. a
/// Lyapunov equation for a non-Hurwitz matrix).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class SynthesisError : public Error {
 public:
  using Error::Error;
};

/// A graph or fault assumption broke at runtime (e.g. a perturbed weight
/// dropped to zero).
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

class OrderingError : public Error {
 public:
  using Error::Error;
};

class MissingValueError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ComparisonError : public Error {
 public:
  using Error::Error;
};

}  // namespace etac
