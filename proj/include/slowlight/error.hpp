#pragma once

#include <stdexcept>
#include <string>

namespace slowlight {

/// Input that violates a documented invariant or precondition.
/// The CLI maps this family to exit status 2.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class GeometryError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// A numerical routine could not produce a trustworthy answer.
/// The CLI maps this family to exit status 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class ConvergenceError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class DegenerateModeError : public NumericalError {
public:
  DegenerateModeError(int band_a, int band_b, double k)
      : NumericalError("degenerate eigenvalue pair: bands " + std::to_string(band_a) +
                       " and " + std::to_string(band_b) + " at k = " + std::to_string(k) +
                       " (disambiguate by symmetry)"),
        band_a(band_a), band_b(band_b) {}
  int band_a;
  int band_b;
};

/// Histogram carries no significant decaying component.
class NoDecayError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class UnidentifiableError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

} // namespace slowlight
