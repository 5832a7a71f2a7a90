#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace affext {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression, field set or scenario text.
class ParseError : public Error {
public:
  enum class Kind { Syntax, UnknownSymbol, IndexOutOfRange, Structure };

  ParseError(Kind kind, std::size_t position, const std::string& message)
      : Error(message + " (at offset " + std::to_string(position) + ")"),
        kind_(kind), position_(position) {}

  Kind kind() const noexcept { return kind_; }
  std::size_t position() const noexcept { return position_; }

private:
  Kind kind_;
  std::size_t position_;
};

/// Violated precondition: dimension mismatch, bad index, empty grid.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Evaluation produced NaN or infinity.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

/// Raised when differentiating through a non-smooth node (abs).
class NonSmoothError : public Error {
public:
  using Error::Error;
};

/// Symbolic expression exceeded the configured node cap.
class ExpressionGrowthError : public Error {
public:
  using Error::Error;
};

/// State norm crossed the blow-up guard during integration.
class DivergenceError : public Error {
public:
  using Error::Error;
};

/// Newton inversion of the fiber derivative d_uL(x, .) failed.
class DiffeomorphismError : public Error {
public:
  using Error::Error;
};

/// An iterative solver ran out of iterations or stalled.
class ConvergenceError : public Error {
public:
  ConvergenceError(const std::string& message, double best_residual)
      : Error(message), best_residual_(best_residual) {}
  double best_residual() const noexcept { return best_residual_; }

private:
  double best_residual_;
};

/// The dictionary could not produce n directions with independent images.
class BasisDeficiencyError : public Error {
public:
  using Error::Error;
};

/// Chart construction failed or an evaluation broke the chart's guarantees.
class ChartError : public Error {
public:
  using Error::Error;
};

}  // namespace affext
