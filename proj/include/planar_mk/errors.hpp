#pragma once

#include <stdexcept>
#include <string>

namespace planar_mk {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// An input violates a type invariant (negative mass, unsorted grid, ...).
class InvalidInput : public Error
{
public:
  using Error::Error;
};

/// Probability level outside (0,1] passed to a quantile.
class DomainError : public Error
{
public:
  using Error::Error;
};

/// Marginals of a coupling do not match the densities it is used with.
class MarginalMismatch : public Error
{
public:
  MarginalMismatch(const std::string& what, double deviation)
    : Error(what + " (L1 deviation " + std::to_string(deviation) + ")"), deviation_(deviation)
  {
  }

  double deviation() const noexcept { return deviation_; }

private:
  double deviation_;
};

/// Transport instance whose supplies and demands do not balance.
class UnbalancedInstance : public Error
{
public:
  using Error::Error;
};

/// Oracle instance too large for the exact LP.
class SizeLimitExceeded : public Error
{
public:
  using Error::Error;
};

/// Iterative method stopped before reaching its tolerance.
class NonConvergence : public Error
{
public:
  NonConvergence(const std::string& what, double residual)
    : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual)
  {
  }

  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// The line search could not decrease L at the first iterate.
class NoDescent : public Error
{
public:
  using Error::Error;
};

/// Malformed density, config or instance file.
class ParseError : public Error
{
public:
  using Error::Error;
};

} // namespace planar_mk
