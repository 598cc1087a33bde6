#pragma once

#include <stdexcept>
#include <string>

namespace nsf {

/// Argument outside the mathematical domain of a constitutive function.
class DomainError : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

/// Caller passed an invalid argument (non-positive step, too few levels, ...).
class ArgumentError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Configuration rejected by validation.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A state invariant was violated upstream (non-positive density, singular mass matrix).
class StateError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Explicit convection would lose positivity at the requested step size.
class StepSizeError : public std::runtime_error {
  public:
    StepSizeError(const std::string& what, double cfl, double suggested_h)
        : std::runtime_error(what), cfl_(cfl), suggested_h_(suggested_h) {}

    [[nodiscard]] double cfl() const noexcept { return cfl_; }
    [[nodiscard]] double suggested_h() const noexcept { return suggested_h_; }

  private:
    double cfl_;
    double suggested_h_;
};

/// Newton iteration for the temperature did not converge.
class SolverError : public std::runtime_error {
  public:
    SolverError(const std::string& what, double residual, int iterations)
        : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

    [[nodiscard]] double residual() const noexcept { return residual_; }
    [[nodiscard]] int iterations() const noexcept { return iterations_; }

  private:
    double residual_;
    int iterations_;
};

} // namespace nsf
