#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace harmocont {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller broke a precondition (dimension mismatch, index out of range, ...).
class ContractViolation : public Error {
public:
    using Error::Error;
};

/// Model parameters outside their admissible domain.
class ParameterDomainError : public Error {
public:
    using Error::Error;
};

/// A pivot fell below the singularity threshold during factorization.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(std::size_t pivot_index, double pivot_magnitude)
        : Error("singular matrix: pivot " + std::to_string(pivot_index) +
                " has magnitude " + std::to_string(pivot_magnitude)),
          pivot_index_(pivot_index),
          pivot_magnitude_(pivot_magnitude) {}

    std::size_t pivot_index() const noexcept { return pivot_index_; }
    double pivot_magnitude() const noexcept { return pivot_magnitude_; }

private:
    std::size_t pivot_index_;
    double pivot_magnitude_;
};

/// An iterative algorithm ran out of iterations or diverged.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

class ConvergenceFailure : public NumericalFailure {
public:
    ConvergenceFailure(const std::string& what, double final_residual, int iterations)
        : NumericalFailure(what + " (residual " + std::to_string(final_residual) + " after " +
                           std::to_string(iterations) + " iterations)"),
          final_residual_(final_residual),
          iterations_(iterations) {}

    double final_residual() const noexcept { return final_residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double final_residual_;
    int iterations_;
};

class InvalidStartError : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class LocalizationFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class StarterFailure : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

class DegenerateRatioError : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

/// Inconsistent problem setup, e.g. a free-parameter count that does not close the system.
class ConfigError : public Error {
public:
    using Error::Error;
};

class CountMismatchError : public ConfigError {
public:
    CountMismatchError(std::size_t required, std::size_t given, const std::string& context)
        : ConfigError(context + ": " + std::to_string(given) +
                      " free parameters given, but the constraint set requires " +
                      std::to_string(required)),
          required_(required),
          given_(given) {}

    std::size_t required() const noexcept { return required_; }
    std::size_t given() const noexcept { return given_; }

private:
    std::size_t required_;
    std::size_t given_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace harmocont
