/// @file errors.hpp
/// @brief Exception types shared by all chnst modules.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chnst {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A material function was evaluated outside its domain (e.g. theta <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

class UnsupportedDegree : public Error {
public:
    explicit UnsupportedDegree(int degree)
        : Error("no quadrature rule of degree " + std::to_string(degree)), degree_(degree) {}
    int degree() const noexcept { return degree_; }

private:
    int degree_;
};

/// Sparse LU could not factor the matrix. pivot() is the zero pivot column, or -1
/// when the failure was detected from the solve residual instead.
class FactorizationError : public Error {
public:
    FactorizationError(const std::string& what, long pivot) : Error(what), pivot_(pivot) {}
    long pivot() const noexcept { return pivot_; }

private:
    long pivot_;
};

class NonConvergence : public Error {
public:
    NonConvergence(const std::string& what, int iterations, double last_residual)
        : Error(what), iterations_(iterations), last_residual_(last_residual) {}
    int iterations() const noexcept { return iterations_; }
    double last_residual() const noexcept { return last_residual_; }

private:
    int iterations_;
    double last_residual_;
};

/// Thrown by residual evaluations for states outside the admissible set.
/// The Newton line search treats it as a rejected trial step.
class InadmissibleState : public Error {
public:
    using Error::Error;
};

/// Inverse temperature at or below the configured floor at a quadrature point.
class PositivityViolation : public InadmissibleState {
public:
    PositivityViolation(const std::string& what, double min_theta)
        : InadmissibleState(what), min_theta_(min_theta) {}
    double min_theta() const noexcept { return min_theta_; }

private:
    double min_theta_;
};

/// A discrete conservation or entropy identity failed beyond tolerance.
class StructureViolation : public Error {
public:
    StructureViolation(const std::string& what, long step) : Error(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// Failure of one time step, with the step index and last Newton residual attached.
class StepFailure : public Error {
public:
    enum class Kind { nonconvergence, positivity, factorization };

    StepFailure(const std::string& what, Kind kind, long step, double last_residual)
        : Error(what), kind_(kind), step_(step), last_residual_(last_residual) {}
    Kind kind() const noexcept { return kind_; }
    long step() const noexcept { return step_; }
    double last_residual() const noexcept { return last_residual_; }

private:
    Kind kind_;
    long step_;
    double last_residual_;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column)
        : Error(what + " (line " + std::to_string(line) + ", column " + std::to_string(column) + ")"),
          line_(line), column_(column) {}
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

}  // namespace chnst
