#pragma once

#include <stdexcept>
#include <string>

namespace qgamma {

/// Input rejected before any computation (bad parameter, bad config key).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// The request is mathematically outside the operation's domain
/// (e.g. a divergent integral).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Grids or field layouts do not match.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure could not reach its target accuracy.
/// Carries the best estimate and an error bound when known.
class AccuracyError : public std::runtime_error {
public:
    AccuracyError(const std::string& what, double estimate, double error_bound)
        : std::runtime_error(what), estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

/// Degree could not be certified (boundary zero or max depth reached).
class DegreeError : public std::runtime_error {
public:
    DegreeError(const std::string& what, int best_estimate, int depth)
        : std::runtime_error(what), best_estimate_(best_estimate), depth_(depth) {}

    int best_estimate() const noexcept { return best_estimate_; }
    int depth() const noexcept { return depth_; }

private:
    int best_estimate_;
    int depth_;
};

/// Iterative solver that did not converge; message holds the trace.
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Converged field that is not strictly positive.
class PositivityError : public std::runtime_error {
public:
    PositivityError(const std::string& what, double min_value)
        : std::runtime_error(what), min_value_(min_value) {}
    double min_value() const noexcept { return min_value_; }

private:
    double min_value_;
};

}  // namespace qgamma
