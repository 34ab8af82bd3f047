#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace zmc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model or intensity specification violates its invariants.
class InvalidSpec : public Error {
public:
    using Error::Error;
};

/// The zero-modification parameter falls outside the admissible interval
/// [-P0/(1-P0), 1] for some intensity value.
class InfeasibleOmega : public Error {
public:
    InfeasibleOmega(const std::string& what, std::size_t index, double lambda, double bound)
        : Error(what), index_(index), lambda_(lambda), bound_(bound) {}

    std::size_t index() const noexcept { return index_; }
    double lambda() const noexcept { return lambda_; }
    double bound() const noexcept { return bound_; }

private:
    std::size_t index_;
    double lambda_;
    double bound_;
};

/// No usable starting value could be produced for the estimating equations.
class InfeasibleInit : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside an estimator (degenerate weights, no root, ...).
class EstimationError : public Error {
public:
    using Error::Error;
};

/// Malformed input data or configuration.
class ParseError : public Error {
public:
    using Error::Error;
};

}  // namespace zmc
