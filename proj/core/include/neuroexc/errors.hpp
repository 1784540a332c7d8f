#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neuroexc {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input: config files, dimensions, preconditions.
/// The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Anything that fails while computing: singular systems, divergence,
/// non-convergence. The CLI maps this to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class SingularMatrixError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, double time, std::size_t index)
        : NumericalError(what), time_(time), index_(index) {}
    [[nodiscard]] double time() const noexcept { return time_; }
    [[nodiscard]] std::size_t index() const noexcept { return index_; }

private:
    double time_;
    std::size_t index_;
};

}  // namespace neuroexc
