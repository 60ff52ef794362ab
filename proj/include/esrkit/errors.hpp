#pragma once

#include <stdexcept>
#include <string>

namespace esr {

// Bad user-supplied data: malformed files, non-monotone axes, unknown keys.
// The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
    InputError(const std::string& msg, long line)
        : std::runtime_error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
    long line() const { return line_; }

private:
    long line_ = -1;
};

// Numerical failure inside an algorithm (quadrature not converging, singular
// linear systems outside the fit path).
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// A fit that cannot be set up or produced no usable optimum.  Non-convergence
// of an otherwise well-posed fit is reported through FitResult::converged,
// not by throwing.
class FitError : public std::runtime_error {
public:
    explicit FitError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace esr
