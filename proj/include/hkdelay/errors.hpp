#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace hkd {

/// Base for every error raised by the library. The CLI maps subclasses onto
/// exit statuses (validation -> 2, numeric -> 3).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of a function (e.g. psi(r<0)).
class DomainError : public Error {
public:
    using Error::Error;
};

/// One or more configuration invariants are violated. Every violation is
/// kept so callers can report all of them at once.
class ValidationError : public Error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : Error(join(violations)), violations_(std::move(violations)) {}

    explicit ValidationError(const std::string& violation)
        : ValidationError(std::vector<std::string>{violation}) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out += "; ";
            out += v[i];
        }
        return out;
    }

    std::vector<std::string> violations_;
};

/// Query outside the interval a history buffer covers.
class OutOfRangeError : public Error {
public:
    using Error::Error;
};

/// Time stamps appended out of order.
class OrderingError : public Error {
public:
    using Error::Error;
};

/// Non-finite values, non-converging quadrature and similar failures.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double residual = 0.0)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// The uniform radius bound was violated beyond tolerance; usually means the
/// step size is too large for the scenario.
class IntegratorAccuracyError : public NumericError {
public:
    using NumericError::NumericError;
};

/// Instance shape a routine does not handle (unequal atom counts, d != 1, ...).
class UnsupportedInstance : public Error {
public:
    using Error::Error;
};

/// Instance too large for an exact routine.
class SizeError : public Error {
public:
    using Error::Error;
};

}  // namespace hkd
