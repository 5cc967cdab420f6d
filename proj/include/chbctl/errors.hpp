#pragma once

#include <stdexcept>
#include <string>

namespace chb {

/// Invalid user-facing configuration (bad parameter values, unknown keys).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Caller broke a precondition (mismatched sizes, grids, time steps).
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Picard iteration for the steady velocity failed to converge.
class SmallnessViolated : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite values appeared during time stepping.
class InstabilityError : public std::runtime_error {
public:
    InstabilityError(const std::string& what, int step)
        : std::runtime_error(what), step_(step) {}
    int step() const noexcept { return step_; }

private:
    int step_;
};

/// Generic numerical failure (singular factorization, CG stagnation, ...).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace chb
