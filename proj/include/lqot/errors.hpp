#pragma once

#include <stdexcept>
#include <string>

namespace lqot {

// Failure categories surfaced by the library. Each maps to one structured
// rejection so callers (and the CLI exit-code table) can dispatch on it.
enum class ErrorCode {
    ShapeMismatch,
    NonSymmetric,
    NotPositiveDefinite,
    NotPositiveSemidefinite,
    Overflow,
    NotControllable,
    IllConditioned,
    ConsistencyFailure,
    PreconditionViolated,
    DegenerateFiber,
    IncompatibleMarginals,
    EmptyMeasure,
    NegativeWeight,
    ZeroDensity,
    NonFiniteCost,
    Infeasible,
    NumericalStall,
    NotDeterministic,
    UnreachableEndpoint,
    TooLarge,
    ConfigError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace lqot
