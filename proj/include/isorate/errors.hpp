#pragma once

#include <stdexcept>
#include <string>

namespace isorate {

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// Rate equations have no solution for this sample size.
struct Infeasible : std::runtime_error {
    double minimal_n;
    Infeasible(const std::string& what, double n_min)
        : std::runtime_error(what), minimal_n(n_min) {}
};

// Config/spec validation failure; `field` is a JSON-pointer-like path.
struct ConfigError : std::runtime_error {
    std::string field;
    ConfigError(std::string f, const std::string& msg)
        : std::runtime_error(f.empty() ? msg : f + ": " + msg), field(std::move(f)) {}
};

// Numerical diagnostic failed (truncation breach, non-convergence).
struct NumericDiagnostic : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace isorate
