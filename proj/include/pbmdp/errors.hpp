#pragma once

#include <stdexcept>
#include <string>

namespace pbmdp {

/// Inputs whose shapes or invariants do not fit together (dimension mismatch,
/// non-stochastic rows, broken layering).
class StructuralError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A parameter outside its admissible range (epsilon, gamma, T below a
/// schedule threshold, odd K for the block instances, ...).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed or inconsistent experiment configuration.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An estimator was evaluated outside its domain, e.g. a zero arm marginal
/// or an unreachable exploration target.
class EstimatorDomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Iterative solver did not converge or a guaranteed bound was violated.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Empty box-simplex feasible set.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Brute-force enumeration would exceed its atom or policy budget.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

} // namespace pbmdp
