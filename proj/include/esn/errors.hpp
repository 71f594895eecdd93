#pragma once

#include <stdexcept>
#include <string>

namespace esn {

// Bad arguments: wrong shapes, out-of-range parameters, non-finite inputs.
class ParameterError : public std::invalid_argument {
public:
    explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Rank-deficient systems solved without regularisation.
class SingularityError : public std::runtime_error {
public:
    explicit SingularityError(const std::string& what) : std::runtime_error(what) {}
};

// Quadrature non-convergence, integrator step underflow, divergence guards.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace esn
