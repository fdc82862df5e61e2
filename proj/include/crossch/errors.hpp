#pragma once

#include <stdexcept>
#include <string>

namespace crossch {

/// Linear solve did not reach the requested residual.
struct SolveFailure : std::runtime_error {
    double rel_residual;
    int iterations;
    SolveFailure(const std::string& what, double res, int iters)
        : std::runtime_error(what), rel_residual(res), iterations(iters) {}
};

}  // namespace crossch
