#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace crossch {

/// Outcome of a preconditioned conjugate gradient run.
struct PcgResult {
    bool converged = false;
    int iterations = 0;
    double rel_residual = 0.0;
};

/// Jacobi-preconditioned CG for SPD operators given as callbacks.
/// Solves apply(x) = b to relative residual ||b - A x|| / ||b|| <= tol.
/// b == 0 returns x == 0 immediately. `diag` holds the operator diagonal.
PcgResult pcg(const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply,
              const std::vector<double>& b, const std::vector<double>& diag,
              std::vector<double>& x, double tol, int max_iter);

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const std::vector<double>& a) {
    double m = 0.0;
    for (double x : a) m = std::max(m, std::fabs(x));
    return m;
}

}  // namespace crossch
