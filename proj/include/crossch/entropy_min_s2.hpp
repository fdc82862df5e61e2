#pragma once

#include <vector>

#include "crossch/model.hpp"

namespace crossch {

/// Convex minimization over the discrete Gibbs simplex: minimize
///   F(v) = int sum_{i=0}^n v_i ln v_i + eps/2 |grad v0|^2 - sum_{i>=1} v_i f_i
/// with v0 = 1 - sum_{i>=1} v_i eliminated, forcing f_i = wbar_i + beta(1 - 2 u0_prev).
struct S2Problem {
    Grid grid;
    int n = 1;
    double eps = 0.0;
    std::vector<ScalarField> f;  // i = 1..n

    static S2Problem make(const std::vector<ScalarField>& wbar, const ScalarField& u0_prev,
                          const ModelParams& p);
};

struct S2Solution {
    CompositionField u;
    double delta_observed = 0.0;  // min over cells and species of {u_i, u0}
    double residual = 0.0;        // sup norm of the first-order optimality defect
    int iterations = 0;
    std::vector<double> objective_history;  // F along accepted iterates, nonincreasing
};

/// Minimizer did not reach tolerance; carries the best iterate found.
struct MinimizeFailure : std::runtime_error {
    CompositionField best;
    double residual;
    int iterations;
    MinimizeFailure(const std::string& what, CompositionField b, double r, int it)
        : std::runtime_error(what), best(std::move(b)), residual(r), iterations(it) {}
};

/// Quadrature value of F. Entries must be nonnegative (0 ln 0 = 0);
/// throws std::domain_error otherwise.
double objective_F(const CompositionField& v, const S2Problem& prob);

/// First variation fields g_i = ln v_i - ln v0 + eps lap v0 - f_i, i = 1..n
/// (the exact l2 gradient of objective_F in the eliminated parametrization).
/// Requires strictly positive v.
std::vector<ScalarField> grad_F(const CompositionField& v, const S2Problem& prob);

/// sup over i and cells of |ln u_i - ln u0 + eps lap u0 - f_i|; zero exactly
/// at the discrete Euler-Lagrange solution. Cells all carry the same measure
/// on this mesh, so the weighted and unweighted sup norms coincide.
double optimality_residual(const CompositionField& u, const S2Problem& prob);

struct S2Options {
    double tol = 1e-9;     // sup-norm optimality tolerance
    int max_iterations = 100;
    double cg_tol = 1e-11;  // relative tolerance of the inner Newton solves
};

/// Damped Newton with the entropy barrier keeping iterates interior
/// (fraction-to-boundary step cap, Armijo backtracking, gradient-descent
/// rescue). Returns a strictly positive composition with exact unit sum.
S2Solution minimize_F(const S2Problem& prob, const CompositionField& v_init,
                      const S2Options& opts = {});

}  // namespace crossch
