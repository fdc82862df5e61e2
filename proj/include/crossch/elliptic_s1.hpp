#pragma once

#include <vector>

#include "crossch/errors.hpp"
#include "crossch/model.hpp"

namespace crossch {

/// Per-cell coefficient matrices of the frozen-composition linear problem:
/// G couples species 1..n through their mutual interactions, H is the
/// diagonal coupling to species 0. Both are positive semidefinite with
/// spectra inside [0, n*Kmax] and [0, Kmax].
struct GHCoefficients {
    int n = 1;
    int cells = 0;
    std::vector<double> G;  // cells * n * n, row-major per cell
    std::vector<double> H;  // cells * n, diagonal per cell

    /// Dense n x n matrix G + H at one cell.
    std::vector<double> cell_matrix(int c) const;
};

/// The symmetric positive definite system A wbar = b for the stacked entropy
/// variables, where
///   (A w)_i = -div((G+H) grad w)_i + tau (w_i - lap w_i + lap lap w_i)
/// and b_i = -(u_tilde_i - u_prev_i)/tau. Species-major stacking:
/// x[(i-1)*cells + c].
struct S1System {
    Grid grid;
    int n = 1;
    double tau = 0.0;
    GHCoefficients coeffs;
    std::vector<double> rhs;

    int size() const { return n * grid.cell_count(); }
    void apply(const std::vector<double>& x, std::vector<double>& y) const;
    /// Diagonal of A, used by the Jacobi preconditioner.
    std::vector<double> diagonal() const;

    /// Bilinear form <A x, y>_l2 (same value as apply + inner product, used
    /// by symmetry/coercivity checks).
    double form(const std::vector<double>& x, const std::vector<double>& y) const;
    /// Squared stacked H2 norm sum_i ||x_i||_{H2}^2.
    double h2_norm_sq(const std::vector<double>& x) const;
};

struct S1Solution {
    std::vector<ScalarField> wbar;  // i = 1..n
    int iterations = 0;
    double rel_residual = 0.0;
    bool used_dense = false;
    double h2_norm = 0.0;  // stacked H2 norm of the solution
};

struct S1Options {
    double tol = 1e-10;      // relative residual
    int max_iterations = 0;  // 0: 60 * size, capped at 20000
    bool force_dense = false;
    bool allow_dense_fallback = true;  // used when PCG stalls and size <= dense_limit
    int dense_limit = 2048;
};

/// Freeze the compositions, build coefficients and right hand side.
/// Throws std::domain_error when an input leaves [0,1] beyond roundoff.
S1System assemble_s1(const CompositionField& u_tilde, const CompositionField& u_prev,
                     const ModelParams& p);

/// Solve the assembled system. Jacobi-PCG first, dense Cholesky as the
/// small-system fallback; throws SolveFailure when neither reaches tol.
S1Solution solve_s1(const S1System& sys, const S1Options& opts = {});

/// Stacked helpers shared with the stepper.
std::vector<double> stack_fields(const std::vector<ScalarField>& fields);
std::vector<ScalarField> unstack_fields(const std::vector<double>& x, const Grid& g, int n);

}  // namespace crossch
