#pragma once

#include "crossch/entropy_min_s2.hpp"
#include "crossch/model.hpp"

namespace crossch {

/// Central finite differences of objective_F along random unit directions
/// tangent to the simplex, compared against the grad_F pairing. Returns the
/// worst guarded relative error |fd - analytic| / max(|analytic|,
/// 0.01 ||g|| ||phi||). Directions must stay feasible: h_fd below the
/// interior margin of v.
double fd_gradient_check(const S2Problem& prob, const CompositionField& v, double h_fd,
                         int n_dirs = 20, unsigned seed = 12345);

/// Slow reference minimizer: projected gradient descent on the per-cell
/// simplex with a fixed step, using its own stencils and its own Euclidean
/// projection. Deliberately shares no code with minimize_F.
CompositionField brute_force_minimize(const S2Problem& prob, const CompositionField& v_init,
                                      int iters, double step);

/// One step of the identical two-phase scheme (n = 1), coded independently:
/// own residual, own finite-difference Jacobian, own pivoted LU. Shares no
/// solver code with the stepper.
ScalarField scalar_ch_reference_step(const ScalarField& u1_prev, const ModelParams& p,
                                     double tol_res = 1e-11, int max_iter = 60);

/// Min over random simplex points u and boxes z of z^T M(u) z via the
/// explicit matrix product; must come back >= -1e-12.
double psd_random_test(const ModelParams& p, int samples, unsigned seed = 777);

}  // namespace crossch
