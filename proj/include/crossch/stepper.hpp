#pragma once

#include <vector>

#include "crossch/elliptic_s1.hpp"
#include "crossch/entropy_min_s2.hpp"
#include "crossch/model.hpp"

namespace crossch {

enum class StepMode {
    Auto,        // damped Picard first, monolithic Newton when it stops contracting
    PicardOnly,  // the bare composed-map iteration; non-convergence is a failure
    NewtonOnly,  // skip Picard, solve the coupled step equations directly
};

struct StepConfig {
    double tol_fp = 1e-10;  // fixed-point gap tolerance (Picard path)
    int max_picard = 8;
    double theta = 1.0;        // Picard damping, halved whenever the gap grows
    double theta_floor = 0.25;
    double picard_bail_ratio = 0.75;  // Auto mode: demand gap_k <= ratio * gap_{k-1}
    double s1_tol = 1e-10;
    double s2_tol = 1e-9;
    double newton_tol = 0.0;  // 0: max(1e-10, 10 eps (1 + 2/tau))
    int max_newton = 50;
    int dense_limit = 2048;  // largest stacked size solved by direct factorization
    StepMode mode = StepMode::Auto;
    double init_floor = 1e-10;  // floor applied to the first iterate only
};

struct MassLedger {
    std::vector<double> mass;             // int u_i after the step, i = 0..n
    std::vector<double> predicted_drift;  // -tau^2 int wbar_i, i = 1..n
    std::vector<double> identity_error;   // |int(u_i^+ - u_i) + tau^2 int wbar_i|
};

struct StepReport {
    int picard_iters = 0;
    int newton_iters = 0;
    bool newton_fallback = false;
    double fp_gap = 0.0;        // measured one-application gap ||S(u) - u||_inf
    double fp_gap_floor = 0.0;  // eps/tau^2, the roundoff floor of that metric
    double residual_monolithic = 0.0;  // ||R(u_next)||_inf of the coupled step equations
    double theta_final = 1.0;
    EnergyReport energy_before;  // conv/conc both at u_prev
    EnergyReport energy_after;   // conv at u_next, conc lagged at u_prev
    MonitorRecord monitors;
    MassLedger mass;
    double s1_residual = 0.0;
    int s1_iters = 0;
    double s2_residual = 0.0;
    int s2_iters = 0;
    double delta_observed = 0.0;
    double simplex_error = 0.0;
};

struct StepResult {
    CompositionField u_next;
    std::vector<ScalarField> wbar;  // the S1 solution at u_next; pairs exactly
                                    // with u_next in the mass-drift identity
    StepReport report;
};

/// A time step could not be completed; carries the best iterate, its
/// fixed-point gap and a suggested smaller time step.
struct StepFailure : std::runtime_error {
    CompositionField best;
    double gap;
    double suggested_tau;
    StepFailure(const std::string& what, CompositionField b, double g, double tau)
        : std::runtime_error(what), best(std::move(b)), gap(g), suggested_tau(tau) {}
};

struct Trajectory {
    std::vector<double> times;             // t_0 = 0 included
    std::vector<CompositionField> states;  // states[p] at times[p]
    std::vector<StepReport> reports;       // reports[p] produced state p+1
};

/// A run aborted mid-trajectory; carries the partial trajectory.
struct RunFailure : std::runtime_error {
    Trajectory partial;
    int failed_step;
    RunFailure(const std::string& what, Trajectory t, int step)
        : std::runtime_error(what), partial(std::move(t)), failed_step(step) {}
};

/// One semi-implicit time step of the cross-diffusion Cahn-Hilliard system:
/// the fixed point of S = S2 o S1 given the previous composition. See
/// StepMode for the iteration strategy.
StepResult fixed_point_step(const CompositionField& u_prev, const ModelParams& p,
                            const StepConfig& cfg);

/// Time loop: ceil(t_max / tau) steps with per-step invariant checks
/// (unit sum to 1e-12 always, strict positivity from step 1 on).
Trajectory run(const CompositionField& u0, const ModelParams& p, const StepConfig& cfg,
               double t_max);

struct ProjectResult {
    CompositionField u;
    double max_correction;
};

/// Clip raw per-species fields to [0,1] and renormalize each cell to unit
/// sum. A cell whose clipped sum vanishes is a domain error.
ProjectResult project_initial(const std::vector<ScalarField>& raw);

/// Clip to [floor_value, 1] and renormalize; used for the first iterate.
CompositionField floor_renormalize(const CompositionField& u, double floor_value);

/// Entropy-variable defect of the coupled step equations at u (the residual
/// the Newton path drives to zero). Exposed for tests.
std::vector<double> monolithic_residual(const CompositionField& u, const CompositionField& u_prev,
                                        const ModelParams& p);

}  // namespace crossch
