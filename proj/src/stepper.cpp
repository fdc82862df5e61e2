#include "crossch/stepper.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "crossch/solver_util.hpp"

namespace crossch {

CompositionField floor_renormalize(const CompositionField& u, double floor_value) {
    CompositionField out = u;
    for (int c = 0; c < u.grid.cell_count(); ++c) {
        double s = 0.0;
        for (int i = 0; i <= u.n; ++i) {
            double x = std::max(u.u(i)[c], floor_value);
            out.u(i)[c] = x;
            s += x;
        }
        for (int i = 0; i <= u.n; ++i) out.u(i)[c] /= s;
    }
    return out;
}

ProjectResult project_initial(const std::vector<ScalarField>& raw) {
    if (raw.empty()) throw std::invalid_argument("project_initial: no species fields");
    const Grid& g = raw.front().grid;
    const int n = static_cast<int>(raw.size()) - 1;
    CompositionField u(g, n);
    double max_corr = 0.0;
    for (int c = 0; c < g.cell_count(); ++c) {
        double s = 0.0;
        for (int i = 0; i <= n; ++i) {
            require_same_grid(raw[static_cast<std::size_t>(i)].grid, g);
            const double x = raw[static_cast<std::size_t>(i)][c];
            if (!std::isfinite(x)) throw std::domain_error("project_initial: non-finite entry");
            s += std::min(1.0, std::max(0.0, x));
        }
        if (s <= 0.0) throw std::domain_error("project_initial: cell with zero total mass");
        for (int i = 0; i <= n; ++i) {
            const double x = raw[static_cast<std::size_t>(i)][c];
            const double y = std::min(1.0, std::max(0.0, x)) / s;
            u.u(i)[c] = y;
            max_corr = std::max(max_corr, std::fabs(y - x));
        }
    }
    return {std::move(u), max_corr};
}

namespace {

// Entropy-variable map with the explicit concave part lagged at u_prev:
// W_i(u) = ln u_i - ln u0 + eps lap u0 - beta (1 - 2 u0_prev).
std::vector<double> eliminated_wbar(const CompositionField& u, const CompositionField& u_prev,
                                    const ModelParams& p) {
    const int cells = u.grid.cell_count();
    ScalarField lap0 = laplacian_neumann(u.u(0));
    std::vector<double> w(static_cast<std::size_t>(p.n * cells));
    for (int i = 1; i <= p.n; ++i)
        for (int c = 0; c < cells; ++c) {
            const double ui = u.u(i)[c];
            const double u0 = u.u(0)[c];
            if (ui <= 0.0 || u0 <= 0.0)
                throw std::domain_error("step: iterate left the open simplex");
            w[static_cast<std::size_t>((i - 1) * cells + c)] =
                std::log(ui) - std::log(u0) + p.eps * lap0[c] -
                p.beta * (1.0 - 2.0 * u_prev.u(0)[c]);
        }
    return w;
}

struct ResidualEval {
    std::vector<double> R;
    S1System sys;  // coefficients frozen at u; reused by the Jacobian
    std::vector<double> wbar;
};

ResidualEval eval_residual(const CompositionField& u, const CompositionField& u_prev,
                           const ModelParams& p) {
    ResidualEval ev;
    ev.sys = assemble_s1(u, u_prev, p);
    ev.wbar = eliminated_wbar(u, u_prev, p);
    ev.sys.apply(ev.wbar, ev.R);
    for (std::size_t k = 0; k < ev.R.size(); ++k) ev.R[k] -= ev.sys.rhs[k];
    return ev;
}

// Directional derivative of the residual at u along x (species 1..n stacked):
//   J x = A(u) dW[x] + dA[x] W + x / tau.
void jacobian_apply(const CompositionField& u, const ModelParams& p, const S1System& sys,
                    const std::vector<double>& wbar, const std::vector<double>& x,
                    std::vector<double>& y) {
    const Grid& g = u.grid;
    const int n = p.n;
    const int cells = g.cell_count();
    const double inv_h = 1.0 / g.h;

    // s = sum_j x_j per cell (so du0 = -s).
    std::vector<double> s(static_cast<std::size_t>(cells), 0.0);
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cells; ++c)
            s[static_cast<std::size_t>(c)] += x[static_cast<std::size_t>(i * cells + c)];

    ScalarField sf(g);
    sf.v = s;
    ScalarField laps = laplacian_neumann(sf);

    std::vector<double> dW(x.size());
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < cells; ++c) {
            const std::size_t k = static_cast<std::size_t>(i * cells + c);
            dW[k] = x[k] / u.u(i + 1)[c] + s[static_cast<std::size_t>(c)] / u.u(0)[c] -
                    p.eps * laps[c];
        }
    sys.apply(dW, y);

    // Coefficient sensitivity: same divergence form with dC in place of C.
    auto dmat = [&](int c, int i, int j) -> double {
        // i, j are 0-based species offsets for species 1..n.
        const double xi = x[static_cast<std::size_t>(i * cells + c)];
        const double xj = x[static_cast<std::size_t>(j * cells + c)];
        const double ui = u.u(i + 1)[c];
        const double uj = u.u(j + 1)[c];
        if (i != j) return -p.K_at(i + 1, j + 1) * (xi * uj + ui * xj);
        double diag = 0.0;
        for (int l = 0; l < n; ++l) {
            if (l == i) continue;
            const double xl = x[static_cast<std::size_t>(l * cells + c)];
            const double ul = u.u(l + 1)[c];
            diag += p.K_at(i + 1, l + 1) * (xi * ul + ui * xl);
        }
        const double u0 = u.u(0)[c];
        diag += p.K_at(i + 1, 0) * (xi * u0 - ui * s[static_cast<std::size_t>(c)]);
        return diag;
    };

    auto face = [&](int L, int R) {
        for (int i = 0; i < n; ++i) {
            double flux = 0.0;
            for (int j = 0; j < n; ++j) {
                const double cf = 0.5 * (dmat(L, i, j) + dmat(R, i, j));
                const double gw = (wbar[static_cast<std::size_t>(j * cells + R)] -
                                   wbar[static_cast<std::size_t>(j * cells + L)]) * inv_h;
                flux += cf * gw;
            }
            y[static_cast<std::size_t>(i * cells + L)] -= flux * inv_h;
            y[static_cast<std::size_t>(i * cells + R)] += flux * inv_h;
        }
    };
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 1; ix < g.nx; ++ix) face(g.id(ix - 1, iy), g.id(ix, iy));
    if (g.dims == 2)
        for (int iy = 1; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) face(g.id(ix, iy - 1), g.id(ix, iy));

    for (std::size_t k = 0; k < y.size(); ++k) y[k] += x[k] / p.tau;
}

CompositionField advance(const CompositionField& u, const std::vector<double>& d, double alpha) {
    CompositionField out = u;
    const int cells = u.grid.cell_count();
    for (int c = 0; c < cells; ++c) {
        double s = 0.0;
        for (int i = 1; i <= u.n; ++i) {
            const double x = u.u(i)[c] + alpha * d[static_cast<std::size_t>((i - 1) * cells + c)];
            out.u(i)[c] = x;
            s += x;
        }
        out.u(0)[c] = 1.0 - s;
    }
    return out;
}

// Per-entry fraction-to-boundary: every component keeps at least `keep` of
// its own distance to zero. A global-minimum rule would let far-from-boundary
// entries overshoot deep into the barrier region in one step, from where the
// 1/u stiffness makes Newton crawl.
double step_to_boundary(const CompositionField& u, const std::vector<double>& d, double keep) {
    const int cells = u.grid.cell_count();
    double alpha = 1.0;
    for (int c = 0; c < cells; ++c) {
        double s = 0.0;
        for (int i = 1; i <= u.n; ++i) {
            const double di = d[static_cast<std::size_t>((i - 1) * cells + c)];
            s += di;
            if (di < 0.0) alpha = std::min(alpha, (1.0 - keep) * u.u(i)[c] / (-di));
        }
        if (s > 0.0) alpha = std::min(alpha, (1.0 - keep) * u.u(0)[c] / s);
    }
    return std::max(alpha, 0.0);
}

struct NewtonOutcome {
    CompositionField u;
    int iterations = 0;
    double residual_inf = 0.0;
};

NewtonOutcome newton_step_solve(const CompositionField& u_start, const CompositionField& u_prev,
                                const ModelParams& p, const StepConfig& cfg, double tol_res) {
    const int cells = u_start.grid.cell_count();
    const int m = p.n * cells;
    if (m > cfg.dense_limit)
        throw StepFailure("step: Picard did not contract and the stacked system size " +
                              std::to_string(m) + " exceeds the direct-solve limit",
                          u_start, std::numeric_limits<double>::quiet_NaN(), p.tau / 2);

    CompositionField u = u_start;
    ResidualEval ev = eval_residual(u, u_prev, p);
    double rn2 = norm2(ev.R);

    NewtonOutcome out;
    const bool trace = std::getenv("CROSSCH_NEWTON_TRACE") != nullptr;
    for (int it = 0; it < cfg.max_newton; ++it) {
        const double rinf = norm_inf(ev.R);
        if (trace) std::fprintf(stderr, "  newton it=%d rinf=%.3e min=%.3e\n", it, rinf, u.min_value());
        if (rinf <= tol_res) {
            out.u = u;
            out.iterations = it;
            out.residual_inf = rinf;
            return out;
        }

        // Dense Jacobian by columns; the systems stay desk-scale by design.
        Eigen::MatrixXd J(m, m);
        std::vector<double> e(static_cast<std::size_t>(m), 0.0), col;
        for (int j = 0; j < m; ++j) {
            e[static_cast<std::size_t>(j)] = 1.0;
            jacobian_apply(u, p, ev.sys, ev.wbar, e, col);
            for (int i = 0; i < m; ++i) J(i, j) = col[static_cast<std::size_t>(i)];
            e[static_cast<std::size_t>(j)] = 0.0;
        }
        Eigen::VectorXd rhs(m);
        for (int i = 0; i < m; ++i) rhs(i) = -ev.R[static_cast<std::size_t>(i)];
        Eigen::VectorXd dd = J.partialPivLu().solve(rhs);
        std::vector<double> d(static_cast<std::size_t>(m));
        for (int i = 0; i < m; ++i) d[static_cast<std::size_t>(i)] = dd(i);

        if (norm_inf(d) <= 2e-12) {
            // The Newton model places the solution within machine distance
            // in u; the remaining residual is the evaluation floor of the
            // stiff entropy terms, not real error.
            out.u = u;
            out.iterations = it + 1;
            out.residual_inf = rinf;
            return out;
        }

        double alpha = std::min(1.0, step_to_boundary(u, d, 0.1));
        bool accepted = false;
        for (int ls = 0; ls < 30 && alpha > 0.0; ++ls) {
            CompositionField ut = advance(u, d, alpha);
            if (ut.min_value() > 0.0) {
                ResidualEval evt = eval_residual(ut, u_prev, p);
                const double rt2 = norm2(evt.R);
                if (rt2 <= (1.0 - 1e-4 * alpha) * rn2) {
                    u = std::move(ut);
                    ev = std::move(evt);
                    rn2 = rt2;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if (!accepted && norm_inf(d) <= 2e-12) {
            // The correction is below representable progress in u; the
            // residual has hit its evaluation-noise floor (dominated by the
            // tau lap^2 term acting on the entropy variables), not a true
            // defect. The state is converged in u-space.
            out.u = u;
            out.iterations = it + 1;
            out.residual_inf = rinf;
            return out;
        }
        if (!accepted) {
            char msg[128];
            std::snprintf(msg, sizeof(msg), "step: Newton line search stalled at residual %.3e",
                          norm_inf(ev.R));
            throw StepFailure(msg, u, norm_inf(ev.R), p.tau / 2);
        }
    }
    char msg[128];
    std::snprintf(msg, sizeof(msg), "step: Newton iteration budget exhausted at residual %.3e",
                  norm_inf(ev.R));
    throw StepFailure(msg, u, norm_inf(ev.R), p.tau / 2);
}

double gap_inf(const CompositionField& a, const CompositionField& b) {
    // L-inf over species 1..n; u0 follows from the constraint.
    double g = 0.0;
    for (int i = 1; i <= a.n; ++i) g = std::max(g, max_abs_diff(a.u(i), b.u(i)));
    return g;
}

struct SApplication {
    std::vector<ScalarField> wbar;
    S1Solution s1;
    S2Solution s2;
};

SApplication apply_S(const CompositionField& u_tilde, const CompositionField& u_prev,
                     const ModelParams& p, const StepConfig& cfg) {
    SApplication app;
    S1Options s1opts;
    s1opts.tol = cfg.s1_tol;
    s1opts.dense_limit = cfg.dense_limit;
    app.s1 = solve_s1(assemble_s1(u_tilde, u_prev, p), s1opts);
    app.wbar = app.s1.wbar;
    S2Problem prob = S2Problem::make(app.wbar, u_prev.u(0), p);
    S2Options s2opts;
    s2opts.tol = cfg.s2_tol;
    app.s2 = minimize_F(prob, u_tilde, s2opts);
    return app;
}

}  // namespace

std::vector<double> monolithic_residual(const CompositionField& u, const CompositionField& u_prev,
                                        const ModelParams& p) {
    return eval_residual(u, u_prev, p).R;
}

StepResult fixed_point_step(const CompositionField& u_prev, const ModelParams& p,
                            const StepConfig& cfg) {
    p.validate();
    const double eps_mach = std::numeric_limits<double>::epsilon();
    const double tol_res =
        cfg.newton_tol > 0.0 ? cfg.newton_tol : std::max(1e-10, 10.0 * eps_mach * (1.0 + 2.0 / p.tau));

    StepResult res;
    StepReport& rep = res.report;
    rep.fp_gap_floor = eps_mach / (p.tau * p.tau);

    CompositionField u_iter = floor_renormalize(u_prev, cfg.init_floor);
    double theta = cfg.theta;
    double prev_gap = std::numeric_limits<double>::infinity();
    bool converged = false;

    CompositionField best = u_iter;
    double best_gap = std::numeric_limits<double>::infinity();

    if (cfg.mode != StepMode::NewtonOnly) {
        for (int k = 0; k < cfg.max_picard; ++k) {
            SApplication app;
            try {
                app = apply_S(u_iter, u_prev, p, cfg);
            } catch (const std::exception& e) {
                // One application of S left the representable range (the
                // composed map amplifies iterate changes by ~1/tau^2); that
                // is divergence, not a solver defect.
                if (cfg.mode == StepMode::PicardOnly)
                    throw StepFailure(std::string("step: Picard iteration diverged: ") + e.what(),
                                      best, best_gap, p.tau / 2);
                break;
            }
            ++rep.picard_iters;
            const double gap = gap_inf(app.s2.u, u_iter);
            if (gap < best_gap) {
                best_gap = gap;
                best = u_iter;
            }
            if (gap <= cfg.tol_fp) {
                // u_iter is the returned state: S moves it by at most tol_fp,
                // and the solved wbar pairs with it exactly in the S1 relation.
                res.u_next = u_iter;
                res.wbar = app.wbar;
                rep.fp_gap = gap;
                rep.s1_residual = app.s1.rel_residual;
                rep.s1_iters = app.s1.iterations;
                rep.s2_residual = app.s2.residual;
                rep.s2_iters = app.s2.iterations;
                converged = true;
                break;
            }
            const bool contracting = gap <= cfg.picard_bail_ratio * prev_gap;
            if (cfg.mode == StepMode::Auto && k >= 1 && !contracting) break;
            if (gap > prev_gap) theta = std::max(theta / 2.0, cfg.theta_floor);
            // Damped update over all species keeps the exact unit sum.
            CompositionField next = u_iter;
            for (int i = 0; i <= u_iter.n; ++i)
                for (int c = 0; c < u_iter.grid.cell_count(); ++c)
                    next.u(i)[c] = (1.0 - theta) * u_iter.u(i)[c] + theta * app.s2.u.u(i)[c];
            u_iter = std::move(next);
            prev_gap = gap;
        }
        if (!converged && cfg.mode == StepMode::PicardOnly)
            throw StepFailure("step: Picard iteration did not reach tol_fp " +
                                  std::to_string(cfg.tol_fp),
                              best, best_gap, p.tau / 2);
    }
    rep.theta_final = theta;

    if (!converged) {
        NewtonOutcome nw =
            newton_step_solve(floor_renormalize(u_prev, cfg.init_floor), u_prev, p, cfg, tol_res);
        rep.newton_fallback = true;
        rep.newton_iters = nw.iterations;
        res.u_next = nw.u;

        // Recover the entropy variables by one tight S1 solve at the accepted
        // state; the constant-test-function identity then holds exactly.
        S1Options s1opts;
        s1opts.tol = cfg.s1_tol;
        s1opts.dense_limit = cfg.dense_limit;
        S1Solution s1 = solve_s1(assemble_s1(res.u_next, u_prev, p), s1opts);
        res.wbar = s1.wbar;
        rep.s1_residual = s1.rel_residual;
        rep.s1_iters = s1.iterations;

        // Measure one application of S for the report. The metric amplifies
        // roundoff by ~1/tau^2, hence the floor-based acceptance.
        S2Problem prob = S2Problem::make(res.wbar, u_prev.u(0), p);
        S2Options s2opts;
        s2opts.tol = cfg.s2_tol;
        S2Solution s2 = minimize_F(prob, res.u_next, s2opts);
        rep.s2_residual = s2.residual;
        rep.s2_iters = s2.iterations;
        rep.fp_gap = gap_inf(s2.u, res.u_next);
        // The floor covers roundoff only; the S1 solve residual enters the
        // measured gap with the same 1/tau^2 amplification, hence the wide
        // guard. A genuinely wrong state would bounce by O(0.1) or more.
        if (rep.fp_gap > std::max(cfg.tol_fp, 1e4 * rep.fp_gap_floor)) {
            char msg[160];
            std::snprintf(msg, sizeof(msg),
                          "step: measured fixed-point gap %.3e above the acceptance threshold %.3e",
                          rep.fp_gap, std::max(cfg.tol_fp, 1e4 * rep.fp_gap_floor));
            throw StepFailure(msg, res.u_next, rep.fp_gap, p.tau / 2);
        }
    }

    rep.residual_monolithic = norm_inf(monolithic_residual(res.u_next, u_prev, p));

    rep.energy_before.conv = energy_convex(u_prev, p);
    rep.energy_before.conc = energy_concave(u_prev, p);
    rep.energy_before.total = rep.energy_before.conv + rep.energy_before.conc;
    rep.energy_after.conv = energy_convex(res.u_next, p);
    rep.energy_after.conc = rep.energy_before.conc;  // lagged convention
    rep.energy_after.total = rep.energy_after.conv + rep.energy_after.conc;

    rep.monitors = monitors(res.u_next, u_prev, res.wbar, p);

    rep.mass.mass.resize(static_cast<std::size_t>(p.n) + 1);
    for (int i = 0; i <= p.n; ++i) rep.mass.mass[static_cast<std::size_t>(i)] = integrate(res.u_next.u(i));
    rep.mass.predicted_drift.resize(static_cast<std::size_t>(p.n));
    rep.mass.identity_error.resize(static_cast<std::size_t>(p.n));
    for (int i = 1; i <= p.n; ++i) {
        const double wint = integrate(res.wbar[static_cast<std::size_t>(i - 1)]);
        const double dmass = integrate(res.u_next.u(i)) - integrate(u_prev.u(i));
        rep.mass.predicted_drift[static_cast<std::size_t>(i - 1)] = -p.tau * p.tau * wint;
        rep.mass.identity_error[static_cast<std::size_t>(i - 1)] =
            std::fabs(dmass + p.tau * p.tau * wint);
    }

    rep.delta_observed = res.u_next.min_value();
    rep.simplex_error = res.u_next.simplex_error();
    return res;
}

Trajectory run(const CompositionField& u0, const ModelParams& p, const StepConfig& cfg,
               double t_max) {
    if (!(t_max > 0.0)) throw std::invalid_argument("run: t_max must be positive");
    const int steps = std::max(1, static_cast<int>(std::ceil(t_max / p.tau - 1e-12)));

    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(u0);

    StepConfig local = cfg;
    CompositionField u = u0;
    for (int step = 0; step < steps; ++step) {
        StepResult r;
        try {
            r = fixed_point_step(u, p, local);
        } catch (const StepFailure& f) {
            throw RunFailure(std::string("run: step ") + std::to_string(step + 1) +
                                 " failed: " + f.what(),
                             std::move(traj), step + 1);
        }
        if (r.report.simplex_error > 1e-12)
            throw RunFailure("run: unit-sum invariant violated at step " + std::to_string(step + 1),
                             std::move(traj), step + 1);
        if (r.report.delta_observed <= 0.0)
            throw RunFailure("run: positivity lost at step " + std::to_string(step + 1),
                             std::move(traj), step + 1);
        // Picard cannot start contracting later in a run at fixed tau; stop
        // re-probing once it has handed over to Newton.
        if (r.report.newton_fallback && local.mode == StepMode::Auto)
            local.mode = StepMode::NewtonOnly;
        u = r.u_next;
        traj.times.push_back((step + 1) * p.tau);
        traj.states.push_back(u);
        traj.reports.push_back(std::move(r.report));
    }
    return traj;
}

}  // namespace crossch
