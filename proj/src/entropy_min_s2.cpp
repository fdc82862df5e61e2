#include "crossch/entropy_min_s2.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "crossch/solver_util.hpp"

namespace crossch {

S2Problem S2Problem::make(const std::vector<ScalarField>& wbar, const ScalarField& u0_prev,
                          const ModelParams& p) {
    S2Problem prob;
    prob.grid = u0_prev.grid;
    prob.n = static_cast<int>(wbar.size());
    prob.eps = p.eps;
    prob.f.reserve(wbar.size());
    for (const ScalarField& w : wbar) {
        require_same_grid(w.grid, u0_prev.grid);
        ScalarField fi(prob.grid);
        for (int c = 0; c < fi.size(); ++c) fi[c] = w[c] + p.beta * (1.0 - 2.0 * u0_prev[c]);
        prob.f.push_back(std::move(fi));
    }
    return prob;
}

double objective_F(const CompositionField& v, const S2Problem& prob) {
    require_same_grid(v.grid, prob.grid);
    double bulk = 0.0;
    for (int c = 0; c < v.grid.cell_count(); ++c)
        for (int i = 0; i <= v.n; ++i) {
            const double x = v.u(i)[c];
            if (x < 0.0) throw std::domain_error("objective_F: negative volumic fraction");
            bulk += xlogx(x);
        }
    for (int i = 1; i <= v.n; ++i)
        for (int c = 0; c < v.grid.cell_count(); ++c)
            bulk -= prob.f[static_cast<std::size_t>(i - 1)][c] * v.u(i)[c];
    FaceField g0 = gradient(v.u(0));
    return bulk * v.grid.cell_volume() + 0.5 * prob.eps * inner_faces(g0, g0);
}

std::vector<ScalarField> grad_F(const CompositionField& v, const S2Problem& prob) {
    require_same_grid(v.grid, prob.grid);
    ScalarField lap0 = laplacian_neumann(v.u(0));
    std::vector<ScalarField> g;
    g.reserve(static_cast<std::size_t>(v.n));
    for (int i = 1; i <= v.n; ++i) {
        ScalarField gi(v.grid);
        for (int c = 0; c < gi.size(); ++c) {
            const double vi = v.u(i)[c];
            const double v0 = v.u(0)[c];
            if (vi <= 0.0 || v0 <= 0.0)
                throw std::domain_error("grad_F: composition not strictly positive");
            gi[c] = std::log(vi) - std::log(v0) + prob.eps * lap0[c] -
                    prob.f[static_cast<std::size_t>(i - 1)][c];
        }
        g.push_back(std::move(gi));
    }
    return g;
}

double optimality_residual(const CompositionField& u, const S2Problem& prob) {
    double r = 0.0;
    for (const ScalarField& gi : grad_F(u, prob)) r = std::max(r, max_abs(gi));
    return r;
}

namespace {

// Internal Newton state: unknowns x = (v_1..v_n) stacked species-major,
// v0 derived per cell.
struct Work {
    const S2Problem* prob;
    int n, cells;
    double vol;

    std::vector<double> v0_of(const std::vector<double>& x) const {
        std::vector<double> v0(static_cast<std::size_t>(cells), 1.0);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c)
                v0[static_cast<std::size_t>(c)] -= x[static_cast<std::size_t>(i * cells + c)];
        return v0;
    }

    double min_entry(const std::vector<double>& x, const std::vector<double>& v0) const {
        double m = std::numeric_limits<double>::infinity();
        for (double t : x) m = std::min(m, t);
        for (double t : v0) m = std::min(m, t);
        return m;
    }

    // +inf when any entry is nonpositive, so line searches reject the point.
    double objective(const std::vector<double>& x, const std::vector<double>& v0) const {
        const Grid& g = prob->grid;
        double bulk = 0.0;
        for (double t : v0) {
            if (t <= 0.0) return std::numeric_limits<double>::infinity();
            bulk += t * std::log(t);
        }
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c) {
                const double t = x[static_cast<std::size_t>(i * cells + c)];
                if (t <= 0.0) return std::numeric_limits<double>::infinity();
                bulk += t * std::log(t) -
                        prob->f[static_cast<std::size_t>(i)][c] * t;
            }
        ScalarField f0(g);
        f0.v = v0;
        FaceField g0 = gradient(f0);
        return bulk * vol + 0.5 * prob->eps * inner_faces(g0, g0);
    }

    // l2 gradient field (per cell, per species); the Euclidean gradient is
    // vol * this.
    void gradient_l2(const std::vector<double>& x, const std::vector<double>& v0,
                     std::vector<double>& g) const {
        ScalarField f0(prob->grid);
        f0.v = v0;
        ScalarField lap0 = laplacian_neumann(f0);
        g.resize(x.size());
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c)
                g[static_cast<std::size_t>(i * cells + c)] =
                    std::log(x[static_cast<std::size_t>(i * cells + c)]) -
                    std::log(v0[static_cast<std::size_t>(c)]) + prob->eps * lap0[c] -
                    prob->f[static_cast<std::size_t>(i)][c];
    }

    // Hessian action: y_i = vol * (x_i / v_i + s / v0 - eps lap s), s = sum_j x_j.
    void hessian_apply(const std::vector<double>& v, const std::vector<double>& v0,
                       const std::vector<double>& dir, std::vector<double>& y) const {
        std::vector<double> s(static_cast<std::size_t>(cells), 0.0);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c)
                s[static_cast<std::size_t>(c)] += dir[static_cast<std::size_t>(i * cells + c)];
        ScalarField sf(prob->grid);
        sf.v = s;
        ScalarField laps = laplacian_neumann(sf);
        y.resize(dir.size());
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c) {
                const std::size_t k = static_cast<std::size_t>(i * cells + c);
                y[k] = vol * (dir[k] / v[k] + s[static_cast<std::size_t>(c)] / v0[static_cast<std::size_t>(c)] -
                              prob->eps * laps[c]);
            }
    }

    std::vector<double> hessian_diag(const std::vector<double>& v,
                                     const std::vector<double>& v0) const {
        const Grid& g = prob->grid;
        const double inv_h2 = 1.0 / (g.h * g.h);
        std::vector<double> d(v.size());
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const int c = g.id(ix, iy);
                int faces = 0;
                if (ix > 0) ++faces;
                if (ix + 1 < g.nx) ++faces;
                if (g.dims == 2) {
                    if (iy > 0) ++faces;
                    if (iy + 1 < g.ny) ++faces;
                }
                const double lap_diag = faces * inv_h2;
                for (int i = 0; i < n; ++i) {
                    const std::size_t k = static_cast<std::size_t>(i * cells + c);
                    d[k] = vol * (1.0 / v[k] + 1.0 / v0[static_cast<std::size_t>(c)] +
                                  prob->eps * lap_diag);
                }
            }
        return d;
    }

    // Largest step keeping every entry at or above keep * current minimum.
    double fraction_to_boundary(const std::vector<double>& x, const std::vector<double>& v0,
                                const std::vector<double>& p, double keep) const {
        const double m = min_entry(x, v0);
        const double floor_val = keep * m;
        double alpha = 1.0;
        for (std::size_t k = 0; k < x.size(); ++k)
            if (p[k] < 0.0) alpha = std::min(alpha, (x[k] - floor_val) / (-p[k]));
        for (int c = 0; c < cells; ++c) {
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += p[static_cast<std::size_t>(i * cells + c)];
            if (s > 0.0)
                alpha = std::min(alpha, (v0[static_cast<std::size_t>(c)] - floor_val) / s);
        }
        return std::max(alpha, 0.0);
    }
};

}  // namespace

S2Solution minimize_F(const S2Problem& prob, const CompositionField& v_init,
                      const S2Options& opts) {
    require_same_grid(prob.grid, v_init.grid);
    if (v_init.n != prob.n) throw std::invalid_argument("minimize_F: species count mismatch");
    const int n = prob.n;
    const int cells = prob.grid.cell_count();

    Work w{&prob, n, cells, prob.grid.cell_volume()};

    std::vector<double> x(static_cast<std::size_t>(n * cells));
    for (int i = 1; i <= n; ++i)
        for (int c = 0; c < cells; ++c)
            x[static_cast<std::size_t>((i - 1) * cells + c)] = v_init.u(i)[c];
    std::vector<double> v0 = w.v0_of(x);
    if (w.min_entry(x, v0) <= 0.0)
        throw std::invalid_argument("minimize_F: v_init must be strictly interior");

    auto to_field = [&](const std::vector<double>& xs, const std::vector<double>& v0s) {
        CompositionField u(prob.grid, n);
        u.u(0).v = v0s;
        for (int i = 1; i <= n; ++i)
            for (int c = 0; c < cells; ++c)
                u.u(i)[c] = xs[static_cast<std::size_t>((i - 1) * cells + c)];
        return u;
    };

    S2Solution sol;
    double fx = w.objective(x, v0);
    sol.objective_history.push_back(fx);

    auto fmt_res = [](double r) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3e", r);
        return std::string(buf);
    };

    std::vector<double> g, p, y;
    for (int it = 0; it < opts.max_iterations; ++it) {
        w.gradient_l2(x, v0, g);
        const double res = norm_inf(g);
        if (res <= opts.tol) {
            sol.u = to_field(x, v0);
            sol.residual = res;
            sol.iterations = it;
            sol.delta_observed = w.min_entry(x, v0);
            return sol;
        }

        // Newton direction: H p = -vol * g.
        std::vector<double> rhs(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) rhs[k] = -w.vol * g[k];
        std::vector<double> diag = w.hessian_diag(x, v0);
        auto apply = [&](const std::vector<double>& d, std::vector<double>& out) {
            w.hessian_apply(x, v0, d, out);
        };
        PcgResult cg = pcg(apply, rhs, diag, p, opts.cg_tol, std::min(40 * n * cells, 20000));
        (void)cg;  // an inexact direction is still tried; progress is verified below

        bool accepted = false;
        if (res <= 1e-6) {
            // Quadratic basin: objective differences are below double
            // roundoff, so step on the residual rather than on F.
            double alpha = std::min(1.0, w.fraction_to_boundary(x, v0, p, 0.01));
            std::vector<double> gt;
            for (int ls = 0; ls < 6 && alpha > 0.0; ++ls) {
                std::vector<double> xt(x.size());
                for (std::size_t k = 0; k < x.size(); ++k) xt[k] = x[k] + alpha * p[k];
                std::vector<double> v0t = w.v0_of(xt);
                if (w.min_entry(xt, v0t) > 0.0) {
                    w.gradient_l2(xt, v0t, gt);
                    if (norm_inf(gt) < res) {
                        x.swap(xt);
                        v0.swap(v0t);
                        fx = w.objective(x, v0);
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if (!accepted)
                throw MinimizeFailure(
                    "minimize_F: residual stagnated at " + fmt_res(res) + " above tolerance " +
                        fmt_res(opts.tol),
                    to_field(x, v0), res, it);
        } else {
            // Globalized phase: Armijo on F along the Newton direction, with
            // a steepest-descent rescue.
            for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
                if (attempt == 1)
                    for (std::size_t k = 0; k < g.size(); ++k) p[k] = -g[k];
                const double slope = w.vol * dot(g, p);
                if (slope >= 0.0) continue;
                double alpha = std::min(1.0, w.fraction_to_boundary(x, v0, p, 0.01));
                for (int ls = 0; ls < 40 && alpha > 0.0; ++ls) {
                    std::vector<double> xt(x.size());
                    for (std::size_t k = 0; k < x.size(); ++k) xt[k] = x[k] + alpha * p[k];
                    std::vector<double> v0t = w.v0_of(xt);
                    const double ft = w.objective(xt, v0t);
                    if (ft <= fx + 1e-4 * alpha * slope) {
                        x.swap(xt);
                        v0.swap(v0t);
                        fx = ft;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
            }
            if (!accepted)
                throw MinimizeFailure("minimize_F: line search failed at residual " + fmt_res(res),
                                      to_field(x, v0), res, it);
        }
        sol.objective_history.push_back(fx);
    }

    w.gradient_l2(x, v0, g);
    throw MinimizeFailure("minimize_F: iteration budget exhausted at residual " +
                              fmt_res(norm_inf(g)),
                          to_field(x, v0), norm_inf(g), opts.max_iterations);
}

}  // namespace crossch
