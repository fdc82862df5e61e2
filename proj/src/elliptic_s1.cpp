#include "crossch/elliptic_s1.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crossch/solver_util.hpp"

namespace crossch {

namespace {

// Neumann Laplacian on a raw cell array (same stencil as laplacian_neumann).
void lap_raw(const Grid& g, const double* x, double* out) {
    const double inv_h2 = 1.0 / (g.h * g.h);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const int c = g.id(ix, iy);
            double acc = 0.0;
            if (ix > 0) acc += x[g.id(ix - 1, iy)] - x[c];
            if (ix + 1 < g.nx) acc += x[g.id(ix + 1, iy)] - x[c];
            if (g.dims == 2) {
                if (iy > 0) acc += x[g.id(ix, iy - 1)] - x[c];
                if (iy + 1 < g.ny) acc += x[g.id(ix, iy + 1)] - x[c];
            }
            out[c] = acc * inv_h2;
        }
}

int interior_face_count(const Grid& g, int ix, int iy) {
    int m = 0;
    if (ix > 0) ++m;
    if (ix + 1 < g.nx) ++m;
    if (g.dims == 2) {
        if (iy > 0) ++m;
        if (iy + 1 < g.ny) ++m;
    }
    return m;
}

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

}  // namespace

std::vector<double> GHCoefficients::cell_matrix(int c) const {
    std::vector<double> M(static_cast<std::size_t>(n * n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            M[static_cast<std::size_t>(i * n + j)] =
                G[static_cast<std::size_t>((c * n + i) * n + j)] +
                (i == j ? H[static_cast<std::size_t>(c * n + i)] : 0.0);
    return M;
}

S1System assemble_s1(const CompositionField& u_tilde, const CompositionField& u_prev,
                     const ModelParams& p) {
    require_same_grid(u_tilde.grid, u_prev.grid);
    p.validate();
    const Grid& g = u_tilde.grid;
    const int n = p.n;
    const int cells = g.cell_count();
    constexpr double slack = 1e-9;
    for (const CompositionField* u : {&u_tilde, &u_prev})
        for (int i = 0; i <= n; ++i)
            for (double x : u->u(i).v)
                if (x < -slack || x > 1.0 + slack)
                    throw std::domain_error("assemble_s1: composition outside [0,1]");

    S1System sys;
    sys.grid = g;
    sys.n = n;
    sys.tau = p.tau;
    sys.coeffs.n = n;
    sys.coeffs.cells = cells;
    sys.coeffs.G.assign(static_cast<std::size_t>(cells * n * n), 0.0);
    sys.coeffs.H.assign(static_cast<std::size_t>(cells * n), 0.0);

    for (int c = 0; c < cells; ++c) {
        const double u0 = clamp01(u_tilde.u(0)[c]);
        for (int i = 1; i <= n; ++i) {
            const double ui = clamp01(u_tilde.u(i)[c]);
            double diag = 0.0;
            for (int j = 1; j <= n; ++j) {
                if (j == i) continue;
                const double uj = clamp01(u_tilde.u(j)[c]);
                const double gij = p.K_at(i, j) * ui * uj;
                sys.coeffs.G[static_cast<std::size_t>((c * n + (i - 1)) * n + (j - 1))] = -gij;
                diag += gij;
            }
            sys.coeffs.G[static_cast<std::size_t>((c * n + (i - 1)) * n + (i - 1))] = diag;
            sys.coeffs.H[static_cast<std::size_t>(c * n + (i - 1))] = p.K_at(i, 0) * ui * u0;
        }
    }

    sys.rhs.assign(static_cast<std::size_t>(n * cells), 0.0);
    for (int i = 1; i <= n; ++i)
        for (int c = 0; c < cells; ++c)
            sys.rhs[static_cast<std::size_t>((i - 1) * cells + c)] =
                -(u_tilde.u(i)[c] - u_prev.u(i)[c]) / p.tau;
    return sys;
}

void S1System::apply(const std::vector<double>& x, std::vector<double>& y) const {
    const Grid& g = grid;
    const int cells = g.cell_count();
    y.assign(static_cast<std::size_t>(n * cells), 0.0);
    const double inv_h = 1.0 / g.h;

    auto cmat = [&](int c, int i, int j) {
        return coeffs.G[static_cast<std::size_t>((c * n + i) * n + j)] +
               (i == j ? coeffs.H[static_cast<std::size_t>(c * n + i)] : 0.0);
    };

    auto face = [&](int L, int R) {
        for (int i = 0; i < n; ++i) {
            double flux = 0.0;
            for (int j = 0; j < n; ++j) {
                const double cf = 0.5 * (cmat(L, i, j) + cmat(R, i, j));
                const double gx = (x[static_cast<std::size_t>(j * cells + R)] -
                                   x[static_cast<std::size_t>(j * cells + L)]) * inv_h;
                flux += cf * gx;
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

    // tau * (I - lap + lap^2) per species: the Riesz action of the H2 product.
    std::vector<double> lap1(static_cast<std::size_t>(cells)), lap2(static_cast<std::size_t>(cells));
    for (int i = 0; i < n; ++i) {
        const double* xi = x.data() + static_cast<std::ptrdiff_t>(i) * cells;
        double* yi = y.data() + static_cast<std::ptrdiff_t>(i) * cells;
        lap_raw(grid, xi, lap1.data());
        lap_raw(grid, lap1.data(), lap2.data());
        for (int c = 0; c < cells; ++c) yi[c] += tau * (xi[c] - lap1[c] + lap2[c]);
    }
}

std::vector<double> S1System::diagonal() const {
    const Grid& g = grid;
    const int cells = g.cell_count();
    const double inv_h2 = 1.0 / (g.h * g.h);
    std::vector<double> d(static_cast<std::size_t>(n * cells), 0.0);

    auto cdiag = [&](int c, int i) {
        return coeffs.G[static_cast<std::size_t>((c * n + i) * n + i)] +
               coeffs.H[static_cast<std::size_t>(c * n + i)];
    };

    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const int c = g.id(ix, iy);
            const int faces = interior_face_count(g, ix, iy);
            const double dL = faces * inv_h2;            // diag of -lap
            const double dL2 = dL * dL + faces * inv_h2 * inv_h2;  // diag of lap^2
            for (int i = 0; i < n; ++i) {
                double s = tau * (1.0 + dL + dL2);
                if (ix > 0) s += 0.5 * (cdiag(c, i) + cdiag(g.id(ix - 1, iy), i)) * inv_h2;
                if (ix + 1 < g.nx) s += 0.5 * (cdiag(c, i) + cdiag(g.id(ix + 1, iy), i)) * inv_h2;
                if (g.dims == 2) {
                    if (iy > 0) s += 0.5 * (cdiag(c, i) + cdiag(g.id(ix, iy - 1), i)) * inv_h2;
                    if (iy + 1 < g.ny) s += 0.5 * (cdiag(c, i) + cdiag(g.id(ix, iy + 1), i)) * inv_h2;
                }
                d[static_cast<std::size_t>(i * cells + c)] = s;
            }
        }
    return d;
}

double S1System::form(const std::vector<double>& x, const std::vector<double>& y) const {
    std::vector<double> ax;
    apply(x, ax);
    return dot(ax, y) * grid.cell_volume();
}

double S1System::h2_norm_sq(const std::vector<double>& x) const {
    std::vector<ScalarField> fields = unstack_fields(x, grid, n);
    double s = 0.0;
    for (const ScalarField& f : fields) s += inner_h2(f, f);
    return s;
}

std::vector<double> stack_fields(const std::vector<ScalarField>& fields) {
    const int cells = fields.front().grid.cell_count();
    std::vector<double> x(fields.size() * static_cast<std::size_t>(cells));
    for (std::size_t i = 0; i < fields.size(); ++i)
        std::copy(fields[i].v.begin(), fields[i].v.end(),
                  x.begin() + static_cast<std::ptrdiff_t>(i) * cells);
    return x;
}

std::vector<ScalarField> unstack_fields(const std::vector<double>& x, const Grid& g, int n) {
    const int cells = g.cell_count();
    std::vector<ScalarField> fields(static_cast<std::size_t>(n), ScalarField(g));
    for (int i = 0; i < n; ++i)
        std::copy(x.begin() + static_cast<std::ptrdiff_t>(i) * cells,
                  x.begin() + static_cast<std::ptrdiff_t>(i + 1) * cells,
                  fields[static_cast<std::size_t>(i)].v.begin());
    return fields;
}

namespace {

double true_rel_residual(const S1System& sys, const std::vector<double>& x) {
    std::vector<double> ax;
    sys.apply(x, ax);
    double rn = 0.0, bn = 0.0;
    for (std::size_t i = 0; i < ax.size(); ++i) {
        const double r = sys.rhs[i] - ax[i];
        rn += r * r;
        bn += sys.rhs[i] * sys.rhs[i];
    }
    if (bn == 0.0) return rn == 0.0 ? 0.0 : std::sqrt(rn);
    return std::sqrt(rn / bn);
}

void solve_dense(const S1System& sys, std::vector<double>& x, double tol) {
    const int m = sys.size();
    Eigen::MatrixXd A(m, m);
    std::vector<double> e(static_cast<std::size_t>(m), 0.0), col;
    for (int j = 0; j < m; ++j) {
        e[static_cast<std::size_t>(j)] = 1.0;
        sys.apply(e, col);
        for (int i = 0; i < m; ++i) A(i, j) = col[static_cast<std::size_t>(i)];
        e[static_cast<std::size_t>(j)] = 0.0;
    }
    Eigen::VectorXd b(m);
    for (int i = 0; i < m; ++i) b(i) = sys.rhs[static_cast<std::size_t>(i)];
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    Eigen::VectorXd sol = llt.solve(b);
    x.resize(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] = sol(i);

    // Iterative refinement: the stiff tau lap^2 term makes the raw
    // factorization residual land near cond * eps, above tight tolerances.
    const double bnorm = norm2(sys.rhs);
    std::vector<double> ax;
    for (int pass = 0; pass < 4; ++pass) {
        sys.apply(x, ax);
        Eigen::VectorXd r(m);
        for (int i = 0; i < m; ++i) r(i) = sys.rhs[static_cast<std::size_t>(i)] - ax[static_cast<std::size_t>(i)];
        if (r.norm() <= 0.5 * tol * bnorm) break;
        Eigen::VectorXd dx = llt.solve(r);
        for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] += dx(i);
    }
}

}  // namespace

S1Solution solve_s1(const S1System& sys, const S1Options& opts) {
    const int m = sys.size();
    S1Solution out;
    std::vector<double> x;

    double bnorm = norm2(sys.rhs);
    if (bnorm == 0.0) {
        // Coercive homogeneous problem: the solution is exactly zero.
        out.wbar = unstack_fields(std::vector<double>(static_cast<std::size_t>(m), 0.0), sys.grid, sys.n);
        return out;
    }

    if (!opts.force_dense) {
        int max_iter = opts.max_iterations > 0 ? opts.max_iterations : std::min(60 * m, 20000);
        std::vector<double> diag = sys.diagonal();
        auto apply = [&sys](const std::vector<double>& in, std::vector<double>& outv) {
            sys.apply(in, outv);
        };
        PcgResult r = pcg(apply, sys.rhs, diag, x, opts.tol, max_iter);
        out.iterations = r.iterations;
        out.rel_residual = true_rel_residual(sys, x);
        // Refinement restarts: the recursive CG residual drifts from the true
        // one near convergence; solving for the correction recovers it.
        for (int pass = 0; pass < 3 && out.rel_residual > opts.tol; ++pass) {
            std::vector<double> ax, res(static_cast<std::size_t>(m)), dx;
            sys.apply(x, ax);
            for (int i = 0; i < m; ++i)
                res[static_cast<std::size_t>(i)] = sys.rhs[static_cast<std::size_t>(i)] - ax[static_cast<std::size_t>(i)];
            PcgResult rr = pcg(apply, res, diag, dx, 1e-2, max_iter);
            out.iterations += rr.iterations;
            for (int i = 0; i < m; ++i) x[static_cast<std::size_t>(i)] += dx[static_cast<std::size_t>(i)];
            out.rel_residual = true_rel_residual(sys, x);
        }
        if (out.rel_residual <= opts.tol) {
            out.wbar = unstack_fields(x, sys.grid, sys.n);
            out.h2_norm = std::sqrt(sys.h2_norm_sq(x));
            return out;
        }
    }

    if (opts.force_dense || (opts.allow_dense_fallback && m <= opts.dense_limit)) {
        solve_dense(sys, x, opts.tol);
        out.used_dense = true;
        out.rel_residual = true_rel_residual(sys, x);
        if (out.rel_residual <= opts.tol) {
            out.wbar = unstack_fields(x, sys.grid, sys.n);
            out.h2_norm = std::sqrt(sys.h2_norm_sq(x));
            return out;
        }
    }

    char msg[128];
    std::snprintf(msg, sizeof(msg), "solve_s1: residual %.3e above tolerance %.3e",
                  out.rel_residual, opts.tol);
    throw SolveFailure(msg, out.rel_residual, out.iterations);
}

}  // namespace crossch
