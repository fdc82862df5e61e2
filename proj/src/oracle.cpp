#include "crossch/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "crossch/grid.hpp"

namespace crossch {

namespace {

// The reference paths below keep their own little numerics so that agreement
// with the production solvers is evidence rather than tautology: own
// Laplacian loops, own projection, own linear solver.

void ref_laplacian(const Grid& g, const std::vector<double>& x, std::vector<double>& out) {
    const double inv_h2 = 1.0 / (g.h * g.h);
    out.assign(x.size(), 0.0);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const int c = g.id(ix, iy);
            double acc = 0.0;
            if (ix > 0) acc += x[static_cast<std::size_t>(g.id(ix - 1, iy))] - x[static_cast<std::size_t>(c)];
            if (ix + 1 < g.nx) acc += x[static_cast<std::size_t>(g.id(ix + 1, iy))] - x[static_cast<std::size_t>(c)];
            if (g.dims == 2) {
                if (iy > 0) acc += x[static_cast<std::size_t>(g.id(ix, iy - 1))] - x[static_cast<std::size_t>(c)];
                if (iy + 1 < g.ny) acc += x[static_cast<std::size_t>(g.id(ix, iy + 1))] - x[static_cast<std::size_t>(c)];
            }
            out[static_cast<std::size_t>(c)] = acc * inv_h2;
        }
}

// Euclidean projection of a point onto the probability simplex (sorting
// form). Oracle-only.
void project_simplex(std::vector<double>& v) {
    std::vector<double> s = v;
    std::sort(s.begin(), s.end(), std::greater<double>());
    double cum = 0.0, theta = 0.0;
    int rho = 0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        cum += s[j];
        const double t = (1.0 - cum) / static_cast<double>(j + 1);
        if (s[j] + t > 0.0) {
            rho = static_cast<int>(j + 1);
            theta = t;
        }
    }
    (void)rho;
    for (double& x : v) x = std::max(x + theta, 0.0);
}

double safe_log(double x) { return std::log(std::max(x, 1e-300)); }

// Dense LU with partial pivoting, row-major, solves in place. Oracle-only.
bool lu_solve(std::vector<double>& A, std::vector<double>& b, int m) {
    std::vector<int> piv(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) piv[static_cast<std::size_t>(i)] = i;
    for (int k = 0; k < m; ++k) {
        int pk = k;
        double best = std::fabs(A[static_cast<std::size_t>(k * m + k)]);
        for (int i = k + 1; i < m; ++i) {
            const double a = std::fabs(A[static_cast<std::size_t>(i * m + k)]);
            if (a > best) {
                best = a;
                pk = i;
            }
        }
        if (best == 0.0) return false;
        if (pk != k) {
            for (int j = 0; j < m; ++j)
                std::swap(A[static_cast<std::size_t>(k * m + j)], A[static_cast<std::size_t>(pk * m + j)]);
            std::swap(b[static_cast<std::size_t>(k)], b[static_cast<std::size_t>(pk)]);
        }
        const double akk = A[static_cast<std::size_t>(k * m + k)];
        for (int i = k + 1; i < m; ++i) {
            const double l = A[static_cast<std::size_t>(i * m + k)] / akk;
            A[static_cast<std::size_t>(i * m + k)] = l;
            for (int j = k + 1; j < m; ++j)
                A[static_cast<std::size_t>(i * m + j)] -= l * A[static_cast<std::size_t>(k * m + j)];
            b[static_cast<std::size_t>(i)] -= l * b[static_cast<std::size_t>(k)];
        }
    }
    for (int i = m - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < m; ++j) s -= A[static_cast<std::size_t>(i * m + j)] * b[static_cast<std::size_t>(j)];
        b[static_cast<std::size_t>(i)] = s / A[static_cast<std::size_t>(i * m + i)];
    }
    return true;
}

}  // namespace

double fd_gradient_check(const S2Problem& prob, const CompositionField& v, double h_fd,
                         int n_dirs, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = prob.n;
    const int cells = prob.grid.cell_count();

    std::vector<ScalarField> g = grad_F(v, prob);
    double gnorm_sq = 0.0;
    for (const ScalarField& gi : g) gnorm_sq += inner_l2(gi, gi);
    const double gnorm = std::sqrt(gnorm_sq);

    double worst = 0.0;
    for (int d = 0; d < n_dirs; ++d) {
        std::vector<ScalarField> phi(static_cast<std::size_t>(n), ScalarField(prob.grid));
        double nrm_sq = 0.0;
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < cells; ++c) phi[static_cast<std::size_t>(i)][c] = gauss(rng);
            nrm_sq += inner_l2(phi[static_cast<std::size_t>(i)], phi[static_cast<std::size_t>(i)]);
        }
        const double nrm = std::sqrt(nrm_sq);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < cells; ++c) phi[static_cast<std::size_t>(i)][c] /= nrm;

        auto shifted = [&](double sgn) {
            CompositionField w = v;
            for (int c = 0; c < cells; ++c) {
                double s = 0.0;
                for (int i = 1; i <= n; ++i) {
                    const double x = v.u(i)[c] + sgn * h_fd * phi[static_cast<std::size_t>(i - 1)][c];
                    w.u(i)[c] = x;
                    s += x;
                }
                w.u(0)[c] = 1.0 - s;
            }
            return w;
        };
        const double fp = objective_F(shifted(+1.0), prob);
        const double fm = objective_F(shifted(-1.0), prob);
        const double fd = (fp - fm) / (2.0 * h_fd);

        double an = 0.0;
        for (int i = 0; i < n; ++i) an += inner_l2(g[static_cast<std::size_t>(i)], phi[static_cast<std::size_t>(i)]);

        // Guarded denominator: relative to the pairing when it is sizable,
        // absolute at stationary points where the gradient itself vanishes.
        double scale = std::max(std::fabs(an), 0.01 * gnorm);
        if (gnorm < 1e-8) scale = std::max(scale, 1.0);
        worst = std::max(worst, std::fabs(fd - an) / scale);
    }
    return worst;
}

CompositionField brute_force_minimize(const S2Problem& prob, const CompositionField& v_init,
                                      int iters, double step) {
    const Grid& g = prob.grid;
    const int n = prob.n;
    const int cells = g.cell_count();

    // Full (n+1)-vector per cell, species-major.
    std::vector<std::vector<double>> v(static_cast<std::size_t>(n + 1),
                                       std::vector<double>(static_cast<std::size_t>(cells)));
    for (int i = 0; i <= n; ++i)
        for (int c = 0; c < cells; ++c) v[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = v_init.u(i)[c];

    std::vector<double> lap0;
    std::vector<double> cell(static_cast<std::size_t>(n + 1));
    for (int it = 0; it < iters; ++it) {
        ref_laplacian(g, v[0], lap0);
        for (int c = 0; c < cells; ++c) {
            for (int i = 0; i <= n; ++i) {
                double grad = safe_log(v[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]) + 1.0;
                if (i == 0)
                    grad -= prob.eps * lap0[static_cast<std::size_t>(c)];
                else
                    grad -= prob.f[static_cast<std::size_t>(i - 1)][c];
                cell[static_cast<std::size_t>(i)] =
                    v[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] - step * grad;
            }
            project_simplex(cell);
            for (int i = 0; i <= n; ++i)
                v[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] = cell[static_cast<std::size_t>(i)];
        }
    }

    CompositionField out(g, n);
    for (int i = 0; i <= n; ++i)
        for (int c = 0; c < cells; ++c) out.u(i)[c] = v[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    return out;
}

ScalarField scalar_ch_reference_step(const ScalarField& u1_prev, const ModelParams& p,
                                     double tol_res, int max_iter) {
    if (p.n != 1) throw std::invalid_argument("scalar reference: n must be 1");
    const Grid& g = u1_prev.grid;
    const int m = g.cell_count();
    const double k10 = p.K_at(1, 0);

    // Residual of the two-phase step equations in the single unknown v = u1:
    //   R(v) = (v - v_prev)/tau - d/dx( k10 avg(v(1-v)) dW/dx )
    //          + tau (W - lap W + lap lap W),
    //   W(v) = ln v - ln(1-v) - eps lap v - beta (2 v_prev - 1).
    auto residual = [&](const std::vector<double>& v, std::vector<double>& R) {
        std::vector<double> lapv, W(static_cast<std::size_t>(m));
        ref_laplacian(g, v, lapv);
        for (int c = 0; c < m; ++c)
            W[static_cast<std::size_t>(c)] = safe_log(v[static_cast<std::size_t>(c)]) -
                                             safe_log(1.0 - v[static_cast<std::size_t>(c)]) -
                                             p.eps * lapv[static_cast<std::size_t>(c)] -
                                             p.beta * (2.0 * u1_prev[c] - 1.0);
        std::vector<double> lw1, lw2;
        ref_laplacian(g, W, lw1);
        ref_laplacian(g, lw1, lw2);
        R.assign(static_cast<std::size_t>(m), 0.0);
        const double inv_h = 1.0 / g.h;
        auto mob = [&](int c) {
            const double x = v[static_cast<std::size_t>(c)];
            return k10 * x * (1.0 - x);
        };
        auto face = [&](int L, int Rc) {
            const double cf = 0.5 * (mob(L) + mob(Rc));
            const double flux = cf * (W[static_cast<std::size_t>(Rc)] - W[static_cast<std::size_t>(L)]) * inv_h;
            R[static_cast<std::size_t>(L)] -= flux * inv_h;
            R[static_cast<std::size_t>(Rc)] += flux * inv_h;
        };
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 1; ix < g.nx; ++ix) face(g.id(ix - 1, iy), g.id(ix, iy));
        if (g.dims == 2)
            for (int iy = 1; iy < g.ny; ++iy)
                for (int ix = 0; ix < g.nx; ++ix) face(g.id(ix, iy - 1), g.id(ix, iy));
        for (int c = 0; c < m; ++c) {
            const std::size_t k = static_cast<std::size_t>(c);
            R[k] += (v[k] - u1_prev[c]) / p.tau + p.tau * (W[k] - lw1[k] + lw2[k]);
        }
    };

    std::vector<double> v(static_cast<std::size_t>(m));
    for (int c = 0; c < m; ++c) v[static_cast<std::size_t>(c)] = std::min(1.0 - 1e-10, std::max(1e-10, u1_prev[c]));

    std::vector<double> R, Rt, J, d, vpert;
    residual(v, R);
    auto norm_inf_v = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double t : x) s = std::max(s, std::fabs(t));
        return s;
    };
    auto norm2_v = [](const std::vector<double>& x) {
        double s = 0.0;
        for (double t : x) s += t * t;
        return std::sqrt(s);
    };

    for (int it = 0; it < max_iter; ++it) {
        if (norm_inf_v(R) <= tol_res) break;
        // Forward-difference Jacobian, column by column.
        J.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
        const double base = norm2_v(R);
        for (int j = 0; j < m; ++j) {
            vpert = v;
            const double delta = 1e-7 * std::max(1.0, std::fabs(v[static_cast<std::size_t>(j)]));
            vpert[static_cast<std::size_t>(j)] += delta;
            residual(vpert, Rt);
            for (int i = 0; i < m; ++i)
                J[static_cast<std::size_t>(i * m + j)] =
                    (Rt[static_cast<std::size_t>(i)] - R[static_cast<std::size_t>(i)]) / delta;
        }
        d = R;
        for (double& x : d) x = -x;
        if (!lu_solve(J, d, m)) throw std::runtime_error("scalar reference: singular Jacobian");

        // Keep the iterate inside (0,1): every entry retains at least a
        // tenth of its own distance to either boundary per iteration.
        double alpha = 1.0;
        for (int c = 0; c < m; ++c) {
            const std::size_t k = static_cast<std::size_t>(c);
            if (d[k] < 0.0) alpha = std::min(alpha, 0.9 * v[k] / (-d[k]));
            if (d[k] > 0.0) alpha = std::min(alpha, 0.9 * (1.0 - v[k]) / d[k]);
        }
        bool ok = false;
        for (int ls = 0; ls < 30; ++ls) {
            vpert = v;
            for (int c = 0; c < m; ++c) vpert[static_cast<std::size_t>(c)] += alpha * d[static_cast<std::size_t>(c)];
            residual(vpert, Rt);
            if (norm2_v(Rt) <= (1.0 - 1e-4 * alpha) * base) {
                v.swap(vpert);
                R.swap(Rt);
                ok = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!ok && norm_inf_v(d) <= 2e-12) break;  // converged in v; residual at its noise floor
        if (!ok) throw std::runtime_error("scalar reference: line search stalled");
    }
    if (norm_inf_v(R) > std::max(tol_res, 1e-8))
        throw std::runtime_error("scalar reference: did not converge");

    ScalarField out(g);
    for (int c = 0; c < m; ++c) out[c] = v[static_cast<std::size_t>(c)];
    return out;
}

double psd_random_test(const ModelParams& p, int samples, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_real_distribution<double> box(-1.0, 1.0);
    const int mdim = p.n + 1;
    double worst = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<std::size_t>(mdim)), z(static_cast<std::size_t>(mdim));
    for (int s = 0; s < samples; ++s) {
        double tot = 0.0;
        for (int i = 0; i < mdim; ++i) {
            u[static_cast<std::size_t>(i)] = -std::log(std::max(unif(rng), 1e-300));
            tot += u[static_cast<std::size_t>(i)];
        }
        for (int i = 0; i < mdim; ++i) u[static_cast<std::size_t>(i)] /= tot;  // Dirichlet(1), uniform on the simplex
        for (int i = 0; i < mdim; ++i) z[static_cast<std::size_t>(i)] = box(rng);
        std::vector<double> M = mobility(u, p);
        double q = 0.0;
        for (int i = 0; i < mdim; ++i)
            for (int j = 0; j < mdim; ++j)
                q += z[static_cast<std::size_t>(i)] * M[static_cast<std::size_t>(i * mdim + j)] *
                     z[static_cast<std::size_t>(j)];
        worst = std::min(worst, q);
    }
    return worst;
}

}  // namespace crossch
