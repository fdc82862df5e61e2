#include <doctest.h>

#include <cmath>
#include <random>

#include "crossch/elliptic_s1.hpp"
#include "crossch/solver_util.hpp"

using namespace crossch;

namespace {

CompositionField random_simplex_field(const Grid& g, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    CompositionField u(g, n);
    for (int c = 0; c < g.cell_count(); ++c) {
        double s = 0.0;
        std::vector<double> e(static_cast<std::size_t>(n + 1));
        for (double& x : e) {
            x = -std::log(std::max(unif(rng), 1e-300));
            s += x;
        }
        for (int i = 0; i <= n; ++i) u.u(i)[c] = e[static_cast<std::size_t>(i)] / s;
    }
    return u;
}

std::vector<double> random_stack(int m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> x(static_cast<std::size_t>(m));
    for (double& t : x) t = unif(rng);
    return x;
}

// Jacobi eigenvalue sweep for small symmetric matrices.
std::vector<double> sym_eigenvalues(std::vector<double> A, int n) {
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) off += std::fabs(A[static_cast<std::size_t>(i * n + j)]);
        if (off < 1e-14) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = A[static_cast<std::size_t>(p * n + q)];
                if (std::fabs(apq) < 1e-300) continue;
                const double app = A[static_cast<std::size_t>(p * n + p)];
                const double aqq = A[static_cast<std::size_t>(q * n + q)];
                const double theta = 0.5 * std::atan2(2.0 * apq, aqq - app);
                const double c = std::cos(theta), s = std::sin(theta);
                for (int k = 0; k < n; ++k) {
                    const double akp = A[static_cast<std::size_t>(k * n + p)];
                    const double akq = A[static_cast<std::size_t>(k * n + q)];
                    A[static_cast<std::size_t>(k * n + p)] = c * akp - s * akq;
                    A[static_cast<std::size_t>(k * n + q)] = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = A[static_cast<std::size_t>(p * n + k)];
                    const double aqk = A[static_cast<std::size_t>(q * n + k)];
                    A[static_cast<std::size_t>(p * n + k)] = c * apk - s * aqk;
                    A[static_cast<std::size_t>(q * n + k)] = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> ev(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = A[static_cast<std::size_t>(i * n + i)];
    return ev;
}

}  // namespace

TEST_CASE("zero right hand side gives the zero solution exactly") {
    std::mt19937_64 rng(100);
    Grid g = Grid::make_1d(12, 1.0 / 12);
    ModelParams p(2, 1e-3, 10.0, 1e-3);
    CompositionField u = random_simplex_field(g, 2, rng);
    S1System sys = assemble_s1(u, u, p);
    for (double b : sys.rhs) CHECK(b == 0.0);
    S1Solution sol = solve_s1(sys);
    for (const ScalarField& w : sol.wbar)
        for (double x : w.v) CHECK(x == 0.0);
}

TEST_CASE("single cell, n = 1: the system collapses to tau^2 scaling") {
    Grid g = Grid::make_1d(1, 1.0);
    ModelParams p(1, 1e-3, 1.0, 0.05);
    CompositionField ut(g, 1), up(g, 1);
    ut.u(1)[0] = 0.3;
    ut.u(0)[0] = 0.7;
    up.u(1)[0] = 0.55;
    up.u(0)[0] = 0.45;
    S1Solution sol = solve_s1(assemble_s1(ut, up, p));
    CHECK(sol.wbar[0][0] == doctest::Approx(-(0.3 - 0.55) / (0.05 * 0.05)).epsilon(1e-12));
}

TEST_CASE("operator is symmetric and coercive in the stacked H2 norm") {
    std::mt19937_64 rng(101);
    Grid g = Grid::make_2d(4, 3, 0.25);
    ModelParams p(2, 1e-3, 5.0, 2e-3);
    CompositionField ut = random_simplex_field(g, 2, rng);
    CompositionField up = random_simplex_field(g, 2, rng);
    S1System sys = assemble_s1(ut, up, p);

    for (int rep = 0; rep < 25; ++rep) {
        auto x = random_stack(sys.size(), rng);
        auto y = random_stack(sys.size(), rng);
        const double axy = sys.form(x, y);
        const double ayx = sys.form(y, x);
        CHECK(axy == doctest::Approx(ayx).epsilon(1e-10));
        const double quad = sys.form(x, x);
        CHECK(quad >= p.tau * sys.h2_norm_sq(x) * (1.0 - 1e-12));
    }
}

TEST_CASE("per-cell G+H spectra stay inside [0, (n+1) Kmax]") {
    std::mt19937_64 rng(102);
    std::uniform_real_distribution<double> kdist(0.2, 3.0);
    for (int n : {1, 2, 3}) {
        ModelParams p(n, 1e-3, 1.0, 1e-3);
        for (int i = 0; i <= n; ++i)
            for (int j = i + 1; j <= n; ++j) p.set_K(i, j, kdist(rng));
        Grid g = Grid::make_1d(16, 1.0 / 16);
        CompositionField u = random_simplex_field(g, n, rng);
        S1System sys = assemble_s1(u, u, p);
        const double bound = (n + 1) * p.K_max();
        for (int c = 0; c < g.cell_count(); ++c) {
            auto M = sys.coeffs.cell_matrix(c);
            for (double ev : sym_eigenvalues(M, n)) {
                CHECK(ev >= -1e-12);
                CHECK(ev <= bound + 1e-12);
            }
        }
    }
}

TEST_CASE("PCG and dense Cholesky agree; both meet the residual contract") {
    std::mt19937_64 rng(103);
    Grid g = Grid::make_1d(24, 1.0 / 24);
    // Solution agreement is limited by ||A^{-1}|| ~ 1/tau times the solver
    // residuals, so the cross-check runs at a tau where that bound is tight.
    ModelParams p(2, 1e-3, 10.0, 0.3);
    CompositionField ut = random_simplex_field(g, 2, rng);
    CompositionField up = random_simplex_field(g, 2, rng);
    S1System sys = assemble_s1(ut, up, p);

    S1Options iterative;
    iterative.allow_dense_fallback = false;
    S1Solution it_sol = solve_s1(sys, iterative);
    CHECK(it_sol.rel_residual <= iterative.tol);
    CHECK_FALSE(it_sol.used_dense);

    S1Options dense;
    dense.force_dense = true;
    S1Solution d_sol = solve_s1(sys, dense);
    CHECK(d_sol.used_dense);
    CHECK(d_sol.rel_residual <= dense.tol);

    for (int i = 0; i < 2; ++i)
        CHECK(max_abs_diff(it_sol.wbar[static_cast<std::size_t>(i)],
                           d_sol.wbar[static_cast<std::size_t>(i)]) < 1e-8);
}

TEST_CASE("solve obeys the a-priori bound and the energy identity") {
    std::mt19937_64 rng(104);
    Grid g = Grid::make_1d(16, 1.0 / 16);
    ModelParams p(2, 1e-3, 10.0, 5e-2);
    CompositionField ut = random_simplex_field(g, 2, rng);
    CompositionField up = random_simplex_field(g, 2, rng);
    S1System sys = assemble_s1(ut, up, p);
    S1Solution sol = solve_s1(sys);

    // tau ||w||_H2^2 <= (1/tau) ||ut - up||_L2 ||w||_H2, i.e.
    // ||w||_H2 <= ||ut - up||_L2 / tau^2 <= 2 sqrt(n |Omega|) / tau^2.
    double diff_sq = 0.0;
    for (int i = 1; i <= 2; ++i) {
        ScalarField d(g);
        for (int c = 0; c < g.cell_count(); ++c) d[c] = ut.u(i)[c] - up.u(i)[c];
        diff_sq += inner_l2(d, d);
    }
    const double diff = std::sqrt(diff_sq);
    CHECK(sol.h2_norm <= diff / (p.tau * p.tau) * (1.0 + 1e-10));
    CHECK(sol.h2_norm <= 2.0 * std::sqrt(2.0 * g.measure()) / (p.tau * p.tau));
}

TEST_CASE("map is Lipschitz-stable under small composition perturbations") {
    std::mt19937_64 rng(105);
    Grid g = Grid::make_1d(12, 1.0 / 12);
    ModelParams p(2, 1e-3, 5.0, 1e-1);
    CompositionField up = random_simplex_field(g, 2, rng);
    CompositionField base = random_simplex_field(g, 2, rng);

    auto solve_at = [&](const CompositionField& u) {
        return solve_s1(assemble_s1(u, up, p));
    };
    S1Solution w_base = solve_at(base);

    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::vector<double> ratios;
    for (double eta : {1e-2, 1e-3, 1e-4}) {
        CompositionField pert = base;
        for (int c = 0; c < g.cell_count(); ++c) {
            double d1 = eta * unif(rng), d2 = eta * unif(rng);
            // Stay inside the simplex: shrink toward the uniform point.
            pert.u(1)[c] = std::min(0.98, std::max(0.01, base.u(1)[c] + d1));
            pert.u(2)[c] = std::min(0.98, std::max(0.01, base.u(2)[c] + d2));
            pert.u(0)[c] = 1.0 - pert.u(1)[c] - pert.u(2)[c];
        }
        S1Solution w_pert = solve_at(pert);
        double wdiff_sq = 0.0;
        for (int i = 0; i < 2; ++i) {
            ScalarField d(g);
            for (int c = 0; c < g.cell_count(); ++c)
                d[c] = w_pert.wbar[static_cast<std::size_t>(i)][c] -
                       w_base.wbar[static_cast<std::size_t>(i)][c];
            wdiff_sq += inner_h2(d, d);
        }
        const double udiff = pert.max_abs_diff_to(base);
        if (udiff > 0.0) ratios.push_back(std::sqrt(wdiff_sq) / (2.0 * udiff));
    }
    REQUIRE(ratios.size() == 3);
    // The measured Lipschitz quotient stays finite and of one scale as the
    // perturbation shrinks (no blow-up as eta -> 0).
    const double base_ratio = ratios.front();
    for (double r : ratios) {
        CHECK(std::isfinite(r));
        CHECK(r <= 10.0 * base_ratio + 1e-9);
    }
}

TEST_CASE("assembly rejects compositions outside the box") {
    Grid g = Grid::make_1d(4, 0.25);
    ModelParams p(1, 1e-3, 1.0, 1e-3);
    CompositionField u = CompositionField::uniform(g, 1);
    CompositionField bad = u;
    bad.u(1)[0] = 1.5;
    CHECK_THROWS_AS(assemble_s1(bad, u, p), std::domain_error);
    CHECK_THROWS_AS(assemble_s1(u, bad, p), std::domain_error);
}
