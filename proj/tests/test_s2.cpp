#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "crossch/entropy_min_s2.hpp"
#include "crossch/oracle.hpp"

using namespace crossch;

namespace {

S2Problem problem_from_raw(const Grid& g, int n, double eps,
                           const std::vector<std::vector<double>>& fvals) {
    S2Problem prob;
    prob.grid = g;
    prob.n = n;
    prob.eps = eps;
    for (int i = 0; i < n; ++i) {
        ScalarField fi(g);
        for (int c = 0; c < g.cell_count(); ++c) fi[c] = fvals[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
        prob.f.push_back(fi);
    }
    return prob;
}

S2Problem random_problem(const Grid& g, int n, double eps, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    std::vector<std::vector<double>> f(static_cast<std::size_t>(n),
                                       std::vector<double>(static_cast<std::size_t>(g.cell_count())));
    for (auto& fi : f)
        for (double& x : fi) x = unif(rng);
    return problem_from_raw(g, n, eps, f);
}

}  // namespace

TEST_CASE("single cell with f = (ln 2, ln 3) has the softmax solution") {
    Grid g = Grid::make_1d(1, 1.0);
    S2Problem prob = problem_from_raw(g, 2, 1.0, {{std::log(2.0)}, {std::log(3.0)}});
    CompositionField init = CompositionField::uniform(g, 2);
    S2Solution sol = minimize_F(prob, init);
    CHECK(sol.u.u(0)[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-10));
    CHECK(sol.u.u(1)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-10));
    CHECK(sol.u.u(2)[0] == doctest::Approx(1.0 / 2.0).epsilon(1e-10));
    CHECK(sol.residual <= 1e-9);
    CHECK(sol.delta_observed > 0.0);

    // The exact softmax point has zero optimality residual (no eps term on
    // one cell).
    CompositionField exact(g, 2);
    exact.u(0)[0] = 1.0 / 6.0;
    exact.u(1)[0] = 1.0 / 3.0;
    exact.u(2)[0] = 1.0 / 2.0;
    CHECK(optimality_residual(exact, prob) == doctest::Approx(0.0).epsilon(1e-14));

    // Gradient vanishes at the softmax point of the single-cell problem.
    auto grad = grad_F(exact, prob);
    for (const ScalarField& gi : grad)
        for (double x : gi.v) CHECK(x == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("zero forcing gives the uniform composition on any grid") {
    for (const Grid& g : {Grid::make_1d(7, 0.1), Grid::make_2d(4, 5, 0.2)}) {
        const std::vector<double> zeros(static_cast<std::size_t>(g.cell_count()), 0.0);
        S2Problem prob = problem_from_raw(g, 2, 0.3, {zeros, zeros});
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> unif(0.1, 0.4);
        CompositionField init(g, 2);
        for (int c = 0; c < g.cell_count(); ++c) {
            const double a = unif(rng), b = unif(rng);
            init.u(1)[c] = a;
            init.u(2)[c] = b;
            init.u(0)[c] = 1.0 - a - b;
        }
        S2Solution sol = minimize_F(prob, init);
        for (int i = 0; i <= 2; ++i)
            for (double x : sol.u.u(i).v) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    }
}

TEST_CASE("objective: uniform value, lower bound, forcing shift") {
    Grid g = Grid::make_1d(4, 0.25);  // |Omega| = 1
    const int n = 2;
    std::mt19937_64 rng(43);
    S2Problem zero = random_problem(g, n, 0.5, rng, 0.0);
    CompositionField uni = CompositionField::uniform(g, n);
    CHECK(objective_F(uni, zero) == doctest::Approx(-std::log(3.0)).epsilon(1e-12));

    // F >= -C (1 + sum ||f_i||_inf) with C = |Omega| max(n,1), over random
    // admissible fields.
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int rep = 0; rep < 200; ++rep) {
        S2Problem prob = random_problem(g, n, 0.5, rng, 3.0);
        double fsum = 0.0;
        for (const ScalarField& fi : prob.f) fsum += max_abs(fi);
        CompositionField v(g, n);
        for (int c = 0; c < 4; ++c) {
            double e0 = unif(rng), e1 = unif(rng), e2 = unif(rng);
            const double s = e0 + e1 + e2;
            v.u(0)[c] = e0 / s;
            v.u(1)[c] = e1 / s;
            v.u(2)[c] = e2 / s;
        }
        const double C = g.measure() * std::max(n, 1);
        CHECK(objective_F(v, prob) >= -C * (1.0 + fsum) - 1e-12);
    }

    // Adding a constant c to every f_i lowers F by c * int sum_i v_i.
    S2Problem prob = random_problem(g, n, 0.5, rng, 1.0);
    S2Problem shifted = prob;
    const double c = 0.7;
    for (ScalarField& fi : shifted.f)
        for (double& x : fi.v) x += c;
    CompositionField v(g, n);
    for (int cc = 0; cc < 4; ++cc) {
        v.u(1)[cc] = 0.2 + 0.05 * cc;
        v.u(2)[cc] = 0.3;
        v.u(0)[cc] = 1.0 - v.u(1)[cc] - v.u(2)[cc];
    }
    double mass = 0.0;
    for (int i = 1; i <= n; ++i) mass += integrate(v.u(i));
    CHECK(objective_F(v, shifted) ==
          doctest::Approx(objective_F(v, prob) - c * mass).epsilon(1e-12));

    CompositionField neg = v;
    neg.u(1)[0] = -0.01;
    CHECK_THROWS_AS(objective_F(neg, prob), std::domain_error);
}

TEST_CASE("gradient matches finite differences of the objective") {
    std::mt19937_64 rng(44);
    Grid g = Grid::make_1d(4, 0.25);
    for (int rep = 0; rep < 5; ++rep) {
        S2Problem prob = random_problem(g, 2, 1.0, rng, 1.0);
        CompositionField v = CompositionField::uniform(g, 2);
        // Random interior point.
        std::uniform_real_distribution<double> unif(0.15, 0.35);
        for (int c = 0; c < 4; ++c) {
            v.u(1)[c] = unif(rng);
            v.u(2)[c] = unif(rng);
            v.u(0)[c] = 1.0 - v.u(1)[c] - v.u(2)[c];
        }
        CHECK(fd_gradient_check(prob, v, 1e-5, 20, 1000 + static_cast<unsigned>(rep)) < 1e-6);
    }

    // At the uniform point with zero forcing the gradient vanishes; compare
    // the finite difference absolutely.
    S2Problem zero = random_problem(g, 2, 1.0, rng, 0.0);
    CompositionField uni = CompositionField::uniform(g, 2);
    CHECK(fd_gradient_check(zero, uni, 1e-5, 10, 7) < 1e-8);
}

TEST_CASE("production minimizer agrees with the projected-gradient oracle") {
    std::mt19937_64 rng(45);
    Grid g = Grid::make_1d(4, 0.25);
    for (int rep = 0; rep < 3; ++rep) {
        S2Problem prob = random_problem(g, 1, 1.0, rng, 1.0);
        CompositionField init = CompositionField::uniform(g, 1);
        S2Solution sol = minimize_F(prob, init);
        CompositionField oracle = brute_force_minimize(prob, init, 100000, 1e-3);
        CHECK(sol.u.max_abs_diff_to(oracle) < 1e-6);
        CHECK(objective_F(oracle, prob) >= objective_F(sol.u, prob) - 1e-8);
        CHECK(optimality_residual(oracle, prob) <= 1e-4);
    }
}

TEST_CASE("descent, uniqueness and the comparison identity") {
    std::mt19937_64 rng(46);
    Grid g = Grid::make_1d(6, 1.0 / 6);
    S2Problem prob = random_problem(g, 2, 0.8, rng, 1.5);

    CompositionField init_a = CompositionField::uniform(g, 2);
    CompositionField init_b(g, 2);
    std::uniform_real_distribution<double> unif(0.1, 0.4);
    for (int c = 0; c < 6; ++c) {
        init_b.u(1)[c] = unif(rng);
        init_b.u(2)[c] = unif(rng);
        init_b.u(0)[c] = 1.0 - init_b.u(1)[c] - init_b.u(2)[c];
    }

    S2Options opts;
    S2Solution a = minimize_F(prob, init_a, opts);
    S2Solution b = minimize_F(prob, init_b, opts);

    for (std::size_t k = 1; k < a.objective_history.size(); ++k)
        CHECK(a.objective_history[k] <= a.objective_history[k - 1] + 1e-14);

    CHECK(a.u.max_abs_diff_to(b.u) <= 10.0 * opts.tol);

    // int sum_i (ln u_i - ln v_i)(u_i - v_i) + eps |grad(u0 - v0)|^2 at two
    // solves of the same problem collapses to zero.
    double ident = 0.0;
    for (int i = 0; i <= 2; ++i) {
        ScalarField d(g);
        for (int c = 0; c < 6; ++c) {
            const double du = a.u.u(i)[c], dv = b.u.u(i)[c];
            ident += (std::log(du) - std::log(dv)) * (du - dv) * g.cell_volume();
            d[c] = du - dv;
        }
        if (i == 0) {
            FaceField gd = gradient(d);
            ident += prob.eps * inner_faces(gd, gd);
        }
    }
    CHECK(std::fabs(ident) <= 1e-10);
}

TEST_CASE("positivity floor does not collapse across resampled forcings of fixed norm") {
    std::mt19937_64 rng(47);
    Grid g = Grid::make_1d(8, 0.125);
    ModelParams p(2, 1e-2, 4.0, 1e-3);
    ScalarField u0_prev(g, 1.0 / 3.0);

    const double target_norm = 2.0;
    std::vector<double> deltas;
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (int rep = 0; rep < 12; ++rep) {
        std::vector<ScalarField> w(2, ScalarField(g));
        double nrm_sq = 0.0;
        for (ScalarField& wi : w) {
            for (double& x : wi.v) x = unif(rng);
            nrm_sq += inner_h2(wi, wi);
        }
        const double scale = target_norm / std::sqrt(nrm_sq);
        for (ScalarField& wi : w)
            for (double& x : wi.v) x *= scale;
        S2Problem prob = S2Problem::make(w, u0_prev, p);
        S2Solution sol = minimize_F(prob, CompositionField::uniform(g, 2));
        deltas.push_back(sol.delta_observed);
        CHECK(sol.delta_observed > 0.0);
    }
    const double dmin = *std::min_element(deltas.begin(), deltas.end());
    const double dmax = *std::max_element(deltas.begin(), deltas.end());
    CHECK(dmax <= 10.0 * dmin);
}

TEST_CASE("solution map is continuous in the forcing") {
    std::mt19937_64 rng(48);
    Grid g = Grid::make_1d(8, 0.125);
    ModelParams p(1, 1e-2, 4.0, 1e-3);
    ScalarField u0_prev(g, 0.5);

    std::vector<ScalarField> w(1, ScalarField(g));
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    for (double& x : w[0].v) x = unif(rng);
    S2Solution base = minimize_F(S2Problem::make(w, u0_prev, p), CompositionField::uniform(g, 1));

    ScalarField dir(g);
    for (double& x : dir.v) x = unif(rng);
    const double dirnorm = std::sqrt(inner_h2(dir, dir));

    std::vector<double> changes;
    for (double eta : {1e-1, 1e-2, 1e-3}) {
        std::vector<ScalarField> wp = w;
        for (int c = 0; c < g.cell_count(); ++c) wp[0][c] += eta / dirnorm * dir[c];
        S2Solution pert = minimize_F(S2Problem::make(wp, u0_prev, p), CompositionField::uniform(g, 1));
        changes.push_back(pert.u.max_abs_diff_to(base.u));
    }
    CHECK(changes[1] < changes[0]);
    CHECK(changes[2] < changes[1]);
    CHECK(changes[2] < 1e-2);
}

TEST_CASE("input contracts") {
    Grid g = Grid::make_1d(3, 0.3);
    std::mt19937_64 rng(49);
    S2Problem prob = random_problem(g, 1, 0.5, rng, 1.0);
    CompositionField boundary(g, 1);
    for (int c = 0; c < 3; ++c) {
        boundary.u(1)[c] = 0.0;
        boundary.u(0)[c] = 1.0;
    }
    CHECK_THROWS_AS(minimize_F(prob, boundary), std::invalid_argument);
    CHECK_THROWS_AS(grad_F(boundary, prob), std::domain_error);
}
