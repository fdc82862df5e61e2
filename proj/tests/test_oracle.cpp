#include <doctest.h>

#include <cmath>
#include <random>

#include "crossch/model.hpp"
#include "crossch/oracle.hpp"

using namespace crossch;

namespace {

S2Problem random_problem(const Grid& g, int n, double eps, std::mt19937_64& rng, double scale) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    S2Problem prob;
    prob.grid = g;
    prob.n = n;
    prob.eps = eps;
    for (int i = 0; i < n; ++i) {
        ScalarField fi(g);
        for (double& x : fi.v) x = unif(rng);
        prob.f.push_back(fi);
    }
    return prob;
}

CompositionField interior_point(const Grid& g, int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.15, 0.35);
    CompositionField v(g, n);
    for (int c = 0; c < g.cell_count(); ++c) {
        double s = 0.0;
        for (int i = 1; i <= n; ++i) {
            v.u(i)[c] = unif(rng) / n;
            s += v.u(i)[c];
        }
        v.u(0)[c] = 1.0 - s;
    }
    return v;
}

}  // namespace

TEST_CASE("finite-difference error shrinks at second order") {
    std::mt19937_64 rng(200);
    Grid g = Grid::make_1d(4, 0.25);
    S2Problem prob = random_problem(g, 2, 1.0, rng, 1.0);
    CompositionField v = interior_point(g, 2, rng);

    const double e3 = fd_gradient_check(prob, v, 1e-3, 20, 5);
    const double e4 = fd_gradient_check(prob, v, 1e-4, 20, 5);
    const double e5 = fd_gradient_check(prob, v, 1e-5, 20, 5);
    CHECK(e5 < 1e-6);
    const double slope = std::log10(e3 / e4);  // decades per decade
    CHECK(slope == doctest::Approx(2.0).epsilon(0.15));
    CHECK(e4 > e5);  // still shrinking into the roundoff-limited regime
}

TEST_CASE("projected-gradient oracle finds the single-cell softmax optimum") {
    Grid g = Grid::make_1d(1, 1.0);
    S2Problem prob;
    prob.grid = g;
    prob.n = 2;
    prob.eps = 1.0;
    prob.f.assign(2, ScalarField(g));
    prob.f[0][0] = std::log(2.0);
    prob.f[1][0] = std::log(3.0);

    CompositionField oracle = brute_force_minimize(prob, CompositionField::uniform(g, 2), 200000, 1e-3);
    CHECK(oracle.u(0)[0] == doctest::Approx(1.0 / 6.0).epsilon(1e-5));
    CHECK(oracle.u(1)[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-5));
    CHECK(oracle.u(2)[0] == doctest::Approx(1.0 / 2.0).epsilon(1e-5));
}

TEST_CASE("mobility quadratic form stays nonnegative over random draws") {
    std::mt19937_64 rng(201);
    std::uniform_real_distribution<double> kdist(0.1, 5.0);
    ModelParams p(2, 1e-3, 1.0, 1e-3);
    for (int i = 0; i <= 2; ++i)
        for (int j = i + 1; j <= 2; ++j) p.set_K(i, j, kdist(rng));
    CHECK(psd_random_test(p, 1000, 99) >= -1e-12);
}

TEST_CASE("scalar reference: stationarity and entropy decay on its own trajectory") {
    Grid g = Grid::make_1d(12, 1.0 / 12);
    ModelParams p(1, 1e-3, 4.0, 1e-4);

    ScalarField half(g, 0.5);
    ScalarField next = scalar_ch_reference_step(half, p);
    CHECK(max_abs_diff(next, half) < 1e-9);

    std::mt19937_64 rng(202);
    std::uniform_real_distribution<double> unif(0.25, 0.75);
    ScalarField u1(g);
    for (double& x : u1.v) x = unif(rng);

    auto as_composition = [&](const ScalarField& v) {
        CompositionField u(g, 1);
        for (int c = 0; c < g.cell_count(); ++c) {
            u.u(1)[c] = v[c];
            u.u(0)[c] = 1.0 - v[c];
        }
        return u;
    };

    double e_prev = energy(as_composition(u1), p);
    for (int step = 0; step < 10; ++step) {
        u1 = scalar_ch_reference_step(u1, p);
        const double e = energy(as_composition(u1), p);
        CHECK(e <= e_prev + 1e-8 * (1.0 + std::fabs(e_prev)));
        e_prev = e;
        for (double x : u1.v) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
    }
}
