#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "crossch/config.hpp"
#include "crossch/io.hpp"

using namespace crossch;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("minimal config picks up the documented defaults") {
    RunConfig cfg = parse_config("[model]\nn = 1\n");
    CHECK(cfg.params.n == 1);
    CHECK(cfg.params.eps == doctest::Approx(1e-3));
    CHECK(cfg.params.beta == doctest::Approx(10.0));
    CHECK(cfg.params.K_at(0, 1) == doctest::Approx(1.0));
    CHECK(cfg.params.tau == doctest::Approx(1e-4));
    CHECK(cfg.dims == 1);
    CHECK(cfg.nx == 64);
    CHECK(cfg.h == doctest::Approx(1.0 / 64.0));
    CHECK(cfg.preset == "uniform-perturbed");
    CHECK(cfg.final_time() == doctest::Approx(100.0 * cfg.params.tau));
}

TEST_CASE("config errors carry the field name or line number") {
    CHECK_THROWS_WITH_AS(parse_config("[model]\nn = 1\neps = -1\n"), "eps: must be > 0",
                         ConfigError);
    CHECK_THROWS_AS(parse_config("[model]\nn = 1\nK_01 = 0\n"), ConfigError);
    try {
        parse_config("[model]\nn = 1\nK_01 = 0\n");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("K_01") != std::string::npos);
        CHECK(std::string(e.what()).find("positive") != std::string::npos);
    }
    try {
        parse_config("[model]\nn = 1\n\nwhatever = 3\n");
    } catch (const ConfigError& e) {
        CHECK(e.line == 4);
        CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("stray = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[nope]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[ic]\npreset = bogus\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[grid]\ndims = 1\n[ic]\npreset = two-blob\n"), ConfigError);
}

TEST_CASE("render() round-trips through the parser") {
    RunConfig cfg = parse_config(
        "[model]\nn = 2\neps = 2e-3\nbeta = 7\nK_01 = 1.5\nK_02 = 0.5\nK_12 = 2.5\n"
        "[grid]\ndims = 2\nnx = 8\nny = 6\nh = 0.125\n"
        "[time]\ntau = 1e-5\nt_max = 1e-3\n"
        "[ic]\npreset = two-blob\nseed = 9\n");
    RunConfig again = parse_config(cfg.render());
    CHECK(again.render() == cfg.render());
    CHECK(again.params.K_at(1, 2) == doctest::Approx(2.5));
    CHECK(again.ny == 6);
}

TEST_CASE("initial conditions: determinism, presets, projection") {
    Grid g = Grid::make_1d(32, 1.0 / 32);
    ModelParams p(2, 1e-3, 10.0, 1e-5);

    CompositionField a = initial_condition("uniform-perturbed", g, p, 5, 0.01, 0.0);
    CompositionField b = initial_condition("uniform-perturbed", g, p, 5, 0.01, 0.0);
    CHECK(a.max_abs_diff_to(b) == 0.0);  // bitwise reproducible
    CompositionField c = initial_condition("uniform-perturbed", g, p, 6, 0.01, 0.0);
    CHECK(c.max_abs_diff_to(a) > 0.0);

    CompositionField flat = initial_condition("uniform-perturbed", g, p, 5, 0.0, 0.0);
    for (int i = 0; i <= 2; ++i)
        for (double x : flat.u(i).v) CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

    CompositionField tanh_ic = initial_condition("tanh-interface", g, p, 0, 0.0, 0.0);
    CHECK(tanh_ic.u(0)[g.nx / 2] == doctest::Approx(0.5));  // midline by symmetry
    CHECK(tanh_ic.simplex_error() <= 1e-15);

    Grid g2 = Grid::make_2d(16, 16, 1.0 / 16);
    CompositionField blobs = initial_condition("two-blob", g2, p, 0, 0.0, 0.0);
    CHECK(blobs.simplex_error() <= 1e-15);
    CHECK(blobs.min_value() >= 0.0);
    CHECK_THROWS_AS(initial_condition("two-blob", g, p, 0, 0.0, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(initial_condition("bogus", g, p, 0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("snapshot round-trip is bitwise") {
    Grid g = Grid::make_2d(5, 3, 0.2);
    std::mt19937_64 rng(55);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    CompositionField u(g, 2);
    for (int cidx = 0; cidx < g.cell_count(); ++cidx) {
        double e0 = unif(rng), e1 = unif(rng), e2 = unif(rng);
        const double s = e0 + e1 + e2;
        u.u(0)[cidx] = e0 / s;
        u.u(1)[cidx] = e1 / s;
        u.u(2)[cidx] = e2 / s;
    }
    const std::string path = tmp_path("crossch_snap_test.csv");
    write_snapshot(path, 0.125, u);
    Snapshot snap = read_snapshot(path);
    CHECK(snap.time == 0.125);
    CHECK(snap.u.n == 2);
    CHECK(snap.u.grid == g);
    for (int i = 0; i <= 2; ++i)
        for (int cidx = 0; cidx < g.cell_count(); ++cidx)
            CHECK(snap.u.u(i)[cidx] == u.u(i)[cidx]);  // exact, 17 significant digits
    std::remove(path.c_str());
}

TEST_CASE("entropy log and summary reflect a short accepted run") {
    Grid g = Grid::make_1d(16, 1.0 / 16);
    ModelParams p(2, 1e-3, 10.0, 1e-5);
    StepConfig scfg;
    CompositionField u0 = initial_condition("uniform-perturbed", g, p, 1, 0.01, 0.0);
    Trajectory traj = run(u0, p, scfg, 10.0 * p.tau);

    const std::string log_path = tmp_path("crossch_entropy_test.csv");
    write_entropy_log(log_path, traj, p);
    std::string text = slurp(log_path);
    CHECK(text.find("step,time,E,E_conv,E_conc,mass_0,mass_1,mass_2,drift_1,drift_2") == 0);
    // Header plus step-0 row plus one row per step.
    CHECK(std::count(text.begin(), text.end(), '\n') == 2 + 10);

    RunSummary s = summarize(traj);
    CHECK(s.completed);
    CHECK(s.steps == 10);
    CHECK(s.positivity_ok);
    CHECK(s.mass_identity_ok);
    CHECK(s.entropy_decay_ok);
    CHECK(s.all_ok());

    const std::string sum_path = tmp_path("crossch_summary_test.json");
    write_summary(sum_path, s, "config-echo");
    std::string j = slurp(sum_path);
    CHECK(j.find("\"all_ok\": true") != std::string::npos);
    std::remove(log_path.c_str());
    std::remove(sum_path.c_str());

    // Mass column agrees with quadrature of the matching snapshot.
    const std::string snap_path = tmp_path("crossch_snap_mass.csv");
    write_snapshot(snap_path, traj.times.back(), traj.states.back());
    Snapshot snap = read_snapshot(snap_path);
    for (int i = 0; i <= 2; ++i)
        CHECK(integrate(snap.u.u(i)) ==
              doctest::Approx(traj.reports.back().mass.mass[static_cast<std::size_t>(i)])
                  .epsilon(1e-12));
    std::remove(snap_path.c_str());
}
