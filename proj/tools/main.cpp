// crossch: structure-preserving simulator for an (n+1)-species
// cross-diffusion Cahn-Hilliard mixture with degenerate mobility.
//
// Subcommands: run (time integration with invariant checks),
// verify (independent oracle suite), refine (tau-refinement study),
// plot (gnuplot-ready extracts from a run directory).
//
// Exit codes: 0 ok, 1 invariant failure, 2 solver failure, 3 config error.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "crossch/config.hpp"
#include "crossch/elliptic_s1.hpp"
#include "crossch/io.hpp"
#include "crossch/oracle.hpp"
#include "crossch/refine.hpp"
#include "crossch/stepper.hpp"

namespace fs = std::filesystem;
using namespace crossch;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvariant = 1;
constexpr int kExitSolver = 2;
constexpr int kExitConfig = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    unsigned seed = 0;
    bool seed_set = false;
    double tau = 0.0;
    int levels = 0;
};

RunConfig make_config(const CommonFlags& flags) {
    RunConfig cfg;
    if (!flags.config_path.empty()) cfg = load_config(flags.config_path);
    if (!flags.out_dir.empty()) cfg.out_dir = flags.out_dir;
    if (flags.seed_set) cfg.seed = flags.seed;
    if (flags.tau > 0.0) cfg.params.tau = flags.tau;
    return cfg;
}

void write_run_outputs(const fs::path& dir, const RunConfig& cfg, const Trajectory& traj,
                       const std::string& note) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "config.ini");
        out << cfg.render();
    }
    write_entropy_log((dir / "entropy.csv").string(), traj, cfg.params);
    for (std::size_t p = 0; p < traj.states.size(); ++p) {
        const bool last = p + 1 == traj.states.size();
        if (p % static_cast<std::size_t>(cfg.snapshot_stride) != 0 && !last) continue;
        char name[64];
        std::snprintf(name, sizeof(name), "snapshot_%06zu.csv", p);
        write_snapshot((dir / name).string(), traj.times[p], traj.states[p]);
    }
    RunSummary summary = summarize(traj);
    write_summary((dir / "summary.json").string(), summary, cfg.render(), note);
}

int cmd_run(const CommonFlags& flags) {
    RunConfig cfg = make_config(flags);
    const Grid grid = cfg.grid();
    CompositionField u0 =
        initial_condition(cfg.preset, grid, cfg.params, cfg.seed, cfg.amplitude, cfg.width);

    const fs::path dir(cfg.out_dir);
    Trajectory traj;
    try {
        traj = run(u0, cfg.params, cfg.step, cfg.final_time());
    } catch (const RunFailure& f) {
        std::cerr << "solver failure: " << f.what() << "\n";
        write_run_outputs(dir, cfg, f.partial, f.what());
        return kExitSolver;
    }
    write_run_outputs(dir, cfg, traj, "");
    RunSummary summary = summarize(traj);
    std::printf("completed %d steps to t = %.6g; outputs in %s\n", summary.steps,
                traj.times.back(), dir.string().c_str());
    std::printf("invariants: positivity %s (min %.3e), entropy decay %s (worst %.3e), "
                "mass identity %s (worst %.3e)\n",
                summary.positivity_ok ? "ok" : "VIOLATED", summary.min_delta,
                summary.entropy_decay_ok ? "ok" : "VIOLATED", summary.max_entropy_violation,
                summary.mass_identity_ok ? "ok" : "VIOLATED", summary.max_mass_identity_err);
    return summary.all_ok() ? kExitOk : kExitInvariant;
}

int cmd_verify() {
    int failures = 0;
    auto report = [&](const char* name, bool ok, const std::string& detail) {
        std::printf("[%s] %-26s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
        if (!ok) ++failures;
    };
    char buf[256];

    {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> kdist(0.1, 5.0);
        double worst = 0.0;
        for (int n : {1, 2, 3}) {
            ModelParams p(n, 1e-3, 1.0, 1e-3);
            for (int i = 0; i <= n; ++i)
                for (int j = i + 1; j <= n; ++j) p.set_K(i, j, kdist(rng));
            worst = std::min(worst, psd_random_test(p, 2000, 11 + static_cast<unsigned>(n)));
        }
        std::snprintf(buf, sizeof(buf), "min z'Mz = %.3e (>= -1e-12)", worst);
        report("mobility-psd", worst >= -1e-12, buf);
    }

    {
        Grid g = Grid::make_1d(4, 0.25);
        std::mt19937_64 rng(8);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        S2Problem prob;
        prob.grid = g;
        prob.n = 2;
        prob.eps = 1.0;
        prob.f.assign(2, ScalarField(g));
        for (auto& fi : prob.f)
            for (double& x : fi.v) x = unif(rng);
        CompositionField v = CompositionField::uniform(g, 2);
        const double err = fd_gradient_check(prob, v, 1e-5, 20, 3);
        std::snprintf(buf, sizeof(buf), "worst guarded rel err = %.3e (< 1e-6)", err);
        report("s2-gradient-fd", err < 1e-6, buf);

        S2Solution sol = minimize_F(prob, v);
        CompositionField oracle = brute_force_minimize(prob, v, 100000, 1e-3);
        const double gap = sol.u.max_abs_diff_to(oracle);
        std::snprintf(buf, sizeof(buf), "Linf gap = %.3e (< 1e-6), residual = %.3e (<= 1e-9)", gap,
                      sol.residual);
        report("s2-oracle-agreement", gap < 1e-6 && sol.residual <= 1e-9, buf);
    }

    {
        Grid g = Grid::make_1d(16, 1.0 / 16);
        ModelParams p(1, 1e-3, 10.0, 1e-4);
        StepConfig cfg;
        cfg.newton_tol = 1e-10;
        std::mt19937_64 rng(9);
        std::uniform_real_distribution<double> unif(0.25, 0.75);
        CompositionField u(g, 1);
        ScalarField u1(g);
        for (int c = 0; c < 16; ++c) {
            u1[c] = unif(rng);
            u.u(1)[c] = u1[c];
            u.u(0)[c] = 1.0 - u1[c];
        }
        double worst = 0.0;
        bool ok = true;
        try {
            for (int step = 0; step < 5; ++step) {
                StepResult r = fixed_point_step(u, p, cfg);
                ScalarField ref = scalar_ch_reference_step(u1, p, 1e-10);
                worst = std::max(worst, max_abs_diff(r.u_next.u(1), ref));
                u = r.u_next;
                u1 = ref;
            }
        } catch (const std::exception&) {
            ok = false;
        }
        std::snprintf(buf, sizeof(buf), "max per-step gap = %.3e (<= 1e-8)", worst);
        report("scalar-reference", ok && worst <= 1e-8, buf);
    }

    {
        std::mt19937_64 rng(10);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Grid g = Grid::make_1d(24, 1.0 / 24);
        ModelParams p(2, 1e-3, 10.0, 1e-4);
        CompositionField a(g, 2), b(g, 2);
        for (int c = 0; c < 24; ++c) {
            double e0 = unif(rng), e1 = unif(rng), e2 = unif(rng);
            double s = e0 + e1 + e2;
            a.u(0)[c] = e0 / s;
            a.u(1)[c] = e1 / s;
            a.u(2)[c] = e2 / s;
            e0 = unif(rng);
            e1 = unif(rng);
            e2 = unif(rng);
            s = e0 + e1 + e2;
            b.u(0)[c] = e0 / s;
            b.u(1)[c] = e1 / s;
            b.u(2)[c] = e2 / s;
        }
        S1Solution zero = solve_s1(assemble_s1(a, a, p));
        double zmax = 0.0;
        for (const ScalarField& w : zero.wbar) zmax = std::max(zmax, max_abs(w));
        S1Solution sol = solve_s1(assemble_s1(a, b, p));
        std::snprintf(buf, sizeof(buf), "zero-rhs |w| = %.1e (= 0), residual = %.3e (<= 1e-10)",
                      zmax, sol.rel_residual);
        report("s1-contract", zmax == 0.0 && sol.rel_residual <= 1e-10, buf);
    }

    std::printf(failures == 0 ? "verify: all oracle checks passed\n"
                              : "verify: %d oracle checks FAILED\n",
                failures);
    return failures == 0 ? kExitOk : kExitInvariant;
}

int cmd_refine(const CommonFlags& flags) {
    RunConfig cfg = make_config(flags);
    const int levels = flags.levels > 0 ? flags.levels : 3;
    RefinementReport rep = refinement_study(cfg, levels);

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);
    write_refinement_csv((dir / "refinement.csv").string(), rep);
    write_refinement_plot_data((dir / "refinement.dat").string(), rep);

    for (std::size_t l = 0; l < rep.taus.size(); ++l)
        std::printf("level %zu: tau = %.6g, %d steps%s\n", l, rep.taus[l], rep.steps[l],
                    l < rep.gaps.size()
                        ? (", gap to next = " + std::to_string(rep.gaps[l])).c_str()
                        : "");
    for (std::size_t l = 0; l < rep.ratios.size(); ++l)
        std::printf("ratio %zu: %.4f (observed order %.2f)\n", l, rep.ratios[l], rep.alphas[l]);
    if (rep.partial) {
        std::cerr << "refinement aborted: " << rep.failure << "\n";
        return kExitSolver;
    }
    return kExitOk;
}

int cmd_plot(const CommonFlags& flags) {
    const fs::path dir(flags.out_dir.empty() ? "out" : flags.out_dir);
    const fs::path entropy = dir / "entropy.csv";
    if (!fs::exists(entropy)) {
        std::cerr << "plot: no entropy.csv under " << dir << "\n";
        return kExitConfig;
    }
    const fs::path plots = dir / "plots";
    fs::create_directories(plots);

    // Space-separated extract of the entropy log for gnuplot.
    {
        std::ifstream in(entropy);
        std::ofstream out(plots / "entropy.dat");
        std::string line;
        bool header = true;
        while (std::getline(in, line)) {
            for (char& ch : line)
                if (ch == ',') ch = ' ';
            if (header) {
                out << "# " << line << "\n";
                header = false;
            } else {
                out << line << "\n";
            }
        }
    }
    {
        std::ofstream gp(plots / "entropy.gp");
        gp << "set terminal pngcairo size 900,600\n";
        gp << "set output 'entropy.png'\n";
        gp << "set xlabel 'time'\n";
        gp << "set ylabel 'energy'\n";
        gp << "plot 'entropy.dat' using 2:3 with lines title 'E (lagged)', \\\n";
        gp << "     'entropy.dat' using 2:4 with lines title 'E_conv', \\\n";
        gp << "     'entropy.dat' using 2:5 with lines title 'E_conc'\n";
    }
    std::printf("wrote %s and %s\n", (plots / "entropy.dat").string().c_str(),
                (plots / "entropy.gp").string().c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cross-diffusion Cahn-Hilliard simulator"};
    app.require_subcommand(1);

    CommonFlags flags;
    auto add_common = [&](CLI::App* sub, bool with_levels) {
        sub->add_option("--config", flags.config_path, "configuration file");
        sub->add_option("--out", flags.out_dir, "output directory");
        sub->add_option("--seed", flags.seed, "initial-condition seed")
            ->each([&](const std::string&) { flags.seed_set = true; });
        sub->add_option("--tau", flags.tau, "time step override");
        if (with_levels) sub->add_option("--levels", flags.levels, "number of tau halvings");
    };

    CLI::App* run_cmd = app.add_subcommand("run", "integrate and emit CSV outputs");
    add_common(run_cmd, false);
    CLI::App* verify_cmd = app.add_subcommand("verify", "run the independent oracle suite");
    CLI::App* refine_cmd = app.add_subcommand("refine", "tau-refinement study");
    add_common(refine_cmd, true);
    CLI::App* plot_cmd = app.add_subcommand("plot", "emit plot-ready files from a run directory");
    plot_cmd->add_option("--out", flags.out_dir, "run directory to read");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run_cmd->parsed()) return cmd_run(flags);
        if (verify_cmd->parsed()) return cmd_verify();
        if (refine_cmd->parsed()) return cmd_refine(flags);
        if (plot_cmd->parsed()) return cmd_plot(flags);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const StepFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const RunFailure& e) {
        std::cerr << "solver failure: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    }
    return kExitOk;
}
