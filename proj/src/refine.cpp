#include "crossch/refine.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace crossch {

double trajectory_gap(const Trajectory& coarse, const Trajectory& fine, int ratio) {
    if (ratio < 1) throw std::invalid_argument("trajectory_gap: ratio must be >= 1");
    const std::size_t pc = coarse.states.size() - 1;
    if (fine.states.size() - 1 < pc * static_cast<std::size_t>(ratio))
        throw std::invalid_argument("trajectory_gap: fine trajectory too short");
    const double tau_c = coarse.times[1] - coarse.times[0];
    double acc = 0.0;
    for (std::size_t p = 1; p <= pc; ++p) {
        const CompositionField& a = coarse.states[p];
        const CompositionField& b = fine.states[p * static_cast<std::size_t>(ratio)];
        double sq = 0.0;
        for (int i = 0; i <= a.n; ++i) {
            for (int c = 0; c < a.grid.cell_count(); ++c) {
                const double d = a.u(i)[c] - b.u(i)[c];
                sq += d * d;
            }
        }
        acc += tau_c * sq * a.grid.cell_volume();
    }
    return std::sqrt(acc);
}

RefinementReport refinement_study(const RunConfig& cfg, int levels) {
    if (levels < 3) throw std::invalid_argument("refinement_study: levels must be >= 3");
    const Grid g = cfg.grid();
    const CompositionField u0 =
        initial_condition(cfg.preset, g, cfg.params, cfg.seed, cfg.amplitude, cfg.width);
    const double t_max = cfg.final_time();

    RefinementReport rep;
    std::vector<Trajectory> trajs;
    for (int l = 0; l < levels; ++l) {
        ModelParams p = cfg.params;
        p.tau = cfg.params.tau / std::pow(2.0, l);
        try {
            trajs.push_back(run(u0, p, cfg.step, t_max));
        } catch (const RunFailure& f) {
            rep.partial = true;
            rep.failure = f.what();
            break;
        }
        rep.taus.push_back(p.tau);
        rep.steps.push_back(static_cast<int>(trajs.back().reports.size()));
    }
    for (std::size_t l = 0; l + 1 < trajs.size(); ++l)
        rep.gaps.push_back(trajectory_gap(trajs[l], trajs[l + 1], 2));
    for (std::size_t l = 0; l + 1 < rep.gaps.size(); ++l) {
        const double r = rep.gaps[l + 1] / rep.gaps[l];
        rep.ratios.push_back(r);
        rep.alphas.push_back(-std::log2(r));
    }
    return rep;
}

namespace {
std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}
}  // namespace

void write_refinement_csv(const std::string& path, const RefinementReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "level,tau,steps,gap_to_next,ratio,alpha\n";
    for (std::size_t l = 0; l < r.taus.size(); ++l) {
        out << l << "," << fmt(r.taus[l]) << "," << r.steps[l];
        out << "," << (l < r.gaps.size() ? fmt(r.gaps[l]) : "");
        out << "," << (l < r.ratios.size() ? fmt(r.ratios[l]) : "");
        out << "," << (l < r.alphas.size() ? fmt(r.alphas[l]) : "");
        out << "\n";
    }
    if (r.partial) out << "# partial: " << r.failure << "\n";
}

void write_refinement_plot_data(const std::string& path, const RefinementReport& r) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "# tau gap\n";
    for (std::size_t l = 0; l < r.gaps.size(); ++l)
        out << fmt(r.taus[l]) << " " << fmt(r.gaps[l]) << "\n";
}

}  // namespace crossch
