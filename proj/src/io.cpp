#include "crossch/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crossch {

namespace {

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

}  // namespace

void write_snapshot(const std::string& path, double t, const CompositionField& u) {
    std::ofstream out = open_out(path);
    const Grid& g = u.grid;
    out << "# grid = " << g.dims << " " << g.nx << " " << g.ny << " " << fmt(g.h) << "\n";
    out << "# species = " << u.n + 1 << "\n";
    out << "# time = " << fmt(t) << "\n";
    out << "cell";
    out << (g.dims == 1 ? ",x" : ",x,y");
    for (int i = 0; i <= u.n; ++i) out << ",u_" << i;
    out << "\n";
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const int c = g.id(ix, iy);
            out << c << "," << fmt(g.x_center(ix));
            if (g.dims == 2) out << "," << fmt(g.x_center(iy));
            for (int i = 0; i <= u.n; ++i) out << "," << fmt(u.u(i)[c]);
            out << "\n";
        }
    if (!out) throw std::runtime_error("write failed: " + path);
}

Snapshot read_snapshot(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open snapshot: " + path);
    std::string line;
    int dims = 0, nx = 0, ny = 0, nsp = 0;
    double h = 0.0, t = 0.0;
    // Three header comments, then the column row.
    for (int k = 0; k < 3; ++k) {
        if (!std::getline(in, line)) throw std::runtime_error("truncated snapshot: " + path);
        std::istringstream ss(line);
        std::string hash, key, eq;
        ss >> hash >> key >> eq;
        if (key == "grid")
            ss >> dims >> nx >> ny >> h;
        else if (key == "species")
            ss >> nsp;
        else if (key == "time")
            ss >> t;
    }
    std::getline(in, line);  // column names
    if (dims < 1 || nsp < 2) throw std::runtime_error("malformed snapshot header: " + path);

    Grid g = dims == 1 ? Grid::make_1d(nx, h) : Grid::make_2d(nx, ny, h);
    Snapshot snap;
    snap.time = t;
    snap.u = CompositionField(g, nsp - 1);
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ',');
        const int c = std::stoi(tok);
        for (int k = 0; k < dims; ++k) std::getline(ss, tok, ',');  // coordinates
        for (int i = 0; i < nsp; ++i) {
            std::getline(ss, tok, ',');
            snap.u.u(i)[c] = std::stod(tok);
        }
        ++rows;
    }
    if (rows != g.cell_count()) throw std::runtime_error("snapshot row count mismatch: " + path);
    return snap;
}

void write_entropy_log(const std::string& path, const Trajectory& traj, const ModelParams& p) {
    std::ofstream out = open_out(path);
    out << "step,time,E,E_conv,E_conc";
    for (int i = 0; i <= p.n; ++i) out << ",mass_" << i;
    for (int i = 1; i <= p.n; ++i) out << ",drift_" << i;
    out << ",mon_grad_sq_over_u,mon_lap_u0_sq,mon_degen_w0,mon_tau_wbar_h2,mon_cross_wbar"
        << ",picard_iters,newton_iters,fp_gap,delta_observed,simplex_error,s1_residual,s2_residual\n";

    // Step 0: plain (unlagged) energies of the initial state; the lagged
    // sequence starts at step 1 and that is where decay is asserted.
    {
        const CompositionField& u0 = traj.states.front();
        const double conv = energy_convex(u0, p);
        const double conc = energy_concave(u0, p);
        out << 0 << "," << fmt(0.0) << "," << fmt(conv + conc) << "," << fmt(conv) << ","
            << fmt(conc);
        for (int i = 0; i <= p.n; ++i) out << "," << fmt(integrate(u0.u(i)));
        for (int i = 1; i <= p.n; ++i) out << "," << fmt(0.0);
        out << ",0,0,0,0,0,0,0," << fmt(u0.min_value()) << "," << fmt(u0.simplex_error()) << ",0,0\n";
    }

    for (std::size_t s = 0; s < traj.reports.size(); ++s) {
        const StepReport& r = traj.reports[s];
        out << s + 1 << "," << fmt(traj.times[s + 1]) << "," << fmt(r.energy_after.total) << ","
            << fmt(r.energy_after.conv) << "," << fmt(r.energy_after.conc);
        for (double m : r.mass.mass) out << "," << fmt(m);
        for (double d : r.mass.predicted_drift) out << "," << fmt(d);
        out << "," << fmt(r.monitors.grad_sq_over_u) << "," << fmt(r.monitors.lap_u0_sq) << ","
            << fmt(r.monitors.degen_w0_grad_sq) << "," << fmt(r.monitors.tau_wbar_h2_sq) << ","
            << fmt(r.monitors.cross_wbar_grad_sq);
        out << "," << r.picard_iters << "," << r.newton_iters << "," << fmt(r.fp_gap) << ","
            << fmt(r.delta_observed) << "," << fmt(r.simplex_error) << "," << fmt(r.s1_residual)
            << "," << fmt(r.s2_residual) << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

RunSummary summarize(const Trajectory& traj) {
    RunSummary s;
    s.steps = static_cast<int>(traj.reports.size());
    s.completed = !traj.reports.empty();
    s.min_delta = 1.0;
    for (const StepReport& r : traj.reports) {
        s.simplex_max_err = std::max(s.simplex_max_err, r.simplex_error);
        s.min_delta = std::min(s.min_delta, r.delta_observed);
        for (double e : r.mass.identity_error)
            s.max_mass_identity_err = std::max(s.max_mass_identity_err, e);
    }
    s.positivity_ok = s.completed && s.min_delta > 0.0 && s.simplex_max_err <= 1e-12;
    s.mass_identity_ok = s.completed && s.max_mass_identity_err <= 1e-10;
    for (std::size_t i = 1; i < traj.reports.size(); ++i) {
        const double prev = traj.reports[i - 1].energy_after.total;
        const double cur = traj.reports[i].energy_after.total;
        const double viol = (cur - prev) / (1.0 + std::fabs(prev));
        s.max_entropy_violation = std::max(s.max_entropy_violation, viol);
    }
    s.entropy_decay_ok = s.completed && s.max_entropy_violation <= 1e-8;
    return s;
}

void write_summary(const std::string& path, const RunSummary& s, const std::string& config_text,
                   const std::string& note) {
    nlohmann::json j;
    j["steps"] = s.steps;
    j["completed"] = s.completed;
    j["invariants"]["simplex_max_err"] = s.simplex_max_err;
    j["invariants"]["min_delta"] = s.min_delta;
    j["invariants"]["positivity_ok"] = s.positivity_ok;
    j["invariants"]["max_entropy_violation"] = s.max_entropy_violation;
    j["invariants"]["entropy_decay_ok"] = s.entropy_decay_ok;
    j["invariants"]["max_mass_identity_err"] = s.max_mass_identity_err;
    j["invariants"]["mass_identity_ok"] = s.mass_identity_ok;
    j["all_ok"] = s.all_ok();
    j["config"] = config_text;
    if (!note.empty()) j["note"] = note;
    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

}  // namespace crossch
