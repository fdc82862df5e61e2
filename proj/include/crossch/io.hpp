#pragma once

#include <string>

#include "crossch/model.hpp"
#include "crossch/stepper.hpp"

namespace crossch {

struct Snapshot {
    double time = 0.0;
    CompositionField u;
};

/// CSV snapshot: grid header, then one row per cell with index, coordinates
/// and u_0..u_n at 17 significant digits (doubles round-trip exactly).
void write_snapshot(const std::string& path, double t, const CompositionField& u);
Snapshot read_snapshot(const std::string& path);

/// Per-step log: energies in the lagged convention, masses, predicted mass
/// drift, the five monitor quantities, and solver diagnostics.
void write_entropy_log(const std::string& path, const Trajectory& traj, const ModelParams& p);

/// Pass/fail digest of the run invariants, written as JSON.
struct RunSummary {
    int steps = 0;
    bool completed = false;
    double simplex_max_err = 0.0;
    double min_delta = 0.0;
    bool positivity_ok = false;
    double max_entropy_violation = 0.0;  // relative to 1 + |E|
    bool entropy_decay_ok = false;
    double max_mass_identity_err = 0.0;
    bool mass_identity_ok = false;
    bool all_ok() const { return completed && positivity_ok && entropy_decay_ok && mass_identity_ok; }
};

RunSummary summarize(const Trajectory& traj);
void write_summary(const std::string& path, const RunSummary& s, const std::string& config_text,
                   const std::string& note = "");

}  // namespace crossch
