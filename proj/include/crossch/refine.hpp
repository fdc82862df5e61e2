#pragma once

#include <string>
#include <vector>

#include "crossch/config.hpp"
#include "crossch/stepper.hpp"

namespace crossch {

/// Result of running the same problem at tau, tau/2, tau/4, ...
struct RefinementReport {
    std::vector<double> taus;    // one per level
    std::vector<int> steps;      // steps taken per level
    std::vector<double> gaps;    // discrete L2(0,T;L2) gap between consecutive levels
    std::vector<double> ratios;  // gaps[l+1] / gaps[l]
    std::vector<double> alphas;  // -log2(ratio), the observed order
    bool partial = false;        // a level failed; earlier results retained
    std::string failure;
};

/// Discrete L2(0,T;L2) distance between two piecewise-constant trajectories
/// of the same problem, the fine one run with tau_coarse / ratio. States are
/// compared at the coarse step times.
double trajectory_gap(const Trajectory& coarse, const Trajectory& fine, int ratio);

/// Run `levels` tau-halvings of the configured problem and report pairwise
/// gaps. levels >= 3 per contract; the initial condition is built once.
RefinementReport refinement_study(const RunConfig& cfg, int levels);

void write_refinement_csv(const std::string& path, const RefinementReport& r);
/// Two-column (tau, gap) table for direct plotting.
void write_refinement_plot_data(const std::string& path, const RefinementReport& r);

}  // namespace crossch
