#pragma once

#include <string>

#include "crossch/model.hpp"
#include "crossch/stepper.hpp"

namespace crossch {

/// Configuration rejected; `line` is 0 for semantic (validation) errors.
struct ConfigError : std::runtime_error {
    int line;
    ConfigError(const std::string& what, int line_ = 0) : std::runtime_error(what), line(line_) {}
};

/// Everything a run needs, parsed from the line-oriented
/// `[section]` / `key = value` format documented in the README.
/// Unknown sections or keys are hard errors.
struct RunConfig {
    ModelParams params;
    int dims = 1;
    int nx = 64;
    int ny = 64;  // used when dims == 2
    double h = 1.0 / 64.0;

    std::string preset = "uniform-perturbed";
    unsigned seed = 0;
    double amplitude = 0.01;
    double width = 0.0;  // tanh-interface width; 0 = 3h

    double t_max = 0.0;  // 0 = 100 tau
    std::string out_dir = "out";
    int snapshot_stride = 10;

    StepConfig step;

    Grid grid() const {
        return dims == 1 ? Grid::make_1d(nx, h) : Grid::make_2d(nx, ny, h);
    }
    double final_time() const { return t_max > 0.0 ? t_max : 100.0 * params.tau; }

    /// Canonical text form (reparses to the same config).
    std::string render() const;
};

/// Parse from text. Throws ConfigError with a line number on syntax errors
/// and with the offending field name on validation errors.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

/// Seeded initial-condition presets: `uniform-perturbed`, `tanh-interface`,
/// `two-blob` (2D only). Result passes through project_initial, so it is a
/// valid composition; the same seed gives bitwise identical fields.
CompositionField initial_condition(const std::string& preset, const Grid& g,
                                   const ModelParams& p, unsigned seed, double amplitude,
                                   double width);

}  // namespace crossch
