#include "crossch/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>
#include <vector>

namespace crossch {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_double(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line) + ": " + key + ": not a number: '" + v + "'",
                          line);
    }
}

long parse_int(const std::string& v, const std::string& key, int line) {
    try {
        std::size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("line " + std::to_string(line) + ": " + key + ": not an integer: '" + v + "'",
                          line);
    }
}

std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

}  // namespace

std::string RunConfig::render() const {
    std::ostringstream os;
    os << "[model]\n";
    os << "n = " << params.n << "\n";
    os << "eps = " << fmt(params.eps) << "\n";
    os << "beta = " << fmt(params.beta) << "\n";
    for (int i = 0; i <= params.n; ++i)
        for (int j = i + 1; j <= params.n; ++j)
            os << "K_" << i << j << " = " << fmt(params.K_at(i, j)) << "\n";
    os << "\n[grid]\n";
    os << "dims = " << dims << "\n";
    os << "nx = " << nx << "\n";
    if (dims == 2) os << "ny = " << ny << "\n";
    os << "h = " << fmt(h) << "\n";
    os << "\n[time]\n";
    os << "tau = " << fmt(params.tau) << "\n";
    os << "t_max = " << fmt(final_time()) << "\n";
    os << "\n[ic]\n";
    os << "preset = " << preset << "\n";
    os << "seed = " << seed << "\n";
    os << "amplitude = " << fmt(amplitude) << "\n";
    os << "width = " << fmt(width) << "\n";
    os << "\n[output]\n";
    os << "dir = " << out_dir << "\n";
    os << "snapshot_stride = " << snapshot_stride << "\n";
    os << "\n[stepper]\n";
    os << "tol_fp = " << fmt(step.tol_fp) << "\n";
    os << "max_picard = " << step.max_picard << "\n";
    os << "theta = " << fmt(step.theta) << "\n";
    os << "s1_tol = " << fmt(step.s1_tol) << "\n";
    os << "s2_tol = " << fmt(step.s2_tol) << "\n";
    os << "newton_tol = " << fmt(step.newton_tol) << "\n";
    os << "mode = "
       << (step.mode == StepMode::Auto ? "auto"
                                       : step.mode == StepMode::PicardOnly ? "picard" : "newton")
       << "\n";
    return os.str();
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    bool n_seen = false;
    // K entries arrive before we can size the table when n comes later, so
    // collect them and apply at the end.
    std::vector<std::tuple<int, int, double, int>> k_entries;  // i, j, value, line

    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header",
                                  lineno);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "model" && section != "grid" && section != "time" && section != "ic" &&
                section != "output" && section != "stepper")
                throw ConfigError("line " + std::to_string(lineno) + ": unknown section [" +
                                      section + "]",
                                  lineno);
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value", lineno);
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (section.empty())
            throw ConfigError("line " + std::to_string(lineno) + ": key outside any [section]",
                              lineno);

        auto unknown = [&]() {
            throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key +
                                  "' in section [" + section + "]",
                              lineno);
        };

        if (section == "model") {
            if (key == "n") {
                cfg.params.n = static_cast<int>(parse_int(val, key, lineno));
                if (cfg.params.n < 1 || cfg.params.n > 9)
                    throw ConfigError("n: species count must be in [1, 9]");
                cfg.params.set_uniform_K(1.0);
                n_seen = true;
            } else if (key == "eps") {
                cfg.params.eps = parse_double(val, key, lineno);
            } else if (key == "beta") {
                cfg.params.beta = parse_double(val, key, lineno);
            } else if (key.size() == 4 && key.rfind("K_", 0) == 0 && std::isdigit(key[2]) &&
                       std::isdigit(key[3])) {
                k_entries.emplace_back(key[2] - '0', key[3] - '0', parse_double(val, key, lineno),
                                       lineno);
            } else {
                unknown();
            }
        } else if (section == "grid") {
            if (key == "dims") {
                long d = parse_int(val, key, lineno);
                if (d != 1 && d != 2) throw ConfigError("dims: must be 1 or 2");
                cfg.dims = static_cast<int>(d);
            } else if (key == "nx") {
                cfg.nx = static_cast<int>(parse_int(val, key, lineno));
            } else if (key == "ny") {
                cfg.ny = static_cast<int>(parse_int(val, key, lineno));
            } else if (key == "h") {
                cfg.h = parse_double(val, key, lineno);
            } else {
                unknown();
            }
        } else if (section == "time") {
            if (key == "tau")
                cfg.params.tau = parse_double(val, key, lineno);
            else if (key == "t_max")
                cfg.t_max = parse_double(val, key, lineno);
            else
                unknown();
        } else if (section == "ic") {
            if (key == "preset")
                cfg.preset = val;
            else if (key == "seed")
                cfg.seed = static_cast<unsigned>(parse_int(val, key, lineno));
            else if (key == "amplitude")
                cfg.amplitude = parse_double(val, key, lineno);
            else if (key == "width")
                cfg.width = parse_double(val, key, lineno);
            else
                unknown();
        } else if (section == "output") {
            if (key == "dir")
                cfg.out_dir = val;
            else if (key == "snapshot_stride")
                cfg.snapshot_stride = static_cast<int>(parse_int(val, key, lineno));
            else
                unknown();
        } else if (section == "stepper") {
            if (key == "tol_fp")
                cfg.step.tol_fp = parse_double(val, key, lineno);
            else if (key == "max_picard")
                cfg.step.max_picard = static_cast<int>(parse_int(val, key, lineno));
            else if (key == "theta")
                cfg.step.theta = parse_double(val, key, lineno);
            else if (key == "s1_tol")
                cfg.step.s1_tol = parse_double(val, key, lineno);
            else if (key == "s2_tol")
                cfg.step.s2_tol = parse_double(val, key, lineno);
            else if (key == "newton_tol")
                cfg.step.newton_tol = parse_double(val, key, lineno);
            else if (key == "mode") {
                if (val == "auto")
                    cfg.step.mode = StepMode::Auto;
                else if (val == "picard")
                    cfg.step.mode = StepMode::PicardOnly;
                else if (val == "newton")
                    cfg.step.mode = StepMode::NewtonOnly;
                else
                    throw ConfigError("mode: must be auto, picard, or newton");
            } else {
                unknown();
            }
        }
    }
    (void)n_seen;

    for (auto& [i, j, kval, kline] : k_entries) {
        if (i < 0 || j <= i || j > cfg.params.n)
            throw ConfigError("line " + std::to_string(kline) + ": K_" + std::to_string(i) +
                                  std::to_string(j) + ": indices must satisfy 0 <= i < j <= n",
                              kline);
        cfg.params.set_K(i, j, kval);
    }

    // Semantic validation; messages name the offending field.
    try {
        cfg.params.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.nx < 1) throw ConfigError("nx: must be >= 1");
    if (cfg.dims == 2 && cfg.ny < 1) throw ConfigError("ny: must be >= 1");
    if (!(cfg.h > 0.0)) throw ConfigError("h: must be > 0");
    if (cfg.t_max < 0.0) throw ConfigError("t_max: must be >= 0 (0 selects the default)");
    if (cfg.preset != "uniform-perturbed" && cfg.preset != "tanh-interface" &&
        cfg.preset != "two-blob")
        throw ConfigError("preset: unknown initial condition '" + cfg.preset + "'");
    if (cfg.preset == "two-blob" && cfg.dims != 2)
        throw ConfigError("preset: two-blob requires dims = 2");
    if (cfg.amplitude < 0.0) throw ConfigError("amplitude: must be >= 0");
    if (cfg.width < 0.0) throw ConfigError("width: must be >= 0");
    if (cfg.snapshot_stride < 1) throw ConfigError("snapshot_stride: must be >= 1");
    if (!(cfg.step.tol_fp > 0.0)) throw ConfigError("tol_fp: must be > 0");
    if (!(cfg.step.theta > 0.0 && cfg.step.theta <= 1.0))
        throw ConfigError("theta: must lie in (0, 1]");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

CompositionField initial_condition(const std::string& preset, const Grid& g,
                                   const ModelParams& p, unsigned seed, double amplitude,
                                   double width) {
    const int n = p.n;
    std::vector<ScalarField> raw(static_cast<std::size_t>(n + 1), ScalarField(g));

    if (preset == "uniform-perturbed") {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> unif(-1.0, 1.0);
        for (int i = 0; i <= n; ++i)
            for (int c = 0; c < g.cell_count(); ++c)
                raw[static_cast<std::size_t>(i)][c] = 1.0 / (n + 1) + amplitude * unif(rng);
    } else if (preset == "tanh-interface") {
        const double w = width > 0.0 ? width : 3.0 * g.h;
        const double x_mid = g.x_center(g.nx / 2);
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const int c = g.id(ix, iy);
                const double u0 = 0.5 * (1.0 + std::tanh((g.x_center(ix) - x_mid) / w));
                raw[0][c] = u0;
                for (int i = 1; i <= n; ++i) raw[static_cast<std::size_t>(i)][c] = (1.0 - u0) / n;
            }
    } else if (preset == "two-blob") {
        if (g.dims != 2) throw std::invalid_argument("two-blob preset requires a 2D grid");
        const double Lx = g.nx * g.h, Ly = g.ny * g.h;
        const double sigma = 0.12 * Lx;
        auto blob = [&](double x, double y, double cx, double cy) {
            const double dx = x - cx, dy = y - cy;
            return 0.45 * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        };
        for (int iy = 0; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix) {
                const int c = g.id(ix, iy);
                const double x = g.x_center(ix), y = g.x_center(iy);
                const double b1 = blob(x, y, 0.3 * Lx, 0.3 * Ly);
                const double b2 = blob(x, y, 0.7 * Lx, 0.7 * Ly);
                raw[1][c] = n >= 2 ? b1 : b1 + b2;
                if (n >= 2) raw[2][c] = b2;
                double s = 0.0;
                for (int i = 1; i <= n; ++i) s += raw[static_cast<std::size_t>(i)][c];
                raw[0][c] = 1.0 - s;
            }
    } else {
        throw std::invalid_argument("unknown initial condition preset: " + preset);
    }

    return project_initial(raw).u;
}

}  // namespace crossch
