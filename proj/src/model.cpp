#include "crossch/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace crossch {

void ModelParams::set_uniform_K(double k) {
    K.assign(static_cast<std::size_t>((n + 1) * (n + 1)), k);
    for (int i = 0; i <= n; ++i) K[static_cast<std::size_t>(i * (n + 1) + i)] = 0.0;
}

void ModelParams::set_K(int i, int j, double k) {
    K[static_cast<std::size_t>(i * (n + 1) + j)] = k;
    K[static_cast<std::size_t>(j * (n + 1) + i)] = k;
}

double ModelParams::K_max() const {
    double m = 0.0;
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (i != j) m = std::max(m, K_at(i, j));
    return m;
}

double ModelParams::K_min_offdiag() const {
    double m = K_at(0, 1);
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (i != j) m = std::min(m, K_at(i, j));
    return m;
}

void ModelParams::validate() const {
    if (n < 1) throw std::invalid_argument("n: species count must be >= 1");
    if (!(eps > 0.0)) throw std::invalid_argument("eps: must be > 0");
    if (!(beta > 0.0)) throw std::invalid_argument("beta: must be > 0");
    if (!(tau > 0.0)) throw std::invalid_argument("tau: must be > 0");
    if (K.size() != static_cast<std::size_t>((n + 1) * (n + 1)))
        throw std::invalid_argument("K: table size must be (n+1)^2");
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j) {
            if (i == j) continue;
            if (!(K_at(i, j) > 0.0))
                throw std::invalid_argument("K_" + std::to_string(i) + std::to_string(j) +
                                            ": off-diagonal interaction must be positive");
            if (K_at(i, j) != K_at(j, i))
                throw std::invalid_argument("K: table must be symmetric");
        }
}

CompositionField CompositionField::uniform(const Grid& g, int n) {
    CompositionField u(g, n, 1.0 / (n + 1));
    return u;
}

double CompositionField::simplex_error() const {
    double worst = 0.0;
    for (int c = 0; c < grid.cell_count(); ++c) {
        double s = 0.0;
        for (int i = 0; i <= n; ++i) s += u(i)[c];
        worst = std::max(worst, std::fabs(s - 1.0));
    }
    return worst;
}

double CompositionField::min_value() const {
    double m = u(0)[0];
    for (int i = 0; i <= n; ++i)
        for (double x : u(i).v) m = std::min(m, x);
    return m;
}

double CompositionField::max_abs_diff_to(const CompositionField& other) const {
    double m = 0.0;
    for (int i = 0; i <= n; ++i) m = std::max(m, max_abs_diff(u(i), other.u(i)));
    return m;
}

namespace {
void require_nonnegative(const CompositionField& u, const char* who) {
    for (int i = 0; i <= u.n; ++i)
        for (double x : u.u(i).v)
            if (x < 0.0) throw std::domain_error(std::string(who) + ": negative volumic fraction");
}
}  // namespace

double energy(const CompositionField& u, const ModelParams& p) {
    require_nonnegative(u, "energy");
    double bulk = 0.0;
    for (int c = 0; c < u.grid.cell_count(); ++c) {
        for (int i = 0; i <= u.n; ++i) {
            const double x = u.u(i)[c];
            bulk += xlogx(x) - x + 1.0;
        }
        const double u0 = u.u(0)[c];
        bulk += p.beta * u0 * (1.0 - u0);
    }
    FaceField g0 = gradient(u.u(0));
    return bulk * u.grid.cell_volume() + 0.5 * p.eps * inner_faces(g0, g0);
}

double energy_convex(const CompositionField& u, const ModelParams& p) {
    require_nonnegative(u, "energy_convex");
    double bulk = 0.0;
    for (int c = 0; c < u.grid.cell_count(); ++c)
        for (int i = 0; i <= u.n; ++i) bulk += xlogx(u.u(i)[c]);
    FaceField g0 = gradient(u.u(0));
    return bulk * u.grid.cell_volume() + 0.5 * p.eps * inner_faces(g0, g0);
}

double energy_concave(const CompositionField& u, const ModelParams& p) {
    double s = 0.0;
    for (double u0 : u.u(0).v) s += p.beta * u0 * (1.0 - u0);
    return s * u.grid.cell_volume();
}

std::vector<double> mobility(const std::vector<double>& u_cell, const ModelParams& p) {
    const int m = p.n + 1;
    if (static_cast<int>(u_cell.size()) != m)
        throw std::invalid_argument("mobility: point must have n+1 entries");
    for (double x : u_cell)
        if (x < 0.0) throw std::domain_error("mobility: negative volumic fraction");
    std::vector<double> M(static_cast<std::size_t>(m * m), 0.0);
    for (int i = 0; i < m; ++i) {
        double diag = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const double off = p.K_at(i, j) * u_cell[static_cast<std::size_t>(i)] *
                               u_cell[static_cast<std::size_t>(j)];
            M[static_cast<std::size_t>(i * m + j)] = -off;
            diag += off;
        }
        M[static_cast<std::size_t>(i * m + i)] = diag;
    }
    return M;
}

double mobility_quadratic_form(const std::vector<double>& u_cell, const std::vector<double>& z,
                               const ModelParams& p) {
    const int m = p.n + 1;
    double s = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            const double dz = z[static_cast<std::size_t>(i)] - z[static_cast<std::size_t>(j)];
            s += p.K_at(i, j) * u_cell[static_cast<std::size_t>(i)] *
                 u_cell[static_cast<std::size_t>(j)] * dz * dz;
        }
    return 0.5 * s;
}

double kappa(double a, double b) {
    const double den = 1.0 - b;
    return den != 0.0 ? a / den : 0.0;
}

ScalarField w0_semi_implicit(const ScalarField& u0_new, const ScalarField& u0_old,
                             const ModelParams& p) {
    require_same_grid(u0_new.grid, u0_old.grid);
    ScalarField lap = laplacian_neumann(u0_new);
    ScalarField out(u0_new.grid);
    for (int c = 0; c < out.size(); ++c)
        out[c] = -p.eps * lap[c] + p.beta * (1.0 - 2.0 * u0_old[c]);
    return out;
}

std::vector<ScalarField> entropy_vars(const CompositionField& u) {
    std::vector<ScalarField> w;
    w.reserve(static_cast<std::size_t>(u.n));
    for (int i = 1; i <= u.n; ++i) {
        ScalarField wi(u.grid);
        for (int c = 0; c < wi.size(); ++c) {
            const double ui = u.u(i)[c];
            const double u0 = u.u(0)[c];
            if (ui <= 0.0 || u0 <= 0.0)
                throw std::domain_error("entropy_vars: nonpositive volumic fraction");
            wi[c] = std::log(ui) - std::log(u0);
        }
        w.push_back(std::move(wi));
    }
    return w;
}

FaceField flux_J(const ScalarField& u0, const ScalarField& w0) {
    require_same_grid(u0.grid, w0.grid);
    ScalarField coeff(u0.grid);
    for (int c = 0; c < coeff.size(); ++c) coeff[c] = u0[c] * (1.0 - u0[c]);
    FaceField avg = face_average(coeff);
    FaceField gw = gradient(w0);
    FaceField J(u0.grid);
    for (std::size_t f = 0; f < J.fx.size(); ++f) J.fx[f] = avg.fx[f] * gw.fx[f];
    for (std::size_t f = 0; f < J.fy.size(); ++f) J.fy[f] = avg.fy[f] * gw.fy[f];
    return J;
}

namespace {
// int c_face * |grad f|^2 with arithmetic face averages of the cell
// coefficient; boundary faces contribute nothing.
double weighted_grad_sq(const ScalarField& coeff, const ScalarField& f) {
    FaceField avg = face_average(coeff);
    FaceField gf = gradient(f);
    double s = 0.0;
    for (std::size_t i = 0; i < gf.fx.size(); ++i) s += avg.fx[i] * gf.fx[i] * gf.fx[i];
    for (std::size_t i = 0; i < gf.fy.size(); ++i) s += avg.fy[i] * gf.fy[i] * gf.fy[i];
    return s * f.grid.cell_volume();
}
}  // namespace

MonitorRecord monitors(const CompositionField& u_new, const CompositionField& u_old,
                       const std::vector<ScalarField>& wbar, const ModelParams& p) {
    MonitorRecord r;
    for (int i = 0; i <= u_new.n; ++i) {
        // |grad u_i|^2 / u_i as a face quadrature: gradient squared divided by
        // the face-averaged density.
        FaceField g = gradient(u_new.u(i));
        FaceField avg = face_average(u_new.u(i));
        double s = 0.0;
        for (std::size_t f = 0; f < g.fx.size(); ++f)
            if (avg.fx[f] > 0.0) s += g.fx[f] * g.fx[f] / avg.fx[f];
        for (std::size_t f = 0; f < g.fy.size(); ++f)
            if (avg.fy[f] > 0.0) s += g.fy[f] * g.fy[f] / avg.fy[f];
        r.grad_sq_over_u += s * u_new.grid.cell_volume();
    }

    ScalarField lap0 = laplacian_neumann(u_new.u(0));
    r.lap_u0_sq = inner_l2(lap0, lap0);

    ScalarField w0 = w0_semi_implicit(u_new.u(0), u_old.u(0), p);
    ScalarField degen(u_new.grid);
    for (int c = 0; c < degen.size(); ++c)
        degen[c] = (1.0 - u_new.u(0)[c]) * u_new.u(0)[c];
    r.degen_w0_grad_sq = weighted_grad_sq(degen, w0);

    for (int i = 1; i <= u_new.n; ++i) {
        const ScalarField& wi = wbar[static_cast<std::size_t>(i - 1)];
        r.tau_wbar_h2_sq += p.tau * inner_h2(wi, wi);
        ScalarField cross(u_new.grid);
        for (int c = 0; c < cross.size(); ++c) cross[c] = u_new.u(i)[c] * u_new.u(0)[c];
        r.cross_wbar_grad_sq += weighted_grad_sq(cross, wi);
    }
    return r;
}

}  // namespace crossch
