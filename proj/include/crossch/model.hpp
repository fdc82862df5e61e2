#pragma once

#include <cmath>
#include <vector>

#include "crossch/grid.hpp"

namespace crossch {

/// Parameters of the (n+1)-species mixture: interface energy eps, double-well
/// strength beta acting on species 0 only, symmetric positive interaction
/// table K, and time step tau.
struct ModelParams {
    int n = 1;           // species 1..n plus the solvent-like species 0
    double eps = 1e-3;   // gradient energy coefficient on u0
    double beta = 10.0;  // concave double-well strength on u0
    double tau = 1e-4;   // time step
    std::vector<double> K;  // (n+1)x(n+1) row-major, diagonal unused

    ModelParams() { set_uniform_K(1.0); }
    ModelParams(int n_, double eps_, double beta_, double tau_, double k = 1.0)
        : n(n_), eps(eps_), beta(beta_), tau(tau_) {
        set_uniform_K(k);
    }

    void set_uniform_K(double k);
    double K_at(int i, int j) const { return K[static_cast<std::size_t>(i * (n + 1) + j)]; }
    void set_K(int i, int j, double k);
    double K_max() const;
    double K_min_offdiag() const;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// Volumic fractions of all n+1 species; species 0 is stored explicitly and
/// per cell equals 1 - sum of the others up to roundoff.
struct CompositionField {
    Grid grid;
    int n = 1;
    std::vector<ScalarField> species;  // size n+1, [0] = u0

    CompositionField() = default;
    CompositionField(const Grid& g, int n_, double fill = 0.0)
        : grid(g), n(n_), species(static_cast<std::size_t>(n_ + 1), ScalarField(g, fill)) {}

    static CompositionField uniform(const Grid& g, int n);

    ScalarField& u(int i) { return species[static_cast<std::size_t>(i)]; }
    const ScalarField& u(int i) const { return species[static_cast<std::size_t>(i)]; }

    /// max over cells of |sum_i u_i - 1|
    double simplex_error() const;
    /// min over cells and species
    double min_value() const;
    double max_abs_diff_to(const CompositionField& other) const;
};

/// Energy split into the implicitly treated convex part (entropy + gradient)
/// and the explicitly treated concave part (double well). `total` is
/// conv(current) + conc(lagged) when assembled by the stepper.
struct EnergyReport {
    double total = 0.0;
    double conv = 0.0;
    double conc = 0.0;
};

/// Per-step a-priori quantities tracked along a trajectory. All are
/// quadrature values of nonnegative integrands; `tau_wbar_h2_sq` carries its
/// tau weight already.
struct MonitorRecord {
    double grad_sq_over_u = 0.0;    // sum_i int |grad u_i|^2 / u_i
    double lap_u0_sq = 0.0;         // int |lap u0|^2
    double degen_w0_grad_sq = 0.0;  // int (1-u0) u0 |grad w0|^2
    double tau_wbar_h2_sq = 0.0;    // tau * sum_i ||wbar_i||_{H2}^2
    double cross_wbar_grad_sq = 0.0;  // sum_i int u_i u0 |grad wbar_i|^2
};

/// Full mixture energy: int sum_i (u_i ln u_i - u_i + 1)
///                      + eps/2 |grad u0|^2 + beta u0 (1-u0).
/// Uses the continuous extension 0 ln 0 = 0; throws std::domain_error on
/// negative entries.
double energy(const CompositionField& u, const ModelParams& p);
/// int sum_i u_i ln u_i + eps/2 |grad u0|^2  (convex part, no affine shift)
double energy_convex(const CompositionField& u, const ModelParams& p);
/// int beta u0 (1 - u0)
double energy_concave(const CompositionField& u, const ModelParams& p);

/// x log x extended by zero at the origin.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

/// Degenerate mobility matrix at one point of the simplex:
/// off-diagonal -K_ij u_i u_j, diagonal sum_{j != i} K_ij u_i u_j.
/// Rows sum to zero; positive semidefinite on the whole simplex.
std::vector<double> mobility(const std::vector<double>& u_cell, const ModelParams& p);

/// z^T M(u) z via the closed form 1/2 sum_{i != j} K_ij u_i u_j (z_i - z_j)^2.
double mobility_quadratic_form(const std::vector<double>& u_cell, const std::vector<double>& z,
                               const ModelParams& p);

/// a / (1-b) when 1-b != 0, else 0.
double kappa(double a, double b);

/// Semi-implicit chemical potential of species 0:
/// -eps lap u0_new + beta (1 - 2 u0_old).
ScalarField w0_semi_implicit(const ScalarField& u0_new, const ScalarField& u0_old,
                             const ModelParams& p);

/// w_i = ln u_i - ln u0 for i = 1..n. Throws std::domain_error on a
/// nonpositive entry (that would mean the scheme lost interiority).
std::vector<ScalarField> entropy_vars(const CompositionField& u);

/// Face flux J = avg(u0 (1-u0)) * grad w0; zero on boundary faces.
FaceField flux_J(const ScalarField& u0, const ScalarField& w0);

/// A-priori monitor quantities for one accepted step.
MonitorRecord monitors(const CompositionField& u_new, const CompositionField& u_old,
                       const std::vector<ScalarField>& wbar, const ModelParams& p);

}  // namespace crossch
