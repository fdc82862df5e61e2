#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace crossch {

/// Uniform cell-centered mesh on a rectangle, 1D or 2D, with homogeneous
/// Neumann (zero normal flux) boundary conditions baked into the discrete
/// operators. Cell centers sit at (i+1/2)h; unknowns live one per cell,
/// fluxes one per face. The operators below satisfy exact summation by
/// parts: <div F, g>_l2 = -<F, grad g>_faces for every field, which is what
/// the discrete entropy estimates rely on.
struct Grid {
    int dims = 1;      // 1 or 2
    int nx = 1;        // cells along axis 0
    int ny = 1;        // cells along axis 1 (1 when dims == 1)
    double h = 1.0;    // cell spacing, identical on both axes

    static Grid make_1d(int nx, double h);
    static Grid make_2d(int nx, int ny, double h);

    int cell_count() const { return nx * ny; }
    double cell_volume() const { return dims == 1 ? h : h * h; }
    double measure() const { return cell_count() * cell_volume(); }

    int id(int ix, int iy) const { return iy * nx + ix; }

    // Cell-center coordinate along an axis.
    double x_center(int ix) const { return (ix + 0.5) * h; }

    bool operator==(const Grid& o) const {
        return dims == o.dims && nx == o.nx && ny == o.ny && h == o.h;
    }
    bool operator!=(const Grid& o) const { return !(*this == o); }
};

/// One real value per cell.
struct ScalarField {
    Grid grid;
    std::vector<double> v;

    ScalarField() = default;
    explicit ScalarField(const Grid& g, double fill = 0.0)
        : grid(g), v(static_cast<std::size_t>(g.cell_count()), fill) {}

    double& operator[](int c) { return v[static_cast<std::size_t>(c)]; }
    double operator[](int c) const { return v[static_cast<std::size_t>(c)]; }
    int size() const { return static_cast<int>(v.size()); }
};

/// One real value per face and axis. Boundary faces are stored but always
/// carry a zero normal component; `gradient` never writes them and
/// `zero_boundary` restores the invariant after manual edits.
struct FaceField {
    Grid grid;
    std::vector<double> fx;  // (nx+1) * ny values, face (ix,iy) left of cell ix
    std::vector<double> fy;  // nx * (ny+1) values, empty in 1D

    FaceField() = default;
    explicit FaceField(const Grid& g)
        : grid(g),
          fx(static_cast<std::size_t>((g.nx + 1) * g.ny), 0.0),
          fy(g.dims == 2 ? static_cast<std::size_t>(g.nx * (g.ny + 1)) : 0, 0.0) {}

    double& x(int ix, int iy) { return fx[static_cast<std::size_t>(iy * (grid.nx + 1) + ix)]; }
    double x(int ix, int iy) const { return fx[static_cast<std::size_t>(iy * (grid.nx + 1) + ix)]; }
    double& y(int ix, int iy) { return fy[static_cast<std::size_t>(iy * grid.nx + ix)]; }
    double y(int ix, int iy) const { return fy[static_cast<std::size_t>(iy * grid.nx + ix)]; }

    void zero_boundary();
};

void require_same_grid(const Grid& a, const Grid& b);

/// Two-point face difference (f_right - f_left)/h on interior faces, zero on
/// boundary faces.
FaceField gradient(const ScalarField& f);

/// Per-cell net outflux divided by h; exact negative adjoint of `gradient`
/// under the l2/face inner products.
ScalarField divergence(const FaceField& F);

/// divergence(gradient(f)): the homogeneous Neumann five/three-point
/// Laplacian. Annihilates constants, symmetric negative semidefinite.
ScalarField laplacian_neumann(const ScalarField& f);

/// Midpoint quadrature sum f * h^dims.
double integrate(const ScalarField& f);

double inner_l2(const ScalarField& f, const ScalarField& g);
double inner_faces(const FaceField& F, const FaceField& G);
double inner_h1(const ScalarField& f, const ScalarField& g);
double inner_h2(const ScalarField& f, const ScalarField& g);

/// Arithmetic mean of the two adjacent cells on interior faces, zero on
/// boundary faces (consistent with the no-flux boundary).
FaceField face_average(const ScalarField& f);

// Small field helpers used throughout the solvers.
double max_abs(const ScalarField& f);
double max_abs_diff(const ScalarField& a, const ScalarField& b);

}  // namespace crossch
