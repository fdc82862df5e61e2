#include "crossch/grid.hpp"

#include <cmath>

namespace crossch {

Grid Grid::make_1d(int nx, double h) {
    if (nx < 1 || h <= 0.0) throw std::invalid_argument("grid: nx >= 1 and h > 0 required");
    Grid g;
    g.dims = 1;
    g.nx = nx;
    g.ny = 1;
    g.h = h;
    return g;
}

Grid Grid::make_2d(int nx, int ny, double h) {
    if (nx < 1 || ny < 1 || h <= 0.0)
        throw std::invalid_argument("grid: nx, ny >= 1 and h > 0 required");
    Grid g;
    g.dims = 2;
    g.nx = nx;
    g.ny = ny;
    g.h = h;
    return g;
}

void FaceField::zero_boundary() {
    for (int iy = 0; iy < grid.ny; ++iy) {
        x(0, iy) = 0.0;
        x(grid.nx, iy) = 0.0;
    }
    if (grid.dims == 2) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            y(ix, 0) = 0.0;
            y(ix, grid.ny) = 0.0;
        }
    }
}

void require_same_grid(const Grid& a, const Grid& b) {
    if (a != b) throw std::invalid_argument("fields live on different grids");
}

FaceField gradient(const ScalarField& f) {
    const Grid& g = f.grid;
    FaceField out(g);
    const double inv_h = 1.0 / g.h;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 1; ix < g.nx; ++ix)
            out.x(ix, iy) = (f[g.id(ix, iy)] - f[g.id(ix - 1, iy)]) * inv_h;
    if (g.dims == 2)
        for (int iy = 1; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                out.y(ix, iy) = (f[g.id(ix, iy)] - f[g.id(ix, iy - 1)]) * inv_h;
    return out;
}

ScalarField divergence(const FaceField& F) {
    const Grid& g = F.grid;
    ScalarField out(g);
    const double inv_h = 1.0 / g.h;
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            double d = (F.x(ix + 1, iy) - F.x(ix, iy)) * inv_h;
            if (g.dims == 2) d += (F.y(ix, iy + 1) - F.y(ix, iy)) * inv_h;
            out[g.id(ix, iy)] = d;
        }
    return out;
}

ScalarField laplacian_neumann(const ScalarField& f) { return divergence(gradient(f)); }

double integrate(const ScalarField& f) {
    double s = 0.0;
    for (double x : f.v) s += x;
    return s * f.grid.cell_volume();
}

double inner_l2(const ScalarField& f, const ScalarField& g) {
    require_same_grid(f.grid, g.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i) s += f.v[i] * g.v[i];
    return s * f.grid.cell_volume();
}

double inner_faces(const FaceField& F, const FaceField& G) {
    require_same_grid(F.grid, G.grid);
    double s = 0.0;
    for (std::size_t i = 0; i < F.fx.size(); ++i) s += F.fx[i] * G.fx[i];
    for (std::size_t i = 0; i < F.fy.size(); ++i) s += F.fy[i] * G.fy[i];
    return s * F.grid.cell_volume();
}

double inner_h1(const ScalarField& f, const ScalarField& g) {
    return inner_l2(f, g) + inner_faces(gradient(f), gradient(g));
}

double inner_h2(const ScalarField& f, const ScalarField& g) {
    return inner_h1(f, g) + inner_l2(laplacian_neumann(f), laplacian_neumann(g));
}

FaceField face_average(const ScalarField& f) {
    const Grid& g = f.grid;
    FaceField out(g);
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 1; ix < g.nx; ++ix)
            out.x(ix, iy) = 0.5 * (f[g.id(ix, iy)] + f[g.id(ix - 1, iy)]);
    if (g.dims == 2)
        for (int iy = 1; iy < g.ny; ++iy)
            for (int ix = 0; ix < g.nx; ++ix)
                out.y(ix, iy) = 0.5 * (f[g.id(ix, iy)] + f[g.id(ix, iy - 1)]);
    return out;
}

double max_abs(const ScalarField& f) {
    double m = 0.0;
    for (double x : f.v) m = std::max(m, std::fabs(x));
    return m;
}

double max_abs_diff(const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid, b.grid);
    double m = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::fabs(a.v[i] - b.v[i]));
    return m;
}

}  // namespace crossch
