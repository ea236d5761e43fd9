#pragma once

#include <cmath>
#include <string>

#include "dds/errors.hpp"

namespace dds {

/// Uniform 1-D cell grid over [x_min, x_max]. Cells are half-open intervals
/// [x_min + i*dx, x_min + (i+1)*dx); positions themselves stay continuous,
/// the grid only enters through binning and cell-center queries.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 1.0;
    int n_cells = 1;
    bool periodic = false; // ring topology (used by loop diagnostics and the FD solver)

    double dx() const { return (x_max - x_min) / n_cells; }
    double length() const { return x_max - x_min; }
    double center(int i) const { return x_min + (i + 0.5) * dx(); }

    bool contains(double x) const { return x >= x_min && x <= x_max; }

    /// Cell index of a position inside the domain; x == x_max maps to the last cell.
    int cell_of(double x) const {
        if (!contains(x))
            throw DomainEscapeError("position " + std::to_string(x) + " outside domain [" +
                                    std::to_string(x_min) + ", " + std::to_string(x_max) + "]");
        int i = static_cast<int>(std::floor((x - x_min) / dx()));
        if (i < 0) i = 0;
        if (i >= n_cells) i = n_cells - 1;
        return i;
    }

    /// Distance from a position to its cell center (diagnostic "internal shift").
    double shift_of(double x) const { return std::abs(x - center(cell_of(x))); }
};

inline Grid1D make_grid(double x_min, double x_max, int n_cells, bool periodic = false) {
    if (!(x_max > x_min))
        throw ValidationError("grid: x_max must exceed x_min");
    if (n_cells < 3)
        throw ValidationError("grid: need at least 3 cells, got " + std::to_string(n_cells));
    return Grid1D{x_min, x_max, n_cells, periodic};
}

/// Unit system of a run. Defaults are natural units.
struct PhysicalConstants {
    double hbar = 1.0;
    double mass = 1.0;

    /// Kinetic hop rate of the explicit scheme: hbar / (2 m dx^2).
    /// Recomputed from the grid on every call so it can never go stale.
    double gamma(const Grid1D& grid) const { return hbar / (2.0 * mass * grid.dx() * grid.dx()); }
};

inline void validate(const PhysicalConstants& c) {
    if (!(c.hbar > 0.0) || !(c.mass > 0.0))
        throw ValidationError("constants: hbar and mass must be positive");
}

} // namespace dds
