#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "dds/grid.hpp"

namespace dds {

/// Complex wavefunction sampled at cell centers, stored as split real/imag parts
/// (the explicit scheme evolves the two parts as a coupled real system).
struct WaveField {
    Grid1D grid;
    std::vector<double> re;
    std::vector<double> im;

    double density(int i) const { return re[i] * re[i] + im[i] * im[i]; }

    /// Discrete squared L2 norm: sum |psi|^2 dx.
    double norm2() const {
        double s = 0.0;
        for (int i = 0; i < grid.n_cells; ++i) s += density(i);
        return s * grid.dx();
    }

    bool is_finite() const {
        for (double v : re)
            if (!std::isfinite(v)) return false;
        for (double v : im)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

inline WaveField make_wavefield(const Grid1D& grid) {
    WaveField f;
    f.grid = grid;
    f.re.assign(static_cast<std::size_t>(grid.n_cells), 0.0);
    f.im.assign(static_cast<std::size_t>(grid.n_cells), 0.0);
    return f;
}

inline void normalize(WaveField& f) {
    double n2 = f.norm2();
    if (!(n2 > 0.0)) throw ValidationError("normalize: wavefield has zero norm");
    double s = 1.0 / std::sqrt(n2);
    for (auto& v : f.re) v *= s;
    for (auto& v : f.im) v *= s;
}

/// Per-cell probability density (integrates to ~1 over the domain).
struct DensityField {
    Grid1D grid;
    std::vector<double> rho;

    double mass(int i) const { return rho[i] * grid.dx(); }
    double total() const {
        double s = 0.0;
        for (double r : rho) s += r;
        return s * grid.dx();
    }
};

inline DensityField density_of(const WaveField& f) {
    DensityField d;
    d.grid = f.grid;
    d.rho.resize(f.re.size());
    double n2 = f.norm2();
    if (!(n2 > 0.0)) throw ValidationError("density_of: wavefield has zero norm");
    for (int i = 0; i < f.grid.n_cells; ++i) d.rho[i] = f.density(i) / n2;
    return d;
}

/// Normalized Gaussian packet exp(-(x-x0)^2/(4 sigma^2) + i k0 x); sigma is the
/// position standard deviation of |psi|^2.
inline WaveField gaussian_packet(const Grid1D& grid, double x0, double sigma, double k0) {
    if (!(sigma > 0.0)) throw ValidationError("gaussian_packet: sigma must be positive");
    WaveField f = make_wavefield(grid);
    for (int i = 0; i < grid.n_cells; ++i) {
        const double x = grid.center(i);
        const double amp = std::exp(-(x - x0) * (x - x0) / (4.0 * sigma * sigma));
        f.re[i] = amp * std::cos(k0 * x);
        f.im[i] = amp * std::sin(k0 * x);
    }
    normalize(f);
    return f;
}

/// Rectangular potential bump: value `height` over [center - width/2, center + width/2].
struct Barrier {
    double center = 0.0;
    double width = 0.0;
    double height = 0.0;
};

enum class BaseKind { zero, linear, harmonic };

/// Smooth analytic part of the potential landscape.
/// linear:   v(x) = slope * x
/// harmonic: v(x) = 0.5 * k * (x - x0)^2
struct BasePotential {
    BaseKind kind = BaseKind::zero;
    double slope = 0.0;
    double k = 0.0;
    double x0 = 0.0;

    double value(double x) const {
        switch (kind) {
            case BaseKind::zero: return 0.0;
            case BaseKind::linear: return slope * x;
            case BaseKind::harmonic: return 0.5 * k * (x - x0) * (x - x0);
        }
        return 0.0;
    }
    double gradient(double x) const {
        switch (kind) {
            case BaseKind::zero: return 0.0;
            case BaseKind::linear: return slope;
            case BaseKind::harmonic: return k * (x - x0);
        }
        return 0.0;
    }
};

/// Compiled potential: smooth base plus rectangular barriers. Overlapping
/// barriers combine by pointwise max. Barrier levels at or above `wall_height`
/// are treated as impenetrable by both engines.
struct PotentialField {
    Grid1D grid;
    BasePotential base;
    std::vector<Barrier> barriers;
    double wall_height = 1e6;

    std::vector<double> v;             // compiled total, per cell
    std::vector<double> barrier_level; // max covering barrier height, per cell (0 if none)

    bool is_wall(int i) const { return barrier_level[i] >= wall_height; }

    double v_max_soft() const {
        double m = 0.0;
        for (int i = 0; i < grid.n_cells; ++i)
            if (!is_wall(i)) m = std::max(m, std::abs(v[i]));
        return m;
    }
};

/// Compile barriers + base onto the grid. A cell is covered by a barrier when
/// its center lies in the closed interval [center - width/2, center + width/2];
/// barriers may hang over the domain edge (they are clipped) but must intersect it.
inline PotentialField compile_potential(const Grid1D& grid, const BasePotential& base,
                                        const std::vector<Barrier>& barriers,
                                        double wall_height = 1e6) {
    PotentialField f;
    f.grid = grid;
    f.base = base;
    f.barriers = barriers;
    f.wall_height = wall_height;
    f.v.assign(static_cast<std::size_t>(grid.n_cells), 0.0);
    f.barrier_level.assign(static_cast<std::size_t>(grid.n_cells), 0.0);

    for (const Barrier& b : barriers) {
        if (!(b.width > 0.0))
            throw ValidationError("barrier: width must be positive");
        if (b.height < 0.0)
            throw ValidationError("barrier: height must be non-negative");
        double lo = b.center - 0.5 * b.width;
        double hi = b.center + 0.5 * b.width;
        if (hi < grid.x_min || lo > grid.x_max)
            throw ValidationError("barrier: [" + std::to_string(lo) + ", " + std::to_string(hi) +
                                  "] lies outside the domain");
    }
    for (int i = 0; i < grid.n_cells; ++i) {
        double xc = grid.center(i);
        double lvl = 0.0;
        for (const Barrier& b : barriers) {
            if (xc >= b.center - 0.5 * b.width && xc <= b.center + 0.5 * b.width)
                lvl = std::max(lvl, b.height);
        }
        f.barrier_level[i] = lvl;
        f.v[i] = base.value(xc) + lvl;
    }
    return f;
}

inline PotentialField zero_potential(const Grid1D& grid) {
    return compile_potential(grid, BasePotential{}, {});
}

} // namespace dds
