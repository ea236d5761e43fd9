#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dds/config.hpp"
#include "dds/fields.hpp"
#include "dds/grid.hpp"

namespace dds {

/// Baseline parameters shared by every scenario: a 64-cell unit-spacing box
/// with impenetrable end cells, weighted mode, and the thin-layer hop pinned
/// to exactly one cell per step (max_speed * dt = dx).
inline ExperimentConfig default_config(const std::string& scenario) {
    ExperimentConfig c;
    c.scenario = scenario;
    if (scenario == "gaussian_dispersion") {
        c.sigma = 3.2; // domain length / 20
        c.center = 32.0;
        c.k0 = 0.0;
        c.t_final = 40.0;
    } else if (scenario == "ground_vs_modulus") {
        c.eigenmode = 1;
        c.t_final = 30.0;
        // coarse cadence: the stability contrast is about the established decay
        // regime, not the first few sampling-startup steps
        c.snapshot_every = 12;
        c.fd_dt_factor = 0.05;
    } else if (scenario == "two_packet_interference") {
        c.sigma = 4.0;
        c.k0 = 0.8;
        // the reference packets close at 2 sin(k0) per unit time, meeting near
        // t = 22.3; the horizon covers the full crossing
        c.t_final = 24.0;
        c.snapshot_every = 2;
        c.fd_dt_factor = 0.05;
    } else if (scenario == "double_well") {
        c.sigma = 3.0;
        c.center = 16.0;
        // over-barrier regime: packet energy k0^2/2 = 0.32 is twice the barrier,
        // so the reference sloshes between the wells with period ~145 and the
        // horizon covers a full cycle plus change
        c.k0 = 0.8;
        c.barrier_center = 32.0;
        c.barrier_width = 4.0;
        c.barrier_height = 0.16;
        c.t_final = 240.0;
        c.snapshot_every = 8;
        c.smoothing_every = 16;
        // the explicit scheme amplifies cell-scale modes by ~exp(2 t dt); this
        // horizon needs a small step for the reference to stay meaningful
        c.fd_dt_factor = 0.01;
    } else {
        throw ValidationError("default_config: unknown scenario '" + scenario + "'");
    }
    return c;
}

/// Hard walls occupying the outermost cell on each side (they stop swarm
/// samples and pin the wavefunction to zero), plus the scenario's barrier.
inline PotentialField scenario_potential(const ExperimentConfig& c) {
    const Grid1D grid = config_grid(c);
    const double dx = grid.dx();
    std::vector<Barrier> barriers;
    if (!grid.periodic) {
        barriers.push_back({grid.x_min + 0.5 * dx, dx, 1e9});
        barriers.push_back({grid.x_max - 0.5 * dx, dx, 1e9});
    }
    if (c.scenario == "double_well" && c.barrier_height > 0.0)
        barriers.push_back({c.barrier_center, c.barrier_width, c.barrier_height});
    return compile_potential(grid, BasePotential{}, barriers);
}

inline void mask_walls(WaveField& f, const PotentialField& pot) {
    for (int i = 0; i < f.grid.n_cells; ++i)
        if (pot.is_wall(i)) {
            f.re[i] = 0.0;
            f.im[i] = 0.0;
        }
    normalize(f);
}

/// Exact eigenvector of the discrete Dirichlet Laplacian on the interior
/// cells: with M interior cells, mode n is sin(n pi (j+1) / (M+1)). Under the
/// masked explicit scheme its density is stationary apart from the Euler norm
/// drift, so it doubles as the stationarity reference.
inline WaveField eigenmode_wavefunction(const ExperimentConfig& c, const PotentialField& pot,
                                        int mode) {
    const Grid1D grid = config_grid(c);
    int first = 0;
    while (first < grid.n_cells && pot.is_wall(first)) ++first;
    int last = grid.n_cells - 1;
    while (last >= 0 && pot.is_wall(last)) --last;
    const int interior = last - first + 1;
    if (interior < 3) throw ValidationError("eigenmode: no interior cells between the walls");
    if (mode < 1 || mode > interior) throw ValidationError("eigenmode: mode out of range");
    for (int i = first; i <= last; ++i)
        if (pot.is_wall(i))
            throw ValidationError("eigenmode: interior must be wall-free (no inner barrier)");

    WaveField f = make_wavefield(grid);
    const double pi = 3.141592653589793238462643;
    for (int j = 0; j < interior; ++j)
        f.re[first + j] = std::sin(mode * pi * (j + 1) / (interior + 1.0));
    normalize(f);
    return f;
}

/// Tent amplitude 1 - |2 x / L - 1| over the domain (the modulus-shaped state
/// contrasted with the smooth eigenmode in the stationarity study).
inline WaveField modulus_wavefunction(const ExperimentConfig& c, const PotentialField& pot) {
    const Grid1D grid = config_grid(c);
    WaveField f = make_wavefield(grid);
    const double length = grid.length();
    for (int i = 0; i < grid.n_cells; ++i) {
        const double u = 2.0 * (grid.center(i) - grid.x_min) / length - 1.0;
        f.re[i] = std::max(0.0, 1.0 - std::abs(u));
    }
    mask_walls(f, pot);
    return f;
}

/// The scenario's starting wavefunction (both engines start from it: the
/// swarm is sampled from the same field the reference scheme evolves).
inline WaveField initial_wavefunction(const ExperimentConfig& c, const PotentialField& pot) {
    const Grid1D grid = config_grid(c);
    if (c.scenario == "gaussian_dispersion" || c.scenario == "double_well") {
        WaveField f = gaussian_packet(grid, c.center, c.sigma, c.k0);
        mask_walls(f, pot);
        return f;
    }
    if (c.scenario == "ground_vs_modulus") return modulus_wavefunction(c, pot);
    if (c.scenario == "two_packet_interference") {
        const double length = grid.length();
        const WaveField left =
            gaussian_packet(grid, grid.x_min + 0.25 * length, c.sigma, c.k0);
        const WaveField right =
            gaussian_packet(grid, grid.x_min + 0.75 * length, c.sigma, -c.k0);
        WaveField f = make_wavefield(grid);
        for (int i = 0; i < grid.n_cells; ++i) {
            f.re[i] = left.re[i] + right.re[i];
            f.im[i] = left.im[i] + right.im[i];
        }
        mask_walls(f, pot);
        return f;
    }
    throw ValidationError("initial_wavefunction: unknown scenario '" + c.scenario + "'");
}

} // namespace dds
