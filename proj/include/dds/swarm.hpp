#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dds/fields.hpp"
#include "dds/grid.hpp"

namespace dds {

/// Weighted point particle of the swarm. `weight` counts samples (integral in
/// integer mode), `internal_energy` is a rolling diagnostic store of kinetic
/// energy lost to inelastic merges, `thin` marks thin-layer children between
/// explosion and the following rearrangement.
struct Simplex {
    double position = 0.0;
    double speed = 0.0;
    double weight = 0.0;
    double shift = 0.0;
    double internal_energy = 0.0;
    bool thin = false;
};

/// Engine knobs for the swarm stepper.
struct DdsParams {
    double explosion_fraction = 0.1; // thin-layer weight fraction launched per direction
    double max_speed = 1.0;          // launch speed of thin-layer samples
    double dt = 0.1;                 // step duration

    bool integer_mode = false;   // integral weights + stochastic rounding
    std::uint64_t rng_seed = 0;  // seed for integer-mode rounding draws

    // Waiting mode keeps sub-cell displacement through rearrangement so slow
    // bulk motion survives re-binning; off snaps residents to cell centers.
    bool waiting_mode = false;

    // Derived couplings, refreshed from grid + constants at swarm construction.
    double intensity_i = 0.0;     // density-gradient intensity
    double intensity_kappa = 0.0; // potential-gradient intensity
};

/// Density-gradient and potential couplings of the stream-change law for a
/// given grain: I = hbar^2 / (2 m^2 dx^3), kappa = hbar / (m dx).
struct DdsIntensities {
    double density_gradient = 0.0;
    double potential = 0.0;
};

inline DdsIntensities intensity_params(const Grid1D& grid, const PhysicalConstants& c) {
    const double dx = grid.dx();
    return DdsIntensities{
        c.hbar * c.hbar / (2.0 * c.mass * c.mass * dx * dx * dx),
        c.hbar / (c.mass * dx),
    };
}

inline void refresh_intensities(DdsParams& p, const Grid1D& grid, const PhysicalConstants& c) {
    DdsIntensities k = intensity_params(grid, c);
    p.intensity_i = k.density_gradient;
    p.intensity_kappa = k.potential;
}

struct Swarm {
    Grid1D grid;
    PhysicalConstants constants;
    DdsParams params;
    std::vector<Simplex> simplexes;
    double total_weight_initial = 0.0;
};

inline double total_weight(const Swarm& s) {
    double w = 0.0;
    for (const Simplex& p : s.simplexes) w += p.weight;
    return w;
}

inline double total_momentum(const Swarm& s) {
    double p = 0.0;
    for (const Simplex& q : s.simplexes) p += q.weight * q.speed * s.constants.mass;
    return p;
}

inline double total_internal_energy(const Swarm& s) {
    double e = 0.0;
    for (const Simplex& q : s.simplexes) e += q.internal_energy;
    return e;
}

inline Swarm make_swarm(const Grid1D& grid, const PhysicalConstants& constants,
                        DdsParams params, std::vector<Simplex> simplexes) {
    validate(constants);
    if (!(params.explosion_fraction > 0.0) || !(params.explosion_fraction < 0.5))
        throw ValidationError("dds: explosion_fraction must lie in (0, 1/2)");
    if (!(params.dt > 0.0)) throw ValidationError("dds: dt must be positive");
    if (!(params.max_speed > 0.0)) throw ValidationError("dds: max_speed must be positive");
    refresh_intensities(params, grid, constants);

    Swarm s;
    s.grid = grid;
    s.constants = constants;
    s.params = params;
    s.simplexes = std::move(simplexes);
    for (const Simplex& q : s.simplexes) {
        if (!(q.weight >= 0.0) || !std::isfinite(q.weight))
            throw ValidationError("swarm: weights must be finite and non-negative");
        if (!grid.contains(q.position))
            throw DomainEscapeError("swarm: simplex at " + std::to_string(q.position) +
                                    " outside domain");
    }
    s.total_weight_initial = total_weight(s);
    if (!(s.total_weight_initial > 0.0))
        throw ValidationError("swarm: total weight must be positive");
    return s;
}

/// Per-cell probability density carried by the swarm: sum of weights in the
/// cell / (dx * total weight). Never divides by the local density.
inline DensityField density(const Swarm& s) {
    if (s.simplexes.empty()) throw ValidationError("density: empty swarm");
    double w_tot = total_weight(s);
    if (!(w_tot > 0.0)) throw ValidationError("density: zero total weight");

    DensityField d;
    d.grid = s.grid;
    d.rho.assign(static_cast<std::size_t>(s.grid.n_cells), 0.0);
    for (const Simplex& q : s.simplexes)
        d.rho[static_cast<std::size_t>(s.grid.cell_of(q.position))] += q.weight;
    double inv = 1.0 / (s.grid.dx() * w_tot);
    for (auto& r : d.rho) r *= inv;
    return d;
}

/// Per-cell mass-weighted mean speed; cells without weight report 0.
inline std::vector<double> cell_mean_speeds(const Swarm& s) {
    std::vector<double> mom(static_cast<std::size_t>(s.grid.n_cells), 0.0);
    std::vector<double> mass(static_cast<std::size_t>(s.grid.n_cells), 0.0);
    for (const Simplex& q : s.simplexes) {
        auto i = static_cast<std::size_t>(s.grid.cell_of(q.position));
        mom[i] += q.weight * q.speed;
        mass[i] += q.weight;
    }
    for (std::size_t i = 0; i < mom.size(); ++i) mom[i] = mass[i] > 0.0 ? mom[i] / mass[i] : 0.0;
    return mom;
}

} // namespace dds
