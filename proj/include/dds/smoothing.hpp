#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "dds/fields.hpp"
#include "dds/swarm.hpp"

namespace dds {

/// Width-3 triangular kernel (1/4, 1/2, 1/4) applied by scattering each source
/// cell to its neighbors. At a non-periodic edge the clipped kernel is
/// renormalized per source cell, so the total is conserved exactly.
inline std::vector<double> smooth_masses(const std::vector<double>& mass, bool periodic = false) {
    const int n = static_cast<int>(mass.size());
    if (n < 3) throw ValidationError("smooth_masses: need at least 3 cells");
    std::vector<double> out(mass.size(), 0.0);
    static constexpr double kKernel[3] = {0.25, 0.5, 0.25};
    for (int i = 0; i < n; ++i) {
        double norm = 0.0;
        for (int d = -1; d <= 1; ++d) {
            const int j = i + d;
            if (periodic || (j >= 0 && j < n)) norm += kKernel[d + 1];
        }
        for (int d = -1; d <= 1; ++d) {
            int j = i + d;
            if (periodic) j = (j + n) % n;
            else if (j < 0 || j >= n) continue;
            out[static_cast<std::size_t>(j)] += mass[static_cast<std::size_t>(i)] *
                                                (kKernel[d + 1] / norm);
        }
    }
    return out;
}

inline DensityField smooth_density(const DensityField& d) {
    DensityField out = d;
    out.rho = smooth_masses(d.rho, d.grid.periodic);
    return out;
}

/// Smooth a swarm's per-cell mass with the triangular kernel, carrying momentum
/// and stored energy along with the weight. The merged speed per cell is the
/// momentum-preserving mean; kinetic energy lost to the averaging is banked as
/// internal energy, so smoothing is dissipative but conservative. Requires
/// weighted mode (fractional weights would break integer-mode invariants).
/// Wall cells of `pot` (if given) are excluded targets, like clipped edges:
/// samples must never end up inside an impenetrable cell.
inline Swarm smooth_swarm(const Swarm& s, const PotentialField* pot = nullptr) {
    if (s.params.integer_mode)
        throw ValidationError("smooth_swarm: smoothing requires weighted mode");
    const int n = s.grid.n_cells;
    const double m = s.constants.mass;
    if (pot && pot->grid.n_cells != n)
        throw ValidationError("smooth_swarm: potential grid mismatch");

    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    std::vector<double> mom(static_cast<std::size_t>(n), 0.0);
    std::vector<double> wx(static_cast<std::size_t>(n), 0.0);
    std::vector<double> kin(static_cast<std::size_t>(n), 0.0);
    std::vector<double> e_int(static_cast<std::size_t>(n), 0.0);

    auto open_cell = [&](int j) {
        if (s.grid.periodic) return !pot || !pot->is_wall(((j % n) + n) % n);
        return j >= 0 && j < n && (!pot || !pot->is_wall(j));
    };

    static constexpr double kKernel[3] = {0.25, 0.5, 0.25};
    for (const Simplex& q : s.simplexes) {
        if (q.weight <= 0.0) continue;
        const int i = s.grid.cell_of(q.position);
        double norm = 0.0;
        for (int d = -1; d <= 1; ++d)
            if (open_cell(i + d)) norm += kKernel[d + 1];
        if (!(norm > 0.0)) throw ValidationError("smooth_swarm: sample boxed in by walls");
        for (int d = -1; d <= 1; ++d) {
            int j = i + d;
            if (!open_cell(j)) continue;
            if (s.grid.periodic) j = ((j % n) + n) % n;
            const double share = q.weight * (kKernel[d + 1] / norm);
            const std::size_t t = static_cast<std::size_t>(j);
            w[t] += share;
            mom[t] += share * q.speed;
            wx[t] += share * q.position;
            kin[t] += 0.5 * m * share * q.speed * q.speed;
            e_int[t] += q.internal_energy * (kKernel[d + 1] / norm);
        }
    }

    Swarm out = s;
    out.simplexes.clear();
    for (int i = 0; i < n; ++i) {
        const std::size_t t = static_cast<std::size_t>(i);
        if (w[t] <= 0.0) continue;
        Simplex r;
        r.weight = w[t];
        r.speed = mom[t] / w[t];
        r.position = s.params.waiting_mode ? wx[t] / w[t] : s.grid.center(i);
        if (s.grid.cell_of(r.position) != i) r.position = s.grid.center(i);
        r.shift = s.grid.shift_of(r.position);
        r.internal_energy = e_int[t] + std::max(0.0, kin[t] - 0.5 * m * w[t] * r.speed * r.speed);
        r.thin = false;
        out.simplexes.push_back(r);
    }
    if (out.simplexes.empty()) throw ValidationError("smooth_swarm: swarm lost all weight");
    return out;
}

} // namespace dds
