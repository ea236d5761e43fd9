#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dds/fields.hpp"
#include "dds/grid.hpp"
#include "dds/rng.hpp"
#include "dds/swarm.hpp"

namespace dds {
namespace bridge {

/// Relative density floor below which a cell is treated as unoccupied: its
/// samples get zero weight and speed, and phases are not defined across it.
constexpr double kDefaultDensityFloor = 1e-6;

namespace detail {

// Wrap an angle difference into (-pi, pi].
inline double wrap_angle(double d) {
    const double two_pi = 6.283185307179586476925287;
    d = std::fmod(d, two_pi);
    if (d <= -3.141592653589793238462643) d += two_pi;
    if (d > 3.141592653589793238462643) d -= two_pi;
    return d;
}

} // namespace detail

/// Born sampling of a wavefunction into a swarm. Weighted mode: one resident
/// per above-floor cell with weight |psi_i|^2 dx W / |psi|^2 (exact). Integer
/// mode: W samples drawn from the same distribution with seeded draws.
/// Speeds are (hbar/m) d(phase)/dx from the unwrapped per-cell phase,
/// centered differences inside each contiguous above-floor run, one-sided at
/// run edges; sub-floor cells carry zero weight and speed.
inline Swarm swarm_from_wavefunction(const WaveField& psi, double total_weight,
                                     const DdsParams& params, const PhysicalConstants& constants,
                                     double density_floor = kDefaultDensityFloor) {
    const int n = psi.grid.n_cells;
    const double norm2 = psi.norm2();
    if (!(norm2 > 0.0)) throw ValidationError("bridge: wavefunction has zero norm");
    if (!(total_weight > 0.0)) throw ValidationError("bridge: total weight must be positive");

    double rho_max = 0.0;
    for (int i = 0; i < n; ++i) rho_max = std::max(rho_max, psi.density(i));
    const double floor_abs = density_floor * rho_max;

    std::vector<bool> occupied(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) occupied[i] = psi.density(i) >= floor_abs && psi.density(i) > 0.0;

    // unwrapped phase per contiguous occupied run
    std::vector<double> phi(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (!occupied[i]) continue;
        double raw = std::atan2(psi.im[i], psi.re[i]);
        if (i > 0 && occupied[i - 1])
            phi[i] = phi[i - 1] + detail::wrap_angle(raw - std::atan2(psi.im[i - 1], psi.re[i - 1]));
        else
            phi[i] = raw;
    }

    const double dx = psi.grid.dx();
    const double v_scale = constants.hbar / constants.mass;
    std::vector<double> speed(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        if (!occupied[i]) continue;
        const bool left = i > 0 && occupied[i - 1];
        const bool right = i + 1 < n && occupied[i + 1];
        if (left && right) speed[i] = v_scale * (phi[i + 1] - phi[i - 1]) / (2.0 * dx);
        else if (right) speed[i] = v_scale * (phi[i + 1] - phi[i]) / dx;
        else if (left) speed[i] = v_scale * (phi[i] - phi[i - 1]) / dx;
        // isolated single-cell run: no gradient information, speed stays 0
    }

    std::vector<Simplex> simplexes;
    if (params.integer_mode) {
        // multinomial sampling over occupied cells via keyed CDF draws
        std::vector<double> cdf;
        std::vector<int> cell_of_bin;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!occupied[i]) continue;
            acc += psi.density(i) * dx / norm2;
            cdf.push_back(acc);
            cell_of_bin.push_back(i);
        }
        if (cdf.empty()) throw ValidationError("bridge: no occupied cells above the floor");
        const long long m = std::llround(total_weight);
        if (m <= 0) throw ValidationError("bridge: integer mode needs total weight >= 1");
        std::vector<long long> counts(cdf.size(), 0);
        for (long long k = 0; k < m; ++k) {
            const double u = rng::uniform(params.rng_seed, 0xb0121, static_cast<std::uint64_t>(k));
            const double target = u * acc;
            auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
            if (it == cdf.end()) --it;
            ++counts[static_cast<std::size_t>(it - cdf.begin())];
        }
        for (std::size_t b = 0; b < counts.size(); ++b) {
            if (counts[b] == 0) continue;
            const int i = cell_of_bin[b];
            simplexes.push_back({psi.grid.center(i), speed[i], static_cast<double>(counts[b]),
                                 0.0, 0.0, false});
        }
    } else {
        for (int i = 0; i < n; ++i) {
            if (!occupied[i]) continue;
            const double w = psi.density(i) * dx * total_weight / norm2;
            simplexes.push_back({psi.grid.center(i), speed[i], w, 0.0, 0.0, false});
        }
    }
    return make_swarm(psi.grid, constants, params, std::move(simplexes));
}

/// Phase restored from swarm speeds by cumulative trapezoid integration of
/// (m/hbar) v from the anchor cell (phase 0 there). Cells separated from the
/// anchor by a sub-floor density gap are marked undefined.
struct PhaseField {
    Grid1D grid;
    std::vector<double> phi;
    std::vector<std::uint8_t> defined;
    int anchor = 0;
};

inline PhaseField phase_from_swarm(const Swarm& s, int anchor,
                                   double density_floor = kDefaultDensityFloor) {
    const int n = s.grid.n_cells;
    if (anchor < 0 || anchor >= n) throw ValidationError("phase: anchor outside grid");

    DensityField rho = density(s);
    std::vector<double> v = cell_mean_speeds(s);
    double rho_max = 0.0;
    for (double r : rho.rho) rho_max = std::max(rho_max, r);
    const double floor_abs = density_floor * rho_max;
    auto occupied = [&](int i) { return rho.rho[i] >= floor_abs && rho.rho[i] > 0.0; };
    if (!occupied(anchor)) throw ValidationError("phase: anchor cell density below the floor");

    PhaseField out;
    out.grid = s.grid;
    out.anchor = anchor;
    out.phi.assign(static_cast<std::size_t>(n), 0.0);
    out.defined.assign(static_cast<std::size_t>(n), 0);
    out.defined[anchor] = 1;

    const double k = s.constants.mass / s.constants.hbar;
    const double dx = s.grid.dx();
    for (int i = anchor + 1; i < n && occupied(i); ++i) {
        out.phi[i] = out.phi[i - 1] + 0.5 * k * (v[i - 1] + v[i]) * dx;
        out.defined[i] = 1;
    }
    for (int i = anchor - 1; i >= 0 && occupied(i); --i) {
        out.phi[i] = out.phi[i + 1] - 0.5 * k * (v[i] + v[i + 1]) * dx;
        out.defined[i] = 1;
    }
    return out;
}

struct BridgeResult {
    WaveField psi;
    std::vector<std::uint8_t> phase_defined;
};

/// Rebuild a normalized wavefunction from swarm density and speeds:
/// |psi_i| = sqrt(rho_i), phase integrated from the anchor. Cells with
/// undefined phase get phase 0 and are flagged.
inline BridgeResult wavefunction_from_swarm(const Swarm& s, int anchor,
                                            double density_floor = kDefaultDensityFloor) {
    DensityField rho = density(s);
    PhaseField ph = phase_from_swarm(s, anchor, density_floor);

    BridgeResult out;
    out.psi = make_wavefield(s.grid);
    out.phase_defined = ph.defined;
    for (int i = 0; i < s.grid.n_cells; ++i) {
        const double amp = std::sqrt(std::max(0.0, rho.rho[i]));
        out.psi.re[i] = amp * std::cos(ph.phi[i]);
        out.psi.im[i] = amp * std::sin(ph.phi[i]);
    }
    normalize(out.psi);
    return out;
}

/// Circulation of the swarm speed field around a periodic domain: sum v_i dx.
/// Requires density above the floor along the whole ring.
inline double loop_integral(const Swarm& s, double density_floor = kDefaultDensityFloor) {
    if (!s.grid.periodic)
        throw TopologyError("loop_integral: domain is not periodic (no closed path)");
    DensityField rho = density(s);
    double rho_max = 0.0;
    for (double r : rho.rho) rho_max = std::max(rho_max, r);
    for (int i = 0; i < s.grid.n_cells; ++i)
        if (!(rho.rho[i] >= density_floor * rho_max) || rho.rho[i] <= 0.0)
            throw ValidationError("loop_integral: density below floor at cell " +
                                  std::to_string(i));
    std::vector<double> v = cell_mean_speeds(s);
    double sum = 0.0;
    for (double vi : v) sum += vi;
    return sum * s.grid.dx();
}

/// Winding number diagnostic: (m/hbar) * circulation / (2 pi). Integer-valued
/// for swarms sampled from single-valued wavefunctions (up to discretization).
inline double loop_winding(const Swarm& s, double density_floor = kDefaultDensityFloor) {
    const double k = s.constants.mass / s.constants.hbar;
    return k * loop_integral(s, density_floor) / 6.283185307179586476925287;
}

/// Rate of change of the circulation between two snapshots dt apart. Stays
/// near zero under smooth evolution (single-valuedness is preserved).
inline double loop_integral_drift(const Swarm& before, const Swarm& after, double dt,
                                  double density_floor = kDefaultDensityFloor) {
    if (!(dt > 0.0)) throw ValidationError("loop_integral_drift: dt must be positive");
    if (before.grid.n_cells != after.grid.n_cells)
        throw ValidationError("loop_integral_drift: snapshots on different grids");
    return (loop_integral(after, density_floor) - loop_integral(before, density_floor)) / dt;
}

} // namespace bridge
} // namespace dds
