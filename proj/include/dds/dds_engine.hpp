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

/// Explosion fraction that makes the measured swarm stream change reproduce
/// -I grad(rho) dt on a density ramp from rest: a = calibration * I * dt /
/// (2 max_speed). Exact (calibration = 1) in weighted mode whenever thin
/// layers deposit into the adjacent cell, which max_speed * dt = dx
/// guarantees for every sub-cell start position; shipped configs pin that
/// regime. The calibration constant is measured once by the linear-ramp
/// oracle and stored alongside the configs.
inline double recommended_explosion_fraction(const Grid1D& grid, const PhysicalConstants& c,
                                             double dt, double max_speed,
                                             double calibration = 1.0) {
    if (!(max_speed > 0.0))
        throw ValidationError("recommended_explosion_fraction: max_speed must be positive");
    const DdsIntensities k = intensity_params(grid, c);
    return calibration * k.density_gradient * dt / (2.0 * max_speed);
}

/// Interfaces between regions of different compiled barrier level. A sample
/// crossing a face toward higher level passes only if its kinetic energy per
/// unit weight exceeds the level step; otherwise it reflects elastically.
struct BarrierFace {
    double x = 0.0;
    double level_left = 0.0;
    double level_right = 0.0;
};

inline std::vector<BarrierFace> barrier_faces(const PotentialField& pot) {
    std::vector<BarrierFace> faces;
    const Grid1D& g = pot.grid;
    for (int i = 0; i + 1 < g.n_cells; ++i) {
        if (pot.barrier_level[i] != pot.barrier_level[i + 1])
            faces.push_back({g.x_min + (i + 1) * g.dx(), pot.barrier_level[i],
                             pot.barrier_level[i + 1]});
    }
    return faces;
}

struct StepReport {
    double weight_before = 0.0;
    double weight_after = 0.0;
    double momentum_before = 0.0;
    double momentum_after = 0.0;
    double kick_momentum = 0.0;       // impulse applied by potential-gradient kicks
    double reflection_impulse = 0.0;  // impulse exchanged with walls/barriers
    double momentum_residual = 0.0;   // after - before - kicks - reflections
    double internal_energy_gain = 0.0;
    double separation_ratio = 0.0;    // mean |resident speed| / max_speed
    int speed_violations = 0;         // residents at or above max_speed
    std::vector<double> thin_arrival_fraction; // per cell, measured before merging
};

namespace engine_detail {

struct FlightTotals {
    double kick_momentum = 0.0;
    double reflection_impulse = 0.0;
};

// Advance one sample by speed*dt with reflection/transmission at barrier
// faces. Returns the final position and mutates speed on reflection.
inline double trace_path(double x, double& speed, double dt, const Grid1D& grid,
                         const std::vector<BarrierFace>& faces, double mass, double weight,
                         FlightTotals* totals) {
    double remaining = speed * dt;
    const BarrierFace* settled = nullptr; // face at exactly x already negotiated
    int guard = 0;
    while (remaining != 0.0) {
        if (++guard > 128)
            throw SimError("flight: reflection loop failed to terminate");
        const bool right = remaining > 0.0;
        const double target = x + remaining;

        // nearest qualifying face in the direction of motion
        const BarrierFace* hit = nullptr;
        double hit_dist = 0.0;
        for (const BarrierFace& f : faces) {
            if (&f == settled) continue; // crossed or bounced off without moving away yet
            double d = right ? f.x - x : x - f.x;
            bool reachable = right ? (f.x > x && f.x <= target)
                                   : (f.x < x && f.x >= target) ;
            // a sample sitting exactly on a face belongs to the right side;
            // moving left it must negotiate that face before leaving
            if (!right && f.x == x) { reachable = true; d = 0.0; }
            if (reachable && (hit == nullptr || d < hit_dist)) {
                hit = &f;
                hit_dist = d;
            }
        }
        if (hit == nullptr) {
            x = target;
            break;
        }

        const double step_up = right ? hit->level_right - hit->level_left
                                     : hit->level_left - hit->level_right;
        x = hit->x;
        remaining -= right ? hit_dist : -hit_dist;
        settled = hit;
        const double kinetic = 0.5 * mass * speed * speed;
        bool ends_left_of_face = false;
        if (step_up > 0.0 && kinetic <= step_up) {
            if (totals) totals->reflection_impulse += weight * mass * (-2.0 * speed);
            speed = -speed;
            remaining = -remaining;
            ends_left_of_face = right && remaining == 0.0;
        } else {
            // passes the face with speed unchanged
            ends_left_of_face = !right && remaining == 0.0;
        }
        // positions exactly on a face are assigned to the right cell, so a
        // sample whose path ends on the face it just left must sit one ulp
        // inside the left cell
        if (ends_left_of_face)
            x = std::nextafter(x, grid.x_min - 1.0);
    }
    if (!grid.contains(x))
        throw DomainEscapeError("flight: sample escaped the domain (no wall at the boundary)");
    return x;
}

} // namespace engine_detail

/// Split every simplex into two thin-layer children launched at speed -/+
/// max_speed plus a resident carrying the rest. Weighted mode splits weights
/// exactly; integer mode rounds stochastically per (step, cell, occurrence)
/// so the triple still sums to the parent weight.
inline Swarm explosion_phase(const Swarm& s, std::uint64_t step_index = 0) {
    const double a = s.params.explosion_fraction;
    const double c = s.params.max_speed;

    Swarm out = s;
    out.simplexes.clear();
    out.simplexes.reserve(s.simplexes.size() * 3);

    std::vector<int> occurrence(static_cast<std::size_t>(s.grid.n_cells), 0);

    for (const Simplex& q : s.simplexes) {
        if (q.weight <= 0.0) continue;
        double wl, wr;
        if (s.params.integer_mode) {
            const int cell = s.grid.cell_of(q.position);
            const int occ = occurrence[static_cast<std::size_t>(cell)]++;
            const double ul = rng::uniform(s.params.rng_seed, step_index,
                                           static_cast<std::uint64_t>(cell),
                                           static_cast<std::uint64_t>(2 * occ));
            const double ur = rng::uniform(s.params.rng_seed, step_index,
                                           static_cast<std::uint64_t>(cell),
                                           static_cast<std::uint64_t>(2 * occ + 1));
            wl = static_cast<double>(rng::stochastic_round(a * q.weight, ul));
            wr = static_cast<double>(rng::stochastic_round(a * q.weight, ur));
            wl = std::min(wl, q.weight);
            wr = std::min(wr, q.weight - wl);
        } else {
            wl = a * q.weight;
            wr = wl;
        }
        const double wc = q.weight - wl - wr; // exact complement keeps the sum at w

        Simplex left = q;
        left.weight = wl;
        left.speed = q.speed - c;
        left.thin = true;
        left.internal_energy = 0.0;

        Simplex right = q;
        right.weight = wr;
        right.speed = q.speed + c;
        right.thin = true;
        right.internal_energy = 0.0;

        Simplex rest = q;
        rest.weight = wc;
        rest.thin = false;

        // the resident keeps the stored internal energy; if it vanished in
        // integer mode, hand the store to the heavier child
        if (wc <= 0.0 && q.internal_energy > 0.0) {
            if (wl >= wr) left.internal_energy = q.internal_energy;
            else right.internal_energy = q.internal_energy;
        }

        if (wl > 0.0) out.simplexes.push_back(left);
        if (wr > 0.0) out.simplexes.push_back(right);
        if (wc > 0.0) out.simplexes.push_back(rest);
    }
    return out;
}

/// Kick every simplex downhill along the smooth part of the potential
/// (dv = -kappa dt grad V at its position), then advance by speed*dt with
/// elastic reflection / energy-gated transmission at barrier faces. Barrier
/// steps act only through the face rule so the wall impulse is not counted twice.
inline Swarm flight_phase(const Swarm& s, const PotentialField& pot,
                          engine_detail::FlightTotals* totals = nullptr) {
    if (pot.grid.n_cells != s.grid.n_cells)
        throw ValidationError("flight: potential grid mismatch");
    const double dt = s.params.dt;
    const double kappa = s.params.intensity_kappa;
    const double m = s.constants.mass;
    const std::vector<BarrierFace> faces = barrier_faces(pot);

    Swarm out = s;
    for (Simplex& q : out.simplexes) {
        if (q.weight <= 0.0) continue;
        const double kick = -kappa * dt * pot.base.gradient(q.position);
        if (totals) totals->kick_momentum += q.weight * m * kick;
        q.speed += kick;
        q.position = engine_detail::trace_path(q.position, q.speed, dt, s.grid, faces, m,
                                               q.weight, totals);
        q.shift = s.grid.shift_of(q.position);
    }
    return out;
}

/// Merge all simplexes of a cell into one resident: weight-summed, speed set to
/// the weighted mean (momentum-conserving association), kinetic-energy deficit
/// accumulated into internal_energy. Waiting mode keeps the weighted mean
/// position so sub-cell drift survives; otherwise residents snap to centers.
/// Members are merged in a canonical order so equal multisets give identical
/// floating-point results regardless of input order.
inline Swarm rearrangement_phase(const Swarm& s, std::vector<double>* thin_fraction = nullptr) {
    const int n = s.grid.n_cells;
    const double m = s.constants.mass;

    std::vector<std::vector<Simplex>> cells(static_cast<std::size_t>(n));
    for (const Simplex& q : s.simplexes) {
        if (q.weight <= 0.0) continue;
        cells[static_cast<std::size_t>(s.grid.cell_of(q.position))].push_back(q);
    }

    if (thin_fraction) thin_fraction->assign(static_cast<std::size_t>(n), 0.0);

    Swarm out = s;
    out.simplexes.clear();
    for (int i = 0; i < n; ++i) {
        auto& members = cells[static_cast<std::size_t>(i)];
        if (members.empty()) continue;
        std::sort(members.begin(), members.end(), [](const Simplex& a, const Simplex& b) {
            if (a.speed != b.speed) return a.speed > b.speed;
            if (a.position != b.position) return a.position < b.position;
            return a.weight > b.weight;
        });

        double w = 0.0, mom = 0.0, kin = 0.0, e_int = 0.0, wx = 0.0, w_thin = 0.0;
        for (const Simplex& q : members) {
            w += q.weight;
            mom += q.weight * q.speed;
            kin += 0.5 * m * q.weight * q.speed * q.speed;
            e_int += q.internal_energy;
            wx += q.weight * q.position;
            if (q.thin) w_thin += q.weight;
        }
        if (thin_fraction) (*thin_fraction)[static_cast<std::size_t>(i)] = w_thin / w;

        Simplex r;
        r.weight = w;
        r.speed = mom / w;
        r.position = s.params.waiting_mode ? wx / w : s.grid.center(i);
        if (s.grid.cell_of(r.position) != i) r.position = s.grid.center(i);
        r.shift = s.grid.shift_of(r.position);
        r.internal_energy = e_int + std::max(0.0, kin - 0.5 * m * w * r.speed * r.speed);
        r.thin = false;
        out.simplexes.push_back(r);
    }
    if (out.simplexes.empty()) throw ValidationError("rearrangement: swarm lost all weight");
    return out;
}

/// One full step: explosion, flight, rearrangement. The report itemizes the
/// momentum ledger (kicks + wall impulses reconcile the momentum change) and
/// the thin/bulk speed-separation diagnostics.
inline Swarm dds_step(const Swarm& s, const PotentialField& pot, StepReport* report = nullptr,
                      std::uint64_t step_index = 0) {
    engine_detail::FlightTotals totals;
    if (report) {
        report->weight_before = total_weight(s);
        report->momentum_before = total_momentum(s);
    }
    const double e_int_before = report ? total_internal_energy(s) : 0.0;

    Swarm exploded = explosion_phase(s, step_index);
    Swarm flown = flight_phase(exploded, pot, &totals);
    std::vector<double> thin_fraction;
    Swarm merged = rearrangement_phase(flown, report ? &thin_fraction : nullptr);

    if (report) {
        report->weight_after = total_weight(merged);
        report->momentum_after = total_momentum(merged);
        report->kick_momentum = totals.kick_momentum;
        report->reflection_impulse = totals.reflection_impulse;
        report->momentum_residual = report->momentum_after - report->momentum_before -
                                    totals.kick_momentum - totals.reflection_impulse;
        report->internal_energy_gain = total_internal_energy(merged) - e_int_before;
        report->thin_arrival_fraction = std::move(thin_fraction);

        double w = 0.0, wv = 0.0;
        int violations = 0;
        for (const Simplex& q : merged.simplexes) {
            w += q.weight;
            wv += q.weight * std::abs(q.speed);
            if (std::abs(q.speed) >= s.params.max_speed) ++violations;
        }
        report->separation_ratio = (w > 0.0) ? (wv / w) / s.params.max_speed : 0.0;
        report->speed_violations = violations;
    }
    return merged;
}

/// Swarm stream at the border between cells i and i+1, in the same
/// density-deposit units as the FD detailed stream: the mean of the two
/// adjacent cell momentum densities, sum(w v) / (W dx^2).
inline double swarm_stream(const Swarm& s, int border) {
    if (border < 0 || border + 1 >= s.grid.n_cells)
        throw ValidationError("swarm_stream: border index out of range");
    const double w_tot = total_weight(s);
    double m_left = 0.0, m_right = 0.0;
    for (const Simplex& q : s.simplexes) {
        const int cell = s.grid.cell_of(q.position);
        if (cell == border) m_left += q.weight * q.speed;
        else if (cell == border + 1) m_right += q.weight * q.speed;
    }
    const double dx = s.grid.dx();
    return 0.5 * (m_left + m_right) / (w_tot * dx * dx);
}

/// Measured change of the swarm stream across a border over one step.
/// On a linear density ramp at rest this reproduces -I grad(rho) dt; on a
/// uniform swarm in a linear potential it reproduces -kappa rho grad(V) dt
/// (both exact in weighted mode with the calibrated explosion fraction).
inline double empirical_stream_change(const Swarm& before, const Swarm& after, int border) {
    if (before.grid.n_cells != after.grid.n_cells || before.grid.dx() != after.grid.dx())
        throw ValidationError("empirical_stream_change: swarms live on different grids");
    return swarm_stream(after, border) - swarm_stream(before, border);
}

} // namespace dds
