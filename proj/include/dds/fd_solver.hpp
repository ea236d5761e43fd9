#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dds/fields.hpp"
#include "dds/grid.hpp"

namespace dds {
namespace fd {

enum class FdMode { standard, shifted };
enum class FdBoundary { reflecting, periodic };

/// Explicit forward-Euler scheme for the split real system
///   d re/dt = -(hbar/2m) Lap im + (V/hbar) im
///   d im/dt = +(hbar/2m) Lap re - (V/hbar) re
/// with a 3-point Laplacian. `shifted` drops the -2*psi Laplacian term, which
/// equals the standard scheme on V + alpha, alpha = -hbar^2/(m dx^2): densities
/// agree up to accumulated O(dt), amplitudes differ by a global phase.
struct FdScheme {
    FdMode mode = FdMode::standard;
    FdBoundary boundary = FdBoundary::reflecting;
    double dt = 0.0;
    double stability_margin = 1.0; // dt must be <= margin * stability_limit
};

/// Largest step the kinetic part tolerates in practice: dx^2 m / (2 hbar).
inline double stability_limit(const Grid1D& grid, const PhysicalConstants& c) {
    return grid.dx() * grid.dx() * c.mass / (2.0 * c.hbar);
}

/// Constant potential shift that cancels the -2*psi Laplacian term in 1-D.
inline double shifted_mode_offset(const Grid1D& grid, const PhysicalConstants& c) {
    return -c.hbar * c.hbar / (c.mass * grid.dx() * grid.dx());
}

namespace detail {

inline void check_step(const WaveField& psi, const PotentialField& v, const FdScheme& s,
                       const PhysicalConstants& c, double dt) {
    if (psi.grid.n_cells != v.grid.n_cells)
        throw ValidationError("fd: wavefield and potential grids differ");
    if (!(dt > 0.0)) throw StabilityError("fd: dt must be positive");
    double limit = s.stability_margin * stability_limit(psi.grid, c);
    if (dt > limit * (1.0 + 1e-12))
        throw StabilityError("fd: dt " + std::to_string(dt) + " exceeds stability bound " +
                             std::to_string(limit));
    // The potential term rotates each cell by V dt / hbar per step; refuse
    // configurations where that rotation alone is already nonsensical.
    if (v.v_max_soft() * dt / c.hbar > 1.0)
        throw StabilityError("fd: potential rotation V*dt/hbar exceeds 1; lower dt or heights");
}

// One Euler step; wall cells (impenetrable barrier levels) are held at zero,
// which gives a hard-wall (Dirichlet) box. Elsewhere boundary closure is
// reflecting (mirror ghost) or periodic.
inline void step_into(const WaveField& in, const PotentialField& pot, const FdScheme& s,
                      const PhysicalConstants& c, double dt, WaveField& out) {
    const int n = in.grid.n_cells;
    const double g = c.gamma(in.grid);
    const bool shifted = s.mode == FdMode::shifted;
    const bool periodic = s.boundary == FdBoundary::periodic;

    out.grid = in.grid;
    out.re.resize(in.re.size());
    out.im.resize(in.im.size());

    auto at = [&](const std::vector<double>& a, int i) -> double {
        if (periodic) return a[static_cast<std::size_t>((i + n) % n)];
        if (i < 0) i = 0;          // mirror ghost: psi(-1) = psi(0)
        if (i >= n) i = n - 1;     // mirror ghost: psi(n) = psi(n-1)
        return a[static_cast<std::size_t>(i)];
    };

    for (int i = 0; i < n; ++i) {
        if (pot.is_wall(i)) {
            out.re[i] = 0.0;
            out.im[i] = 0.0;
            continue;
        }
        const double w = pot.v[i] / c.hbar;
        double lap_re = at(in.re, i - 1) + at(in.re, i + 1);
        double lap_im = at(in.im, i - 1) + at(in.im, i + 1);
        if (!shifted) {
            lap_re -= 2.0 * in.re[i];
            lap_im -= 2.0 * in.im[i];
        }
        out.re[i] = in.re[i] + dt * (-g * lap_im + w * in.im[i]);
        out.im[i] = in.im[i] + dt * (g * lap_re - w * in.re[i]);
    }
}

} // namespace detail

/// Advance one explicit step. Throws StabilityError instead of stepping past
/// the stability bound; the scheme is knowingly unstable over long horizons,
/// callers treat it as a short-horizon oracle.
inline WaveField step_explicit(const WaveField& psi, const PotentialField& v, const FdScheme& s,
                               const PhysicalConstants& c) {
    detail::check_step(psi, v, s, c, s.dt);
    WaveField out;
    detail::step_into(psi, v, s, c, s.dt, out);
    if (!out.is_finite())
        throw StabilityError("fd: state became non-finite (scheme blow-up)");
    return out;
}

/// Signed sample stream through the border between cells i and i+1, positive
/// toward +x, in density-deposit units (d rho/dt contributed to a cell):
///   s_i = 2 gamma (re_i im_{i+1} - im_i re_{i+1}).
/// Continuity holds exactly for the semi-discrete system:
///   d rho_i/dt = s_{i-1} - s_i.
inline double detailed_stream(const WaveField& psi, const PhysicalConstants& c, int border) {
    const int n = psi.grid.n_cells;
    const bool periodic = psi.grid.periodic;
    if (border < 0 || border >= (periodic ? n : n - 1))
        throw ValidationError("detailed_stream: border index out of range");
    const int j = periodic ? (border + 1) % n : border + 1;
    const double g = c.gamma(psi.grid);
    return 2.0 * g * (psi.re[border] * psi.im[j] - psi.im[border] * psi.re[j]);
}

/// Leading-order analytic rate of change of the border stream under the
/// isolated two-cell exchange dynamics, in the same sign convention as
/// detailed_stream:  -I grad(rho) - (2 gamma / hbar) dV rho  (the latter equals
/// -kappa rho grad(V) in natural units). grad uses the forward difference and
/// rho the left cell of the border.
inline double stream_derivative(const WaveField& psi, const PotentialField& v,
                                const PhysicalConstants& c, int border) {
    const int n = psi.grid.n_cells;
    const bool periodic = psi.grid.periodic;
    if (border < 0 || border >= (periodic ? n : n - 1))
        throw ValidationError("stream_derivative: border index out of range");
    const int j = periodic ? (border + 1) % n : border + 1;
    const double g = c.gamma(psi.grid);
    const double drho = psi.density(j) - psi.density(border);
    const double dv = v.v[j] - v.v[border];
    return -2.0 * g * g * drho - 2.0 * g * (dv / c.hbar) * psi.density(border);
}

/// Dropped remainder of the stream-change expansion (diagnostic):
/// 2 gamma dV/hbar * (Re[psi_i* psi_{i+1}] - rho_i).
inline double stream_derivative_remainder(const WaveField& psi, const PotentialField& v,
                                          const PhysicalConstants& c, int border) {
    const int n = psi.grid.n_cells;
    const bool periodic = psi.grid.periodic;
    if (border < 0 || border >= (periodic ? n : n - 1))
        throw ValidationError("stream_derivative_remainder: border index out of range");
    const int j = periodic ? (border + 1) % n : border + 1;
    const double g = c.gamma(psi.grid);
    const double overlap = psi.re[border] * psi.re[j] + psi.im[border] * psi.im[j];
    const double dv = v.v[j] - v.v[border];
    return -2.0 * g * (dv / c.hbar) * (overlap - psi.density(border));
}

struct Snapshot {
    double t = 0.0;
    WaveField psi;
};

/// Evolve to t_final, snapshotting every `snap_every` steps plus the final
/// state (reached with one shortened step when t_final is not a multiple of dt).
inline std::vector<Snapshot> evolve(const WaveField& psi0, const PotentialField& v,
                                    const FdScheme& s, const PhysicalConstants& c,
                                    double t_final, int snap_every) {
    if (!(t_final >= 0.0)) throw ValidationError("evolve: t_final must be non-negative");
    if (snap_every < 1) throw ValidationError("evolve: snap_every must be >= 1");
    detail::check_step(psi0, v, s, c, s.dt);

    std::vector<Snapshot> out;
    out.push_back({0.0, psi0});
    WaveField cur = psi0;
    WaveField next = make_wavefield(psi0.grid);

    long long step = 0;
    double t = 0.0;
    while (t < t_final - 1e-12 * (1.0 + t_final)) {
        double dt = std::min(s.dt, t_final - t);
        detail::step_into(cur, v, s, c, dt, next);
        std::swap(cur, next);
        ++step;
        t = (dt == s.dt) ? static_cast<double>(step) * s.dt : t_final;
        if (!cur.is_finite())
            throw StabilityError("fd: state became non-finite at t=" + std::to_string(t));
        bool final_now = t >= t_final - 1e-12 * (1.0 + t_final);
        if (step % snap_every == 0 || final_now) out.push_back({t, cur});
    }
    return out;
}

} // namespace fd
} // namespace dds
