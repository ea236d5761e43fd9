#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "dds/errors.hpp"
#include "dds/fields.hpp"
#include "dds/grid.hpp"

namespace dds {

inline double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("l1_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

inline double linf_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("linf_distance: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
    return s;
}

/// Per-cell masses (sum to ~1) of a density field.
inline std::vector<double> cell_masses(const DensityField& d) {
    std::vector<double> m(d.rho.size());
    for (std::size_t i = 0; i < d.rho.size(); ++i) m[i] = d.rho[i] * d.grid.dx();
    return m;
}

/// Shape-deviation metric: L1 distance between the current per-cell masses and
/// a reference (usually t = 0). Stationary states keep it near zero; any
/// redistribution of mass raises it.
inline double deviation_metric(const std::vector<double>& current,
                               const std::vector<double>& reference) {
    return l1_distance(current, reference);
}

/// Count interference-style peaks: local maxima at or above rel_height times
/// the global maximum, with adjacent candidates merged unless the profile dips
/// below dip_frac times the lower peak between them.
inline int count_peaks(const std::vector<double>& mass, double rel_height = 0.15,
                       double dip_frac = 0.8) {
    const int n = static_cast<int>(mass.size());
    if (n < 3) return 0;
    double peak_max = 0.0;
    for (double v : mass) peak_max = std::max(peak_max, v);
    if (!(peak_max > 0.0)) return 0;
    const double floor_h = rel_height * peak_max;

    std::vector<int> candidates;
    for (int i = 1; i + 1 < n; ++i) {
        if (mass[i] >= floor_h && mass[i] > mass[i - 1] && mass[i] >= mass[i + 1])
            candidates.push_back(i);
    }
    // also admit edge maxima so half-fringes at walls are not lost
    if (n >= 2 && mass[0] >= floor_h && mass[0] > mass[1]) candidates.insert(candidates.begin(), 0);
    if (n >= 2 && mass[n - 1] >= floor_h && mass[n - 1] > mass[n - 2]) candidates.push_back(n - 1);
    if (candidates.empty()) return 0;

    std::vector<int> kept;
    kept.push_back(candidates[0]);
    for (std::size_t k = 1; k < candidates.size(); ++k) {
        const int prev = kept.back();
        const int cur = candidates[k];
        double valley = mass[prev];
        for (int i = prev; i <= cur; ++i) valley = std::min(valley, mass[i]);
        const double lower = std::min(mass[prev], mass[cur]);
        if (valley < dip_frac * lower) {
            kept.push_back(cur);
        } else if (mass[cur] > mass[prev]) {
            kept.back() = cur; // same fringe, keep the higher summit
        }
    }
    return static_cast<int>(kept.size());
}

/// Mass fraction strictly left of x_split (cells are assigned by center).
inline double left_fraction(const std::vector<double>& mass, const Grid1D& grid, double x_split) {
    if (static_cast<int>(mass.size()) != grid.n_cells)
        throw ValidationError("left_fraction: size mismatch");
    double s = 0.0;
    for (int i = 0; i < grid.n_cells; ++i)
        if (grid.center(i) < x_split) s += mass[static_cast<std::size_t>(i)];
    return s;
}

inline double series_amplitude(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    const auto [lo, hi] = std::minmax_element(series.begin(), series.end());
    return *hi - *lo;
}

/// Direction reversals of a noisy series with hysteresis: a reversal is
/// counted when the series retreats from its running extreme by more than h.
/// A full oscillation (down and back, or up and back) is two reversals.
inline int count_reversals(const std::vector<double>& series, double h) {
    if (series.size() < 2 || !(h > 0.0)) return 0;
    int reversals = 0;
    int direction = 0; // 0 unknown, +1 rising, -1 falling
    double extreme = series[0];
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double v = series[i];
        if (direction >= 0 && v > extreme) extreme = std::max(extreme, v);
        if (direction <= 0 && v < extreme) extreme = std::min(extreme, v);
        if (direction == 0) {
            if (v > series[0] + h) { direction = 1; extreme = v; }
            else if (v < series[0] - h) { direction = -1; extreme = v; }
        } else if (direction == 1) {
            if (v > extreme) extreme = v;
            else if (v < extreme - h) { ++reversals; direction = -1; extreme = v; }
        } else {
            if (v < extreme) extreme = v;
            else if (v > extreme + h) { ++reversals; direction = 1; extreme = v; }
        }
    }
    return reversals;
}

} // namespace dds
