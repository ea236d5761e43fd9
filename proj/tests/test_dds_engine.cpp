#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dds/dds_engine.hpp"
#include "dds/rng.hpp"
#include "dds/swarm.hpp"

using namespace dds;

namespace {

PotentialField walled_box(const Grid1D& g, BasePotential base = {},
                          std::vector<Barrier> extra = {}) {
    const double dx = g.dx();
    extra.push_back({g.x_min + 0.5 * dx, dx, 1e9});
    extra.push_back({g.x_max - 0.5 * dx, dx, 1e9});
    return compile_potential(g, base, extra);
}

DdsParams natural_params(const Grid1D& g, const PhysicalConstants& c, bool integer_mode = false,
                         bool waiting = true) {
    DdsParams p;
    p.dt = 0.5;
    p.max_speed = g.dx() / p.dt; // thin layers hop exactly one cell
    p.explosion_fraction = recommended_explosion_fraction(g, c, p.dt, p.max_speed);
    p.integer_mode = integer_mode;
    p.waiting_mode = waiting;
    p.rng_seed = 17;
    return p;
}

Swarm cells_at_rest(const Grid1D& g, const PhysicalConstants& c, const DdsParams& p,
                    const std::vector<double>& weights, double speed = 0.0) {
    std::vector<Simplex> xs;
    for (int i = 0; i < g.n_cells; ++i) {
        if (weights[static_cast<std::size_t>(i)] <= 0.0) continue;
        Simplex q;
        q.position = g.center(i);
        q.speed = speed;
        q.weight = weights[static_cast<std::size_t>(i)];
        xs.push_back(q);
    }
    return make_swarm(g, c, p, std::move(xs));
}

} // namespace

TEST_CASE("recommended explosion fraction formula") {
    const Grid1D g = make_grid(0.0, 32.0, 32);
    const PhysicalConstants c;
    const double a = recommended_explosion_fraction(g, c, 0.5, 2.0);
    // I = hbar^2/(2 m^2 dx^3) = 0.5; a = I dt / (2 max_speed)
    CHECK(a == doctest::Approx(0.5 * 0.5 / 4.0));
    CHECK(a > 0.0);
    CHECK(a < 0.5);
}

TEST_CASE("density ramp from rest reproduces the stream law exactly") {
    const Grid1D g = make_grid(0.0, 32.0, 32);
    const PhysicalConstants c;
    const DdsParams p = natural_params(g, c);
    const PotentialField pot = walled_box(g);

    std::vector<double> w(32, 0.0);
    for (int i = 1; i <= 30; ++i) w[static_cast<std::size_t>(i)] = 100.0 + 2.0 * i;
    const Swarm before = cells_at_rest(g, c, p, w);
    const double w_tot = total_weight(before);

    const Swarm after = dds_step(before, pot);

    const double intensity = before.params.intensity_i;
    for (int b = 5; b <= 25; ++b) {
        const double rho_b = w[static_cast<std::size_t>(b)] / (w_tot * g.dx());
        const double rho_b1 = w[static_cast<std::size_t>(b + 1)] / (w_tot * g.dx());
        const double target = -intensity * ((rho_b1 - rho_b) / g.dx()) * p.dt;
        const double measured = empirical_stream_change(before, after, b);
        CHECK(measured == doctest::Approx(target).epsilon(1e-12));
    }
}

TEST_CASE("uniform swarm in a linear potential reproduces the drift term exactly") {
    const Grid1D g = make_grid(0.0, 32.0, 32); // dx = 1: the natural-unit regime
    const PhysicalConstants c;
    const DdsParams p = natural_params(g, c);
    BasePotential base;
    base.kind = BaseKind::linear;
    base.slope = 0.08;
    const PotentialField pot = walled_box(g, base);

    std::vector<double> w(32, 0.0);
    for (int i = 1; i <= 30; ++i) w[static_cast<std::size_t>(i)] = 50.0;
    const Swarm before = cells_at_rest(g, c, p, w);
    const double w_tot = total_weight(before);

    StepReport report;
    const Swarm after = dds_step(before, pot, &report);

    for (int b = 3; b <= 27; ++b) {
        const double rho = w[static_cast<std::size_t>(b)] / (w_tot * g.dx());
        const double target = -before.params.intensity_kappa * rho * base.slope * p.dt;
        const double measured = empirical_stream_change(before, after, b);
        CHECK(measured == doctest::Approx(target).epsilon(1e-12));
    }
    // ledger: momentum change equals applied kicks plus wall impulses
    CHECK(report.momentum_residual ==
          doctest::Approx(0.0).epsilon(1e-9 * std::abs(report.kick_momentum)));
}

TEST_CASE("weighted explosion splits exactly; integer explosion rounds and caps") {
    const Grid1D g = make_grid(0.0, 8.0, 8);
    const PhysicalConstants c;
    DdsParams p = natural_params(g, c);
    p.explosion_fraction = 0.1;

    SUBCASE("weighted") {
        Swarm s = cells_at_rest(g, c, p, {0, 0, 0, 7.0, 0, 0, 0, 0});
        const Swarm e = explosion_phase(s, 0);
        REQUIRE(e.simplexes.size() == 3);
        CHECK(e.simplexes[0].weight == doctest::Approx(0.7));
        CHECK(e.simplexes[0].speed == doctest::Approx(-2.0));
        CHECK(e.simplexes[0].thin);
        CHECK(e.simplexes[1].weight == doctest::Approx(0.7));
        CHECK(e.simplexes[1].speed == doctest::Approx(2.0));
        CHECK(e.simplexes[2].weight == doctest::Approx(5.6));
        CHECK_FALSE(e.simplexes[2].thin);
        CHECK(total_weight(e) == doctest::Approx(7.0).epsilon(1e-15));
    }
    SUBCASE("integer mode: weights stay integral and sum to the parent") {
        p.integer_mode = true;
        double mean_left = 0.0;
        const int trials = 4000;
        for (int t = 0; t < trials; ++t) {
            Swarm s = cells_at_rest(g, c, p, {0, 0, 0, 40.0, 0, 0, 0, 0});
            const Swarm e = explosion_phase(s, static_cast<std::uint64_t>(t));
            double sum = 0.0;
            for (const Simplex& q : e.simplexes) {
                CHECK(q.weight == std::floor(q.weight));
                sum += q.weight;
                if (q.thin && q.speed < 0.0) mean_left += q.weight;
            }
            CHECK(sum == 40.0);
        }
        mean_left /= trials;
        CHECK(mean_left == doctest::Approx(0.1 * 40.0).epsilon(0.05));
    }
}

TEST_CASE("flight: energy gate at barrier faces") {
    const Grid1D g = make_grid(0.0, 16.0, 16);
    const PhysicalConstants c;
    DdsParams p;
    p.dt = 1.5;
    p.max_speed = 2.0;
    p.explosion_fraction = 0.1;
    // barrier occupies cells 12..13 -> faces at x=12 and x=14
    const PotentialField pot =
        compile_potential(g, BasePotential{}, {{13.0, 2.0, 2.1}, {0.5, 1.0, 1e9}});

    auto one = [&](double x, double v) {
        Simplex q;
        q.position = x;
        q.speed = v;
        q.weight = 3.0;
        return make_swarm(g, c, p, {q});
    };

    SUBCASE("kinetic energy below the step reflects elastically") {
        engine_detail::FlightTotals totals;
        const Swarm out = flight_phase(one(10.0, 2.0), pot, &totals); // KE = 2.0 < 2.1
        CHECK(out.simplexes[0].position == doctest::Approx(11.0)); // 2 toward, 1 back
        CHECK(out.simplexes[0].speed == doctest::Approx(-2.0));
        CHECK(totals.reflection_impulse == doctest::Approx(3.0 * 1.0 * (-4.0)));
    }
    SUBCASE("kinetic energy above the step passes unchanged") {
        const PotentialField pot_low =
            compile_potential(g, BasePotential{}, {{13.0, 2.0, 1.9}, {0.5, 1.0, 1e9}});
        engine_detail::FlightTotals totals;
        const Swarm out = flight_phase(one(10.0, 2.0), pot_low, &totals); // KE = 2.0 > 1.9
        CHECK(out.simplexes[0].position == doctest::Approx(13.0));
        CHECK(out.simplexes[0].speed == doctest::Approx(2.0));
        CHECK(totals.reflection_impulse == 0.0);
    }
    SUBCASE("downhill crossings never reflect") {
        const Swarm out = flight_phase(one(13.0, 1.0), pot, nullptr); // leaves the barrier
        CHECK(out.simplexes[0].position == doctest::Approx(14.5));
        CHECK(out.simplexes[0].speed == doctest::Approx(1.0));
    }
    SUBCASE("a sample escaping a wall-less boundary is an error") {
        const PotentialField open = zero_potential(g);
        CHECK_THROWS_AS((void)flight_phase(one(15.5, 2.0), open, nullptr), DomainEscapeError);
    }
}

TEST_CASE("rearrangement: momentum-conserving merge with canonical ordering") {
    const Grid1D g = make_grid(0.0, 8.0, 8);
    const PhysicalConstants c;
    DdsParams p = natural_params(g, c);

    Simplex a, b;
    a.position = 3.2;
    a.speed = 1.0;
    a.weight = 2.0;
    b.position = 3.8;
    b.speed = -0.5;
    b.weight = 6.0;

    SUBCASE("weighted mean speed, energy deficit banked") {
        const Swarm merged = rearrangement_phase(make_swarm(g, c, p, {a, b}));
        REQUIRE(merged.simplexes.size() == 1);
        const Simplex& r = merged.simplexes[0];
        CHECK(r.weight == doctest::Approx(8.0));
        CHECK(r.speed == doctest::Approx((2.0 * 1.0 - 6.0 * 0.5) / 8.0));
        const double kin_in = 0.5 * (2.0 * 1.0 + 6.0 * 0.25);
        const double kin_out = 0.5 * 8.0 * r.speed * r.speed;
        CHECK(r.internal_energy == doctest::Approx(kin_in - kin_out));
        CHECK(r.internal_energy >= 0.0);
        // waiting mode keeps the weighted-mean position
        CHECK(r.position == doctest::Approx((2.0 * 3.2 + 6.0 * 3.8) / 8.0));
    }
    SUBCASE("snap mode recenters") {
        DdsParams snap = p;
        snap.waiting_mode = false;
        const Swarm merged = rearrangement_phase(make_swarm(g, c, snap, {a, b}));
        CHECK(merged.simplexes[0].position == doctest::Approx(3.5));
    }
    SUBCASE("input order cannot change the result") {
        const Swarm m1 = rearrangement_phase(make_swarm(g, c, p, {a, b}));
        const Swarm m2 = rearrangement_phase(make_swarm(g, c, p, {b, a}));
        CHECK(m1.simplexes[0].speed == m2.simplexes[0].speed);
        CHECK(m1.simplexes[0].position == m2.simplexes[0].position);
        CHECK(m1.simplexes[0].internal_energy == m2.simplexes[0].internal_energy);
    }
}

TEST_CASE("conservation over many steps") {
    const Grid1D g = make_grid(0.0, 32.0, 32);
    const PhysicalConstants c;
    const PotentialField pot = walled_box(g);

    SUBCASE("weighted mode conserves total weight to rounding") {
        const DdsParams p = natural_params(g, c);
        std::vector<double> w(32, 0.0);
        for (int i = 1; i <= 30; ++i)
            w[static_cast<std::size_t>(i)] =
                std::exp(-(i - 16.0) * (i - 16.0) / 30.0) * 1000.0 + 1.0;
        Swarm s = cells_at_rest(g, c, p, w);
        const double w0 = total_weight(s);
        StepReport report;
        for (int k = 0; k < 200; ++k) {
            s = dds_step(s, pot, &report, static_cast<std::uint64_t>(k));
            CHECK(std::abs(report.weight_after - w0) <= 1e-9 * w0);
            CHECK(std::abs(report.momentum_residual) <= 1e-9 * w0 * p.max_speed);
            CHECK(report.internal_energy_gain >= -1e-12);
        }
    }
    SUBCASE("integer mode conserves the sample count exactly") {
        const DdsParams p = natural_params(g, c, true);
        std::vector<double> w(32, 0.0);
        for (int i = 1; i <= 30; ++i) w[static_cast<std::size_t>(i)] = 500.0;
        Swarm s = cells_at_rest(g, c, p, w);
        const double w0 = total_weight(s);
        for (int k = 0; k < 100; ++k) {
            s = dds_step(s, pot, nullptr, static_cast<std::uint64_t>(k));
            CHECK(total_weight(s) == w0);
            for (const Simplex& q : s.simplexes) CHECK(q.weight == std::floor(q.weight));
        }
    }
}

TEST_CASE("waiting mode carries slow bulk motion; snap mode freezes it") {
    const Grid1D g = make_grid(0.0, 64.0, 64);
    const PhysicalConstants c;
    const PotentialField pot = walled_box(g);

    // wide, gentle packet: the density-gradient speed perturbations stay well
    // below the one-cell hop threshold for the whole horizon, so any transport
    // must come from sub-cell resident drift
    std::vector<double> w(64, 0.0);
    for (int i = 12; i <= 52; ++i)
        w[static_cast<std::size_t>(i)] = std::exp(-(i - 32.0) * (i - 32.0) / 50.0);

    auto mean_position = [&](const Swarm& s) {
        double wx = 0.0, wt = 0.0;
        for (const Simplex& q : s.simplexes) {
            wx += q.weight * q.position;
            wt += q.weight;
        }
        return wx / wt;
    };

    const double v0 = 0.1;
    const int steps = 8;
    auto drift_after = [&](bool waiting) {
        const DdsParams p = natural_params(g, c, false, waiting);
        Swarm s = cells_at_rest(g, c, p, w, v0);
        const double x0 = mean_position(s);
        for (int k = 0; k < steps; ++k)
            s = dds_step(s, pot, nullptr, static_cast<std::uint64_t>(k));
        return mean_position(s) - x0;
    };

    const double expected = v0 * 0.5 * steps; // v0 dt steps
    CHECK(drift_after(true) > 0.5 * expected);
    CHECK(std::abs(drift_after(false)) < 0.1 * expected);
}

TEST_CASE("step report diagnostics") {
    const Grid1D g = make_grid(0.0, 32.0, 32);
    const PhysicalConstants c;
    const DdsParams p = natural_params(g, c);
    const PotentialField pot = walled_box(g);
    std::vector<double> w(32, 0.0);
    for (int i = 1; i <= 30; ++i) w[static_cast<std::size_t>(i)] = 10.0;
    Swarm s = cells_at_rest(g, c, p, w);

    StepReport report;
    s = dds_step(s, pot, &report, 0);
    const double a = p.explosion_fraction;
    for (int i = 2; i <= 29; ++i)
        CHECK(report.thin_arrival_fraction[static_cast<std::size_t>(i)] ==
              doctest::Approx(2.0 * a).epsilon(1e-9));
    CHECK(report.speed_violations == 0);
    CHECK(report.separation_ratio < 1.0);
    CHECK(report.separation_ratio >= 0.0);
}

TEST_CASE("swarm stream measure matches its definition") {
    const Grid1D g = make_grid(0.0, 8.0, 8);
    const PhysicalConstants c;
    DdsParams p = natural_params(g, c);
    Simplex q;
    q.position = 2.5;
    q.speed = 1.5;
    q.weight = 4.0;
    Simplex r;
    r.position = 3.5;
    r.speed = -0.5;
    r.weight = 2.0;
    const Swarm s = make_swarm(g, c, p, {q, r});
    // border 2: (4*1.5 + 2*(-0.5)) / (2 * 6 * 1) = 5/12
    CHECK(swarm_stream(s, 2) == doctest::Approx(5.0 / 12.0));
    CHECK_THROWS_AS((void)swarm_stream(s, 7), ValidationError);
}
