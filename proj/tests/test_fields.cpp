#include <doctest.h>

#include <cmath>

#include "dds/fields.hpp"

using namespace dds;

TEST_CASE("gaussian packet: norm, width and carrier momentum") {
    const Grid1D g = make_grid(0.0, 64.0, 128);
    const double sigma = 4.0, x0 = 32.0, k0 = 0.7;
    const WaveField f = gaussian_packet(g, x0, sigma, k0);
    CHECK(f.norm2() == doctest::Approx(1.0).epsilon(1e-12));

    double mean = 0.0, var = 0.0;
    const DensityField d = density_of(f);
    for (int i = 0; i < g.n_cells; ++i) mean += g.center(i) * d.mass(i);
    for (int i = 0; i < g.n_cells; ++i)
        var += (g.center(i) - mean) * (g.center(i) - mean) * d.mass(i);
    CHECK(mean == doctest::Approx(x0).epsilon(1e-6));
    CHECK(std::sqrt(var) == doctest::Approx(sigma).epsilon(0.01));

    // phase advances by k0 dx between neighboring dense cells (wrapped difference)
    const int i = g.cell_of(x0);
    double dphi = std::atan2(f.im[i + 1], f.re[i + 1]) - std::atan2(f.im[i], f.re[i]);
    const double pi = 3.141592653589793238462643;
    while (dphi <= -pi) dphi += 2.0 * pi;
    while (dphi > pi) dphi -= 2.0 * pi;
    CHECK(dphi == doctest::Approx(k0 * g.dx()).epsilon(1e-9));
}

TEST_CASE("potential compilation: coverage, overlap, clipping") {
    const Grid1D g = make_grid(0.0, 10.0, 10);
    BasePotential base;
    base.kind = BaseKind::linear;
    base.slope = 2.0;

    SUBCASE("closed-interval cell-center coverage") {
        const PotentialField p = compile_potential(g, base, {{3.0, 2.0, 5.0}});
        // barrier spans [2, 4]: centers 2.5 and 3.5 are covered
        CHECK(p.barrier_level[1] == 0.0);
        CHECK(p.barrier_level[2] == 5.0);
        CHECK(p.barrier_level[3] == 5.0);
        CHECK(p.barrier_level[4] == 0.0);
        CHECK(p.v[2] == doctest::Approx(2.0 * 2.5 + 5.0));
        CHECK(p.v[1] == doctest::Approx(2.0 * 1.5));
    }
    SUBCASE("overlapping barriers combine by max") {
        // wide one spans [1, 5] (cells 1-4), tall one spans [2.5, 3.5] (cells 2-3)
        const PotentialField p = compile_potential(g, base, {{3.0, 4.0, 2.0}, {3.0, 1.0, 7.0}});
        CHECK(p.barrier_level[1] == 2.0);
        CHECK(p.barrier_level[2] == 7.0);
        CHECK(p.barrier_level[3] == 7.0);
        CHECK(p.barrier_level[4] == 2.0);
        CHECK(p.barrier_level[5] == 0.0);
    }
    SUBCASE("edge overhang is allowed, fully outside is not") {
        CHECK_NOTHROW((void)compile_potential(g, base, {{0.0, 3.0, 1.0}}));
        CHECK_THROWS_AS((void)compile_potential(g, base, {{15.0, 2.0, 1.0}}), ValidationError);
        CHECK_THROWS_AS((void)compile_potential(g, base, {{3.0, -1.0, 1.0}}), ValidationError);
        CHECK_THROWS_AS((void)compile_potential(g, base, {{3.0, 1.0, -1.0}}), ValidationError);
    }
    SUBCASE("walls are excluded from the soft maximum") {
        const PotentialField p =
            compile_potential(g, BasePotential{}, {{0.5, 1.0, 1e9}, {5.5, 1.0, 3.0}});
        CHECK(p.is_wall(0));
        CHECK_FALSE(p.is_wall(5));
        CHECK(p.v_max_soft() == doctest::Approx(3.0));
    }
}

TEST_CASE("base potential shapes") {
    BasePotential h;
    h.kind = BaseKind::harmonic;
    h.k = 2.0;
    h.x0 = 1.0;
    CHECK(h.value(3.0) == doctest::Approx(4.0));
    CHECK(h.gradient(3.0) == doctest::Approx(4.0));
    BasePotential z;
    CHECK(z.value(5.0) == 0.0);
    CHECK(z.gradient(5.0) == 0.0);
}

TEST_CASE("density fields normalize") {
    const Grid1D g = make_grid(0.0, 8.0, 8);
    WaveField f = make_wavefield(g);
    f.re[2] = 3.0;
    f.im[5] = 4.0;
    const DensityField d = density_of(f);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(d.mass(2) == doctest::Approx(9.0 / 25.0));
    WaveField zero = make_wavefield(g);
    CHECK_THROWS_AS((void)density_of(zero), ValidationError);
    CHECK_THROWS_AS(normalize(zero), ValidationError);
}
