#include <cmath>
#include <numbers>

#include "doctest.h"
#include "helpers.hpp"
#include "mm/morrey.hpp"

using namespace mm;

namespace {

constexpr double pi = std::numbers::pi;

// Indicator of {|t - t_c| < R^2, |x - x_c| < R} built from node indices so no
// node sits on the boundary by rounding accident.
Field index_indicator(const Grid& g, int nc_t, int nc_x, int R_t, double R_x_cells) {
    Field f(g, 1);
    const int N = g.Nx;
    for (int n = 0; n < g.Nt; ++n) {
        if (std::abs(n - nc_t) >= R_t) continue;
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int x = 0; x < N; ++x) {
                    const double d2 = double(x - nc_x) * (x - nc_x) + double(y - nc_x) * (y - nc_x) +
                                      double(z - nc_x) * (z - nc_x);
                    if (d2 < R_x_cells * R_x_cells) f.at(n, 0, z, y, x) = 1;
                }
    }
    return f;
}

Grid grid(double L, int N, double T, int Nt) {
    Grid g;
    g.L = L;
    g.Nx = N;
    g.T = T;
    g.Nt = Nt;
    return g;
}

// Gaussian in space-time about node (tc, xc).
Field gaussian_bump(const Grid& g, double tc, double xc, double s, double tau) {
    return sample(g, 1, [&](double t, const double* x, double* o) {
        double d2 = 0;
        for (int k = 0; k < 3; ++k) d2 += (x[k] - xc) * (x[k] - xc);
        o[0] = std::exp(-d2 / (2 * s * s) - (t - tc) * (t - tc) / (2 * tau * tau));
    });
}

CylinderSamplingPlan plan(double rmin, double rmax, int ts, int ss) {
    CylinderSamplingPlan p;
    p.r_min = rmin;
    p.r_max = rmax;
    p.time_stride = ts;
    p.space_stride = ss;
    return p;
}

}  // namespace

TEST_CASE("quasi-distance examples") {
    Event a{1.0, {0.5, 0.5, 0.5}};
    CHECK(quasi_distance(a, a) == 0.0);
    Event b{5.0, {0.5, 0.5, 0.5}};
    CHECK(quasi_distance(a, b) == doctest::Approx(2.0).epsilon(1e-15));
    Event c{2.0, {3.5, 4.5, 0.5}};
    CHECK(quasi_distance(a, c) == doctest::Approx(6.0).epsilon(1e-15));
    // Minimal image on a torus of side 10: a gap of 9 is a gap of 1.
    Event d{1.0, {9.5, 0.5, 0.5}};
    CHECK(quasi_distance(a, d, 10.0) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("plan validation") {
    const Grid g = grid(2 * pi, 32, 1.0, 33);
    CHECK_THROWS_AS(plan(g.h(), 1.0, 1, 1).validate(g), PlanError);            // r_min < 2h
    CHECK_THROWS_AS(plan(0.4, g.L / 4, 1, 1).validate(g), PlanError);          // wraps
    CHECK_THROWS_AS(plan(0.4, 1.0, 1, 8).validate(g), PlanError);              // space gaps
    CHECK_THROWS_AS(plan(0.4, 1.0, 20, 1).validate(g), PlanError);             // time gaps
    CHECK_NOTHROW(plan(0.4, 1.5, 2, 2).validate(g));
    CHECK_NOTHROW(CylinderSamplingPlan::default_for(g).validate(g));
    const auto p = plan(0.8, 1.5, 2, 2);
    CHECK(p.radii().size() == 1);
    const auto r = p.refined(g);
    CHECK(r.radii().size() == 2);
    CHECK(r.time_stride == 1);
    CHECK(r.space_stride == 1);
}

TEST_CASE("indicator of a unit cylinder, p = q = 2") {
    // Cylinder ]0.5, 2.5[ x B((3,3,3), 1) on a grid with h = 1/8, dt = 1/40.
    const Grid g = grid(6.0, 48, 3.0, 121);
    const Field f = index_indicator(g, 60, 24, 40, 8.0);
    const auto e = morrey_norm(f, {2, 2}, plan(0.3, 1.2, 4, 2));
    CHECK(!e.empty);
    // Largest cylinder contains the support: identical to the L^2 quadrature.
    CHECK(std::abs(e.norm / lp_norm(f, 2) - 1) <= 1e-10);
    CHECK(std::abs(e.norm / std::sqrt(8 * pi / 3) - 1) <= 0.02);
}

TEST_CASE("indicator of a radius-2 cylinder, p = 2, q = 4") {
    // Cylinder ]1, 9[ x B((6,6,6), 2), h = 1/4, dt = 1/10.
    const Grid g = grid(12.0, 48, 10.0, 101);
    const Field f = index_indicator(g, 50, 24, 40, 8.0);
    const auto e = morrey_norm(f, {2, 4}, plan(0.5, 2.0, 2, 2));
    const double expected = std::sqrt(8 * pi / 3) * std::pow(2.0, 1.25);
    CHECK(std::abs(e.norm / expected - 1) <= 0.02);
    CHECK(e.argmax.r == doctest::Approx(2.0));
    // The brute-force optimum over radii of (|Q_R| r^{-5/2})^{1/2} restricted to r <= R sits at r = R.
    double best = 0;
    for (double r = 0.1; r <= 2.0 + 1e-12; r += 0.1) {
        const double inside = 2 * std::pow(std::min(r, 2.0), 5) * 4 * pi / 3;
        best = std::max(best, std::sqrt(inside * std::pow(r, -2.5)));
    }
    CHECK(best == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("zero field is empty with norm zero") {
    const Grid g = grid(2 * pi, 16, 1.0, 9);
    const auto e = morrey_norm(Field(g, 3), {2, 4}, CylinderSamplingPlan::default_for(g));
    CHECK(e.empty);
    CHECK(e.norm == 0.0);
}

TEST_CASE("p = q agrees with L^p quadrature for a compact bump") {
    const Grid g = grid(6.0, 32, 2.0, 41);
    Field f = gaussian_bump(g, 1.0, 3.0, 0.15, 0.05);
    // Cut off the Gaussian tails so the largest cylinder holds the support.
    f = restrict_to(f, Cylinder{0.6, 1.4, {3.0, 3.0, 3.0}, 0.9});
    for (double p : {2.0, 3.0, 4.5}) {
        const auto e = morrey_norm(f, {p, p}, plan(0.375, 1.4, 2, 2));
        CHECK(std::abs(e.norm / lp_norm(f, p) - 1) <= 1e-10);
    }
}

TEST_CASE("homogeneity, refinement and support monotonicity") {
    const Grid g = grid(2 * pi, 24, 1.0, 17);
    const Field f = mmtest::random_bandlimited(g, 3, 11);
    const auto p0 = plan(2 * g.h(), 1.5, 2, 2);
    const MorreyParams mp{3, 6};
    const double n = morrey_norm(f, mp, p0).norm;
    CHECK(morrey_norm(-2.5 * f, mp, p0).norm == doctest::Approx(2.5 * n).epsilon(1e-12));
    const double nr = morrey_norm(f, mp, p0.refined(g)).norm;
    CHECK(nr >= n);
    const Cylinder big{0.1, 0.9, {3.0, 3.0, 3.0}, 1.4};
    const Cylinder small{0.3, 0.7, {3.0, 3.0, 3.0}, 0.8};
    CHECK(morrey_norm(restrict_to(f, small), mp, p0).norm <=
          morrey_norm(restrict_to(f, big), mp, p0).norm);
}

TEST_CASE("parabolic rescale: identity, decimation and support shrinkage") {
    const Grid g = grid(8.0, 16, 4.0, 17);
    const Field f = mmtest::random_bandlimited(g, 1, 5, 2);
    const Field id = parabolic_rescale(f, 1.0);
    CHECK(max_abs(id - f) == 0.0);
    CHECK_THROWS_AS(parabolic_rescale(f, 0.3), DomainError);

    // lambda = 2 samples f at t_c + 4(t - t_c), x_c + 2(x - x_c).
    const Field d = parabolic_rescale(f, 2.0, 8, 8);
    CHECK(d.at(9, 0, 9, 10, 7) == f.at(12, 0, 10, 12, 6));
    CHECK(d.at(0, 0, 0, 0, 0) == 0.0);  // source time outside the window

    // An indicator of a cylinder shrinks by 2 in space and 4 in time.
    const Field ind = index_indicator(g, 8, 8, 8, 4.5);
    const Field s = parabolic_rescale(ind, 2.0, 8, 8);
    for (int n = 0; n < g.Nt; ++n)
        for (int z = 0; z < 16; ++z)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x)
                    if (s.at(n, 0, z, y, x) != 0) {
                        CHECK(std::abs(n - 8) < 2);
                        CHECK(std::abs(x - 8) <= 2);
                    }

    // lambda = 1/2 reproduces a band-limited field's exact dilation.
    const double tc = g.t(8), xc = g.x(8);
    const Field slow = sample(g, 1, [&](double t, const double* x, double* o) {
        const double y0 = xc + 0.5 * (x[0] - xc), y1 = xc + 0.5 * (x[1] - xc);
        o[0] = std::cos(2 * pi * y0 / 8.0) * std::sin(2 * pi * y1 / 8.0) *
               std::cos(2 * pi * (tc + 0.25 * (t - tc)) / 4.25);
    });
    // Time period of the trigonometric interpolant is Nt dt = 4.25.
    const Field base = sample(g, 1, [&](double t, const double* x, double* o) {
        o[0] = std::cos(2 * pi * x[0] / 8.0) * std::sin(2 * pi * x[1] / 8.0) * std::cos(2 * pi * t / 4.25);
    });
    CHECK(max_abs(parabolic_rescale(base, 0.5, 8, 8) - slow) <= 1e-12);
}

TEST_CASE("Morrey norm scaling law under dilation") {
    // h = 1, dt = 2; the bump's best radius sits at r_min, so the dilated
    // copies attain theirs at 2 r_min and 4 r_min inside the same plan.
    const Grid g = grid(72.0, 72, 248.0, 125);
    const Field f = gaussian_bump(g, 124.0, 36.0, 6.0, 4.0);
    const auto pl = plan(4.0, 17.0, 4, 2);
    const MorreyParams pairs[] = {{2, 4}, {3, 6}};
    double base[2];
    for (int i = 0; i < 2; ++i) base[i] = morrey_norm(f, pairs[i], pl).norm;
    for (double lam : {0.5, 0.25}) {
        const Field fl = parabolic_rescale(f, lam, 62, 36);
        for (int i = 0; i < 2; ++i) {
            const double predicted = std::pow(lam, -5.0 / pairs[i].q) * base[i];
            const double nl = morrey_norm(fl, pairs[i], pl).norm;
            INFO("p=" << pairs[i].p << " q=" << pairs[i].q << " lambda=" << lam);
            CHECK(std::abs(nl / predicted - 1) <= 0.05);
        }
    }
}

TEST_CASE("Hoelder inequality holds cylinder by cylinder") {
    const Grid g = grid(2 * pi, 24, 1.0, 17);
    const auto pl = plan(2 * g.h(), 1.5, 2, 2);
    SUBCASE("indicator pair") {
        const Grid gi = grid(6.0, 24, 2.0, 41);
        const Field f = index_indicator(gi, 20, 12, 10, 4.0);
        const auto r = check_holder(f, f, {4, 8}, {4, 8}, {2, 4}, plan(0.5, 1.0, 2, 2));
        CHECK(r.worst_cylinder <= 1 + 1e-12);
    }
    SUBCASE("multiplication by one") {
        const Field f = mmtest::random_bandlimited(g, 1, 3);
        Field one(g, 1);
        for (double& v : one.data()) v = 1;
        CHECK(morrey_norm(multiply(one, f), {3, 6}, pl).norm ==
              doctest::Approx(morrey_norm(f, {3, 6}, pl).norm).epsilon(1e-14));
    }
    SUBCASE("random pairs across admissible triples") {
        struct Triple {
            MorreyParams m1, m2, m0;
        };
        const Triple triples[] = {{{4, 8}, {4, 8}, {2, 4}},
                                  {{3, 6}, {6, 6}, {2, 3}},
                                  {{3, 5}, {6, 10}, {2, 10.0 / 3}}};
        unsigned seed = 100;
        for (const auto& tr : triples)
            for (int k = 0; k < 7; ++k) {
                const Field f = mmtest::random_bandlimited(g, 3, seed++);
                const Field h = mmtest::random_bandlimited(g, k % 2 ? 3 : 1, seed++);
                const auto r = check_holder(f, h, tr.m1, tr.m2, tr.m0, pl);
                CHECK(r.finite);
                CHECK(r.worst_cylinder <= 1 + 1e-9);
                CHECK(r.ratio <= 1 + 1e-9);
            }
    }
    SUBCASE("exponent relations are enforced") {
        const Field f = mmtest::random_bandlimited(g, 1, 1);
        CHECK_THROWS_AS(check_holder(f, f, {2, 4}, {2, 4}, {2, 4}, pl), ExponentError);
        CHECK_THROWS_AS(check_holder(f, f, {4, 8}, {4, 8}, {2, 3}, pl), ExponentError);
    }
}

TEST_CASE("localization ratio") {
    const Grid g = grid(10.0, 40, 2.0, 41);
    const auto pl = plan(0.5, 2.0 - 1e-9, 2, 2);
    SUBCASE("indicator of Q is a Lebesgue ratio") {
        const Cylinder Q{0.5, 1.5, {5.0, 5.0, 5.0}, 1.0};
        Field one(g, 1);
        for (double& v : one.data()) v = 1;
        const auto r = check_localization(one, Q, {2, 2}, {6, 6}, pl);
        // Discrete measure by node count.
        const Field ind = restrict_to(one, Q);
        double count = 0;
        for (double v : ind.data()) count += v;
        const double mu = count * g.cell_volume();
        CHECK(r.ratio == doctest::Approx(std::pow(mu, 0.5 - 1.0 / 6)).epsilon(1e-10));
    }
    SUBCASE("zero field gives the empty sentinel") {
        const auto r = check_localization(Field(g, 1), Cylinder{0.5, 1.5, {3, 3, 3}, 1.0}, {2, 2},
                                          {6, 6}, pl);
        CHECK(r.empty);
        CHECK(r.note == "empty");
    }
    SUBCASE("random bump is stable under refinement") {
        const Field f = gaussian_bump(g, 1.0, 5.0, 0.4, 0.3);
        const Cylinder Q{0.4, 1.6, {5.0, 5.0, 5.0}, 1.2};
        const auto a = check_localization(f, Q, {2, 5.5}, {3, 6}, pl);
        const auto b = check_localization(f, Q, {2, 5.5}, {3, 6}, pl.refined(g));
        CHECK(a.finite);
        CHECK(std::abs(b.ratio / a.ratio - 1) <= 0.10);
    }
    SUBCASE("exponent ordering is enforced") {
        CHECK_THROWS_AS(check_localization(Field(g, 1), Cylinder{}, {3, 6}, {2, 6}, pl), ExponentError);
    }
}
