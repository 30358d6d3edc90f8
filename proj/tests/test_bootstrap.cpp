#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mm/bootstrap.hpp"

using namespace mm;

namespace {

Rational R(const char* s) { return parse_rational(s); }

// Independent count: smallest n with p0 (1/nu)^n >= q0, in long double.
int predicted_length(double p0, double q0) {
    if (p0 >= q0) return 0;
    const long double nu = 1.0L - (q0 - 5.0L) / (5.0L * q0);
    return int(std::ceil(std::log((long double)q0 / p0) / std::log(1.0L / nu)));
}

}  // namespace

TEST_CASE("bootstrap chain: reference lengths and clamp") {
    const BootstrapChain c = bootstrap_chain(R("3"), R("6"));
    CHECK(c.length() == 21);
    CHECK(c.length() == predicted_length(3, 6));
    CHECK(c.states.front().nu == Rational(29, 30));
    CHECK(c.states.back().p == 6);
    CHECK(c.states[20].p < 6);
    for (int i = 1; i < 21; ++i) CHECK(c.states[i].p == c.states[i - 1].p * Rational(30, 29));

    const BootstrapChain d = bootstrap_chain(R("5.9"), R("6"));
    CHECK(d.length() == 1);
    CHECK(to_double(R("5.9") * Rational(30, 29)) == doctest::Approx(6.1034).epsilon(1e-4));
    CHECK(d.states[1].p == 6);

    CHECK(bootstrap_chain(R("5.5"), R("5.5")).length() == 0);
    CHECK(gain_nu(R("6")) == Rational(29, 30));
}

TEST_CASE("bootstrap chain: domain errors name the bound") {
    auto msg = [](const char* p, const char* q) {
        try {
            bootstrap_chain(R(p), R(q));
        } catch (const ExponentError& e) {
            return std::string(e.what());
        }
        return std::string();
    };
    CHECK(msg("2", "6").find("p0 must exceed 2") != std::string::npos);
    CHECK(msg("3", "5").find("q0 must exceed 5") != std::string::npos);
    CHECK(msg("3", "6.5").find("q0 must not exceed 6") != std::string::npos);
    CHECK(msg("5.8", "5.5").find("p0 must not exceed q0") != std::string::npos);
}

TEST_CASE("bootstrap chain: properties over random rational inputs") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> qd(5001, 6000), pd(2001, 6000);
    int checked = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const int qn = qd(rng), pn = pd(rng);
        if (pn > qn) continue;
        const Rational q(qn, 1000), p(pn, 1000);
        const Rational nu = gain_nu(q);
        CHECK(nu > 0);
        CHECK(nu < 1);
        if (p < q) CHECK(gain_sigma(p, q) > p);
        const double ratio = std::log(double(qn) / pn) / std::log(1.0 / to_double(nu));
        if (std::abs(ratio - std::round(ratio)) < 1e-9) continue;  // exact boundary; rounding decides
        const BootstrapChain c = bootstrap_chain(p, q);
        CHECK(c.length() == predicted_length(pn / 1000.0, qn / 1000.0));
        for (std::size_t i = 1; i < c.states.size(); ++i) {
            CHECK(c.states[i].p > c.states[i - 1].p);
            CHECK(c.states[i].p <= q);
        }
        CHECK(c.states.back().p == q);
        ++checked;
    }
    CHECK(checked > 100);
}

TEST_CASE("omega window: reference values and range") {
    const OmegaWindow w = omega_window(R("6"));
    CHECK(w.q1 == Rational(15, 7));
    CHECK(w.second_order.nu == Rational(1, 7));
    CHECK(w.second_order.q_over_nu == 15);
    CHECK(w.first_order.nu == Rational(4, 7));
    CHECK(w.first_order.q_over_nu == Rational(15, 4));
    CHECK(w.lo == Rational(10, 3));
    CHECK(w.hi == Rational(15, 4));

    CHECK(omega_window(R("5.5")).q1 == Rational(110, 53));
    const OmegaWindow edge = omega_window(Rational(5) + Rational(1, 1000000000));
    CHECK(to_double(edge.q1) == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(edge.q1 > 2);
    CHECK(to_double(edge.second_order.q_over_nu) == doctest::Approx(10.0).epsilon(1e-7));

    for (int k = 1; k <= 1000; ++k) {
        const OmegaWindow x = omega_window(Rational(5) + Rational(k, 1000));
        CHECK(x.q1 > 2);
        CHECK(x.q1 <= Rational(15, 7));
        CHECK(x.second_order.q_over_nu > 10);
        CHECK(x.second_order.q_over_nu <= 15);
    }
    CHECK_THROWS_AS(omega_window(R("5")), ExponentError);
    CHECK_THROWS_AS(omega_window(R("6.01")), ExponentError);
}

TEST_CASE("hypothesis check: zeros, closed forms, nesting") {
    Grid g;
    g.Nx = 32;
    g.Nt = 41;
    g.T = 1.0;
    const double c = g.L / 2;
    const HypothesisGeometry geo{{0.1, 0.9, {c, c, c}, 2.5}, {0.2, 0.8, {c, c, c}, 2.0}, {0.3, 0.7, {c, c, c}, 1.6}};
    const CylinderSamplingPlan plan = CylinderSamplingPlan::default_for(g);
    const HypothesisReport z = hypothesis_check(Field(g, 3), Field(g, 3), geo, 3, 6, plan);
    CHECK(z.hypothesis.norm == 0.0);
    CHECK(z.u_lq == 0.0);
    CHECK(z.w_lq == 0.0);

    // Constant fields: the Lebesgue norms are |v| |Q_i|^{1/q0}, with the time
    // length counted on nodes strictly inside the window.
    const Field u = sample(g, 3, [](double, const double*, double* o) { o[0] = 0.6; o[1] = 0.8; o[2] = 0; });
    const Field w = sample(g, 3, [](double, const double*, double* o) { o[0] = 0; o[1] = 2; o[2] = 0; });
    const HypothesisReport r = hypothesis_check(u, w, geo, 3, 6, plan);
    auto vol = [](const Cylinder& q) { return (q.b - q.a) * 4.0 / 3.0 * std::numbers::pi * q.r * q.r * q.r; };
    CHECK(r.u_lq == doctest::Approx(std::pow(vol(geo.Q1), 1.0 / 6)).epsilon(0.02));
    CHECK(r.w_lq == doctest::Approx(2 * std::pow(vol(geo.Q2), 1.0 / 6)).epsilon(0.02));
    CHECK(r.w_window_lo == doctest::Approx(2 * std::pow(vol(geo.Q2), 0.3)).epsilon(0.02));
    CHECK(r.finite);
    CHECK(r.hypothesis.norm > 0);
    // Homogeneity of every reported norm.
    const HypothesisReport r2 = hypothesis_check(3.0 * u, 3.0 * w, geo, 3, 6, plan);
    CHECK(r2.hypothesis.norm == doctest::Approx(3 * r.hypothesis.norm).epsilon(1e-12));
    CHECK(r2.u_lq == doctest::Approx(3 * r.u_lq).epsilon(1e-12));

    HypothesisGeometry bad = geo;
    std::swap(bad.Q1, bad.Q2);
    CHECK_THROWS_AS(hypothesis_check(u, w, bad, 3, 6, plan), NestingError);
    CHECK_THROWS_AS(hypothesis_check(u, w, geo, 3, 7, plan), ExponentError);
}

TEST_CASE("ckn series: constant gradient closed form, crossing radius, errors") {
    Grid g;
    g.Nx = 32;
    g.Nt = 65;
    g.T = 1.0;
    const double G2 = 1.7;
    const Field dens = sample(g, 1, [&](double, const double*, double* o) { o[0] = G2; });
    const Event e{0.5, {g.L / 2, g.L / 2, g.L / 2}};
    const auto s = ckn_series(dens, e, {0.3, 0.7, 0.5, 0.4}, 2.0);
    REQUIRE(s.points.size() == 4);
    CHECK(s.points[0].r == 0.7);
    for (const auto& p : s.points) {
        CHECK(p.value == doctest::Approx(8 * std::numbers::pi / 3 * G2 * std::pow(p.r, 4)).epsilon(1e-12));
        CHECK(p.nodes > 0);
    }
    CHECK(s.slope == doctest::Approx(4.0).epsilon(1e-12));
    // (8 pi/3) 1.7 r^4 <= 2 holds for r <= 0.61, so the crossing radius is 0.5.
    REQUIRE(s.crossing.has_value());
    CHECK(*s.crossing == 0.5);
    CHECK_FALSE(ckn_series(dens, e, {0.3, 0.4}, 1e-6).crossing.has_value());

    CHECK_THROWS_AS(ckn_series(dens, e, {0.8}), DomainError);  // 0.5 + 0.64 > T
    CHECK_THROWS_AS(ckn_series(dens, e, {-0.1}), DomainError);
    CHECK_THROWS_AS(ckn_series(dens, Event{0.1, e.x}, {0.5}), DomainError);

    const auto z = ckn_monitor(Field(g, 3), Field(g, 3), e, {0.3, 0.4});
    for (const auto& p : z.points) CHECK(p.value == 0.0);
}

TEST_CASE("ckn monitor: smooth fields decay like r^4") {
    Grid g;
    g.Nx = 32;
    g.Nt = 65;
    g.T = 1.0;
    for (unsigned seed : {3u, 4u}) {
        const Field u = mmtest::random_solenoidal(g, seed, 2);
        const Field w = mmtest::random_bandlimited(g, 3, seed + 10, 2);
        const auto s = ckn_monitor(u, w, Event{0.5, {1.0, 2.0, 3.0}}, {0.6, 0.5, 0.4, 0.3, 0.2});
        CHECK(s.slope >= 3.5);
        CHECK(s.slope <= 4.5);
    }
}
