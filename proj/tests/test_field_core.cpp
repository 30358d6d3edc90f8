#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mm/field_ops.hpp"
#include "mm/io.hpp"

using namespace mm;

namespace {

Grid small_grid() {
    Grid g;
    g.Nx = 16;
    g.Nt = 3;
    return g;
}

Field scalar_of(const Grid& g, double (*fn)(double, const double*)) {
    return sample(g, 1, [&](double t, const double* x, double* o) { o[0] = fn(t, x); });
}

}  // namespace

TEST_CASE("grid validation rejects bad shapes") {
    Grid g;
    g.Nx = 7;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g.Nx = 6;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g = Grid{};
    g.Nt = 1;
    CHECK_THROWS_AS(g.validate(), DomainError);
    g = Grid{};
    g.L = 0;
    CHECK_THROWS_AS(g.validate(), DomainError);
    CHECK_NOTHROW(Grid{}.validate());
}

TEST_CASE("curl of (0,0,sin x) is (0,-cos x,0)") {
    const Grid g = small_grid();
    Field v = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = 0;
        o[1] = 0;
        o[2] = std::sin(x[0]);
    });
    Field expect = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = 0;
        o[1] = -std::cos(x[0]);
        o[2] = 0;
    });
    CHECK(relative_residual(curl(v), expect) < 1e-13);
}

TEST_CASE("curl rejects scalar input") {
    CHECK_THROWS_AS(curl(Field(small_grid(), 1)), ShapeError);
}

TEST_CASE("curl of a gradient and divergence of a curl vanish") {
    const Grid g = small_grid();
    Field s = mmtest::random_bandlimited(g, 1, 11);
    Field gr = gradient(s);
    CHECK(max_abs(curl(gr)) <= 1e-12 * max_abs(gr));
    Field v = mmtest::random_bandlimited(g, 3, 12);
    Field c = curl(v);
    CHECK(max_abs(divergence(c)) <= 1e-12 * max_abs(c));
}

TEST_CASE("curl curl equals grad div minus Laplacian") {
    const Grid g = small_grid();
    Field v = mmtest::random_bandlimited(g, 3, 13);
    Field lhs = curl(curl(v));
    Field rhs = gradient(divergence(v)) - laplacian(v);
    CHECK(relative_residual(lhs, rhs) < 1e-10);
}

TEST_CASE("gradient of sin x and Laplacian of a constant") {
    const Grid g = small_grid();
    Field s = scalar_of(g, [](double, const double* x) { return std::sin(x[0]); });
    Field expect = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = std::cos(x[0]);
        o[1] = o[2] = 0;
    });
    CHECK(relative_residual(gradient(s), expect) < 1e-13);
    Field c = scalar_of(g, [](double, const double*) { return 3.5; });
    CHECK(max_abs(laplacian(c)) < 1e-13);
}

TEST_CASE("divergence rejects mismatched shapes") {
    CHECK_THROWS_AS(divergence(Field(small_grid(), 1)), ShapeError);
    CHECK_THROWS_AS(gradient(Field(small_grid(), 3)), ShapeError);
    Grid other = small_grid();
    other.Nx = 8;
    CHECK_THROWS_AS(Field(small_grid(), 3) + Field(other, 3), ShapeError);
}

TEST_CASE("inverse Laplacian on the zero-mean subspace") {
    const Grid g = small_grid();
    Field s = scalar_of(g, [](double, const double* x) { return std::sin(x[0]); });
    Field expect = scalar_of(g, [](double, const double* x) { return -std::sin(x[0]); });
    CHECK(relative_residual(inverse_laplacian(s), expect) < 1e-13);

    Field zero(g, 1);
    CHECK(max_abs(inverse_laplacian(zero)) == 0.0);

    Field one = scalar_of(g, [](double, const double*) { return 1.0; });
    CHECK_THROWS_AS(inverse_laplacian(one), MeanModeError);

    Field r = mmtest::random_zero_mean(g, 3, 21);
    CHECK(relative_residual(laplacian(inverse_laplacian(r)), r) < 1e-10);
    CHECK(relative_residual(inverse_laplacian(laplacian(r)), r) < 1e-10);
}

TEST_CASE("inverse Laplacian with mean projection logs the removed mean") {
    const Grid g = small_grid();
    Field s = scalar_of(g, [](double, const double* x) { return 2.0 + std::cos(x[1]); });
    MeanLog log;
    Field r = inverse_laplacian(s, true, &log);
    CHECK(log.count() == g.Nt);
    CHECK(log.max_abs() == doctest::Approx(2.0).epsilon(1e-13));
    Field expect = scalar_of(g, [](double, const double* x) { return -std::cos(x[1]); });
    CHECK(relative_residual(r, expect) < 1e-13);
}

TEST_CASE("Leray projection") {
    const Grid g = small_grid();
    Field grad = gradient(mmtest::random_bandlimited(g, 1, 31));
    CHECK(max_abs(leray_project(grad)) <= 1e-12 * max_abs(grad));

    Field v = mmtest::random_bandlimited(g, 3, 32);
    Field p = leray_project(v);
    CHECK(max_abs(divergence(p)) <= 1e-10 * rms(p));
    CHECK(relative_residual(leray_project(p), p) < 1e-12);

    // Single mode (sin x, 0, 0): k is parallel to the field, so it is a pure gradient.
    Field sx = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = std::sin(x[0]);
        o[1] = o[2] = 0;
    });
    CHECK(max_abs(leray_project(sx)) < 1e-14);
    // (sin(x+y), 0, 0): k=(1,1,0), (I - kk^T/|k|^2) e_x = (1/2, -1/2, 0).
    Field sxy = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = std::sin(x[0] + x[1]);
        o[1] = o[2] = 0;
    });
    Field expect = sample(g, 3, [](double, const double* x, double* o) {
        o[0] = 0.5 * std::sin(x[0] + x[1]);
        o[1] = -0.5 * std::sin(x[0] + x[1]);
        o[2] = 0;
    });
    CHECK(relative_residual(leray_project(sxy), expect) < 1e-13);
}

TEST_CASE("heat step") {
    const Grid g = small_grid();
    Field v = sample(g, 1, [](double, const double* x, double* o) { o[0] = std::cos(x[0]) + 0.7; });
    SpectralSnapshot s = to_spectral(v, 0);

    SpectralSnapshot id = heat_step(s, 0.0);
    for (std::size_t i = 0; i < s.comps[0].size(); ++i) CHECK(id.comps[0][i] == s.comps[0][i]);

    SpectralSnapshot h = heat_step(s, 0.5);
    Field out(g, 1);
    from_spectral(h, out, 0);
    Field expect = sample(g, 1, [](double, const double* x, double* o) {
        o[0] = std::exp(-0.5) * std::cos(x[0]) + 0.7;
    });
    for (std::size_t i = 0; i < g.cells(); ++i)
        CHECK(out.slice(0, 0)[i] == doctest::Approx(expect.slice(0, 0)[i]).epsilon(1e-13));
    CHECK(std::abs(h.mean(0) - cplx(0.7)) < 1e-14);
    CHECK(std::exp(-0.5) == doctest::Approx(0.60653).epsilon(1e-5));

    CHECK_THROWS_AS(heat_step(s, -0.1), DomainError);
}

TEST_CASE("heat semigroup law") {
    const Grid g = small_grid();
    Field v = mmtest::random_bandlimited(g, 3, 41);
    SpectralSnapshot s = to_spectral(v, 1);
    SpectralSnapshot a = heat_step(heat_step(s, 0.13, 1.5), 0.29, 1.5);
    SpectralSnapshot b = heat_step(s, 0.42, 1.5);
    double worst = 0, scale = 0;
    for (int c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < a.comps[c].size(); ++i) {
            worst = std::max(worst, std::abs(a.comps[c][i] - b.comps[c][i]));
            scale = std::max(scale, std::abs(b.comps[c][i]));
        }
    CHECK(worst <= 1e-12 * scale);
}

TEST_CASE("operations are deterministic") {
    const Grid g = small_grid();
    Field v = mmtest::random_bandlimited(g, 3, 51);
    Field a = curl(leray_project(v));
    Field b = curl(leray_project(v));
    CHECK(a.data() == b.data());
}

TEST_CASE("PMF1 round trip and header checks") {
    const Grid g = small_grid();
    Field v = mmtest::random_bandlimited(g, 3, 61);
    std::stringstream ss;
    write_pmf1(ss, v);
    const std::string bytes = ss.str();
    CHECK(bytes.substr(0, 4) == "PMF1");
    CHECK(bytes.size() == 4 + 5 * 4 + 2 * 8 + v.data().size() * 8);
    Field w = read_pmf1(ss);
    CHECK(w.grid() == g);
    CHECK(w.components() == 3);
    CHECK(w.data() == v.data());

    std::stringstream bad("PMF2xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx");
    CHECK_THROWS_AS(read_pmf1(bad), FormatError);
    std::stringstream cut(bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(read_pmf1(cut), FormatError);
}
