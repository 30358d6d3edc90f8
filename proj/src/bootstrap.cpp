#include "mm/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "mm/field_ops.hpp"
#include "mm/spectral.hpp"

namespace mm {

namespace {

constexpr double kExactSteps = 256;

void require_q0(const Rational& q0) {
    if (!(q0 > 5)) throw ExponentError("q0 must exceed 5, got " + to_string(q0));
    if (!(q0 <= 6)) throw ExponentError("q0 must not exceed 6, got " + to_string(q0));
}

}  // namespace

BootstrapChain bootstrap_chain(const Rational& p0, const Rational& q0) {
    require_q0(q0);
    if (!(p0 > 2)) throw ExponentError("p0 must exceed 2, got " + to_string(p0));
    if (!(p0 <= q0)) throw ExponentError("p0 must not exceed q0, got " + to_string(p0));
    const Rational nu = gain_nu(q0);
    BootstrapChain c;
    c.states.push_back({p0, q0, nu, 0});
    // Denominators grow linearly with the step count; long chains (q0 near 5)
    // run in f64 with a relative comparison slack instead.
    const double estimate = std::log(to_double(q0 / p0)) / -std::log(to_double(nu));
    if (estimate <= kExactSteps) {
        while (c.states.back().p < q0) {
            const ExponentState& s = c.states.back();
            c.states.push_back({std::min<Rational>(s.p / nu, q0), q0, nu, s.step + 1});
        }
        return c;
    }
    const double q = to_double(q0), v = to_double(nu);
    double p = to_double(p0);
    while (p < q * (1 - 1e-12)) {
        p /= v;
        const bool last = p >= q * (1 - 1e-12);
        c.states.push_back({last ? q0 : rational_from_double(p), q0, nu, c.states.back().step + 1});
    }
    return c;
}

OmegaWindow omega_window(const Rational& q0) {
    require_q0(q0);
    OmegaWindow w;
    w.q1 = 1 / (1 / q0 + Rational(3, 10));
    w.lo = Rational(10, 3);
    w.hi = Rational(15, 4);
    w.first_order.nu = 1 - w.q1 / 5;
    w.first_order.q_over_nu = w.q1 / w.first_order.nu;
    w.second_order.nu = 1 - 2 * w.q1 / 5;
    w.second_order.q_over_nu = w.q1 / w.second_order.nu;
    return w;
}

HypothesisReport hypothesis_check(const Field& u, const Field& w, const HypothesisGeometry& geo,
                                  double p0, double q0, const CylinderSamplingPlan& plan) {
    if (!geo.Q1.strictly_inside(geo.Q) || !geo.Q2.strictly_inside(geo.Q1))
        throw NestingError("hypothesis_check: need Q2 strictly inside Q1 strictly inside Q");
    require_q0(rational_from_double(q0));
    MorreyParams mp{p0, q0};
    mp.validate();
    HypothesisReport r;
    r.hypothesis = morrey_norm(restrict_to(u, geo.Q), mp, plan);
    r.u_lq = lp_norm(restrict_to(u, geo.Q1), q0);
    const Field w2 = restrict_to(w, geo.Q2);
    r.w_lq = lp_norm(w2, q0);
    r.w_window_lo = lp_norm(w2, 10.0 / 3.0);
    r.w_window_hi = lp_norm(w2, 3.75);
    r.finite = std::isfinite(r.hypothesis.norm) && std::isfinite(r.u_lq) && std::isfinite(r.w_lq) &&
               std::isfinite(r.w_window_lo) && std::isfinite(r.w_window_hi);
    return r;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("loglog_slope: need two or more points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0) || !(y[i] > 0)) return std::nan("");
        const double a = std::log(x[i]), b = std::log(y[i]);
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

EnergyMonitorSeries ckn_series(const Field& density, const Event& center, std::vector<double> radii,
                               std::optional<double> eps) {
    require_components(density, 1, "ckn_series");
    const Grid& g = density.grid();
    std::sort(radii.begin(), radii.end(), std::greater<>());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    if (radii.empty()) throw DomainError("ckn: no radii");
    const int N = g.Nx;
    EnergyMonitorSeries s;
    for (double r : radii) {
        if (!(r > 0)) throw DomainError("ckn: radii must be positive");
        if (!(r < g.L / 2)) throw DomainError("ckn: radius must be below L/2");
        if (center.t - r * r < -1e-12 || center.t + r * r > g.T + 1e-12)
            throw DomainError("ckn: cylinder of radius " + std::to_string(r) + " leaves the history");
        const Cylinder c{center.t - r * r, center.t + r * r, center.x, r};
        double sum = 0;
        std::size_t count = 0;
        for (int n = 0; n < g.Nt; ++n) {
            const double t = g.t(n);
            if (!(t > c.a && t < c.b)) continue;
            const double* d = density.slice(n, 0);
            std::size_t idx = 0;
            for (int z = 0; z < N; ++z)
                for (int y = 0; y < N; ++y)
                    for (int i = 0; i < N; ++i, ++idx) {
                        const double x[3] = {g.x(i), g.x(y), g.x(z)};
                        if (!c.contains(t, x, g.L)) continue;
                        sum += d[idx];
                        ++count;
                    }
        }
        if (count == 0) throw DomainError("ckn: radius " + std::to_string(r) + " contains no nodes");
        const double measure = 8.0 * std::numbers::pi / 3.0 * std::pow(r, 5);
        s.points.push_back({r, sum / double(count) * measure / r, count});
    }
    if (s.points.size() >= 2) {
        const std::size_t k = std::min<std::size_t>(3, s.points.size());
        std::vector<double> x, y;
        for (std::size_t i = s.points.size() - k; i < s.points.size(); ++i) {
            x.push_back(s.points[i].r);
            y.push_back(s.points[i].value);
        }
        s.slope = loglog_slope(x, y);
    }
    if (eps) {
        for (std::size_t i = s.points.size(); i-- > 0;) {
            if (s.points[i].value > *eps) break;
            s.crossing = s.points[i].r;
        }
    }
    return s;
}

EnergyMonitorSeries ckn_monitor(const Field& u, const Field& w, const Event& center,
                                std::vector<double> radii, std::optional<double> eps) {
    require_components(u, 3, "ckn_monitor");
    require_same_shape(u, w, "ckn_monitor");
    const Grid& g = u.grid();
    const Spectral& sp = spectral_of(g);
    Field dens(g, 1);
    std::vector<double> d(g.cells());
    for (int n = 0; n < g.Nt; ++n) {
        double* out = dens.slice(n, 0);
        for (const Field* f : {&u, &w})
            for (int c = 0; c < 3; ++c)
                for (int j = 0; j < 3; ++j) {
                    slice::deriv(sp, f->slice(n, c), j, d.data());
                    for (std::size_t p = 0; p < g.cells(); ++p) out[p] += d[p] * d[p];
                }
    }
    return ckn_series(dens, center, std::move(radii), eps);
}

}  // namespace mm
