#include "mm/solver.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "mm/field_ops.hpp"
#include "mm/spectral.hpp"

namespace mm {

namespace {

using Hat = std::vector<cplx>;
using Hat3 = std::array<Hat, 3>;
using Arr = std::vector<double>;
using Arr3 = std::array<Arr, 3>;

const cplx I(0.0, 1.0);

// Per-grid spectral bookkeeping shared by all stages of a step.
struct Kit {
    const Spectral& sp;
    std::size_t R, M;
    std::vector<std::array<double, 3>> kv;  // wavevector per stored mode
    std::vector<double> k2;
    std::vector<char> keep;  // modes retained by the truncation

    Kit(const Grid& g, bool dealias) : sp(spectral_of(g)), R(sp.real_size()), M(sp.modes()) {
        kv.resize(M);
        k2.resize(M);
        keep.resize(M);
        const int N = sp.N();
        sp.for_modes([&](std::size_t idx, int iz, int iy, int ix) {
            kv[idx] = {sp.k(ix), sp.k(iy), sp.k(iz)};
            k2[idx] = kv[idx][0] * kv[idx][0] + kv[idx][1] * kv[idx][1] + kv[idx][2] * kv[idx][2];
            const int f[3] = {sp.freq(ix), sp.freq(iy), sp.freq(iz)};
            bool in = true;
            for (int a : f) {
                const int m = std::abs(a);
                in = in && 2 * m < N && (!dealias || 3 * m < N);
            }
            keep[idx] = in;
        });
    }

    Hat fwd(const double* x) const {
        Hat h(M);
        sp.forward(x, h.data());
        for (std::size_t i = 0; i < M; ++i)
            if (!keep[i]) h[i] = 0;
        return h;
    }
    Arr inv(const Hat& h) const {
        Arr x(R);
        sp.inverse(h.data(), x.data());
        return x;
    }
    Arr dinv(const Hat& h, int axis) const {
        Hat d(M);
        for (std::size_t i = 0; i < M; ++i) d[i] = I * kv[i][axis] * h[i];
        Arr x(R);
        sp.inverse_destructive(d.data(), x.data());
        return x;
    }
    Hat3 curl(const Hat3& v, double s) const {
        Hat3 r{Hat(M), Hat(M), Hat(M)};
        for (std::size_t i = 0; i < M; ++i)
            for (int a = 0; a < 3; ++a) {
                const int b = (a + 1) % 3, c = (a + 2) % 3;
                r[a][i] = s * I * (kv[i][b] * v[c][i] - kv[i][c] * v[b][i]);
            }
        return r;
    }
};

struct Rhs {
    Hat3 u, w;
    Hat p;
};

Arr3 sample_supplier(const VectorSupplier& s, double t, std::size_t R) {
    Arr3 a{Arr(R, 0.0), Arr(R, 0.0), Arr(R, 0.0)};
    if (s) {
        double* out[3] = {a[0].data(), a[1].data(), a[2].data()};
        s(t, out);
    }
    return a;
}

// Explicit part of both equations at time t, with the pressure gradient removed.
Rhs explicit_terms(const Kit& K, const Hat3& uh, const Hat3& wh, double t, const Toggles& tg,
                   const VectorSupplier& a, const VectorSupplier& f) {
    const std::size_t R = K.R, M = K.M;
    Rhs r{{Hat(M, 0.0), Hat(M, 0.0), Hat(M, 0.0)}, {Hat(M, 0.0), Hat(M, 0.0), Hat(M, 0.0)}, Hat(M, 0.0)};
    const bool pert = tg.perturbation && a;
    Arr3 u;
    if (tg.convection || pert)
        for (int i = 0; i < 3; ++i) u[i] = K.inv(uh[i]);

    Arr3 nu{Arr(R, 0.0), Arr(R, 0.0), Arr(R, 0.0)};
    bool any_u = false;
    if (tg.convection || pert) {
        Arr3 av;
        std::array<Arr3, 3> da;
        if (pert) {
            av = sample_supplier(a, t, R);
            for (int i = 0; i < 3; ++i) {
                const Hat ah = K.fwd(av[i].data());
                for (int j = 0; j < 3; ++j) da[i][j] = K.dinv(ah, j);
            }
        }
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const Arr dui = K.dinv(uh[i], j);
                for (std::size_t p = 0; p < R; ++p) {
                    double v = 0;
                    if (tg.convection) v -= u[j][p] * dui[p];
                    if (pert) v += av[j][p] * dui[p] + u[j][p] * da[i][j][p];
                    nu[i][p] += v;
                }
            }
        any_u = true;
    }
    if (any_u)
        for (int i = 0; i < 3; ++i) r.u[i] = K.fwd(nu[i].data());
    if (tg.coupling) {
        const Hat3 c = K.curl(wh, 0.5);
        for (int i = 0; i < 3; ++i)
            for (std::size_t m = 0; m < M; ++m) r.u[i][m] += c[i][m];
    }
    if (tg.forcing && f) {
        const Arr3 fv = sample_supplier(f, t, R);
        for (int i = 0; i < 3; ++i) {
            const Hat fh = K.fwd(fv[i].data());
            for (std::size_t m = 0; m < M; ++m) r.u[i][m] += fh[m];
        }
    }
    // grad p carries the longitudinal part; keep only the solenoidal rest.
    for (std::size_t m = 0; m < M; ++m) {
        if (K.k2[m] == 0) continue;
        const auto& k = K.kv[m];
        const cplx kn = k[0] * r.u[0][m] + k[1] * r.u[1][m] + k[2] * r.u[2][m];
        r.p[m] = -I * kn / K.k2[m];
        for (int i = 0; i < 3; ++i) r.u[i][m] -= k[i] * kn / K.k2[m];
    }

    if (tg.convection) {
        Arr3 nw{Arr(R, 0.0), Arr(R, 0.0), Arr(R, 0.0)};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const Arr dwi = K.dinv(wh[i], j);
                for (std::size_t p = 0; p < R; ++p) nw[i][p] -= u[j][p] * dwi[p];
            }
        for (int i = 0; i < 3; ++i) r.w[i] = K.fwd(nw[i].data());
    }
    if (tg.coupling) {
        const Hat3 c = K.curl(uh, 0.5);
        for (int i = 0; i < 3; ++i)
            for (std::size_t m = 0; m < M; ++m) r.w[i][m] += c[i][m];
    }
    return r;
}

// exp(tau * linear operator): heat for u; for omega the part parallel to k
// decays at (2|k|^2 + 1), the perpendicular part at (|k|^2 + 1).
void apply_linear(const Kit& K, Hat3& uh, Hat3& wh, double tau, const Toggles& tg) {
    const double g = tg.grad_div ? 1.0 : 0.0, d = tg.damping ? 1.0 : 0.0;
    for (std::size_t m = 0; m < K.M; ++m) {
        const double k2 = K.k2[m];
        const double eu = std::exp(-k2 * tau);
        for (int i = 0; i < 3; ++i) uh[i][m] *= eu;
        const double ep = std::exp(-(k2 + d) * tau);
        if (k2 == 0) {
            for (int i = 0; i < 3; ++i) wh[i][m] *= ep;
            continue;
        }
        const double el = std::exp(-((1 + g) * k2 + d) * tau);
        const auto& k = K.kv[m];
        const cplx kw = (k[0] * wh[0][m] + k[1] * wh[1][m] + k[2] * wh[2][m]) / k2;
        for (int i = 0; i < 3; ++i) wh[i][m] = ep * wh[i][m] + (el - ep) * kw * k[i];
    }
}

void axpy3(Hat3& y, double s, const Hat3& x) {
    for (int i = 0; i < 3; ++i)
        for (std::size_t m = 0; m < y[i].size(); ++m) y[i][m] += s * x[i][m];
}

double cfl_number(const SolverState& s, const Grid& g, double dt) {
    double sum = 0;
    for (int i = 0; i < 3; ++i) {
        double m = 0;
        for (double v : s.u[i]) m = std::max(m, std::abs(v));
        sum += m;
    }
    return dt * sum / g.h();
}

double max_grad(const Spectral& sp, const Arr3& v) {
    double m = 0;
    Arr d(sp.real_size());
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            slice::deriv(sp, v[i].data(), j, d.data());
            for (double x : d) m = std::max(m, std::abs(x));
        }
    return m;
}

double max_div(const Spectral& sp, const Arr3& v) {
    Arr d(sp.real_size());
    const double* in[3] = {v[0].data(), v[1].data(), v[2].data()};
    slice::divergence(sp, in, d.data());
    double m = 0;
    for (double x : d) m = std::max(m, std::abs(x));
    return m;
}

Hat pressure_hat(const Kit& K, const SolverState& s, const SolverConfig& cfg,
                 const VectorSupplier& a, const VectorSupplier& f) {
    Hat3 uh, wh;
    for (int i = 0; i < 3; ++i) {
        uh[i] = K.fwd(s.u[i].data());
        wh[i] = K.fwd(s.w[i].data());
    }
    return explicit_terms(K, uh, wh, s.t, cfg.toggles, a, f).p;
}

}  // namespace

void SolverConfig::validate() const {
    grid.validate();
    if (substeps < 1) throw ConfigError("solver: substeps must be >= 1");
    if (!(cfl > 0)) throw ConfigError("solver: cfl bound must be positive");
}

VectorSupplier supplier_from(const Grid& g, const PointFn& fn) {
    if (!fn) return {};
    return [g, fn](double t, double* const out[3]) {
        const int N = g.Nx;
        std::size_t idx = 0;
        double x[3], v[3];
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int i = 0; i < N; ++i, ++idx) {
                    x[0] = g.x(i);
                    x[1] = g.x(y);
                    x[2] = g.x(z);
                    fn(t, x, v);
                    for (int c = 0; c < 3; ++c) out[c][idx] = v[c];
                }
    };
}

SolverState initial_state(const Grid& g, const PointFn& u0, const PointFn& w0) {
    g.validate();
    const std::size_t R = g.cells();
    SolverState s;
    for (int i = 0; i < 3; ++i) {
        s.u[i].assign(R, 0.0);
        s.w[i].assign(R, 0.0);
    }
    s.p.assign(R, 0.0);
    if (u0) {
        double* out[3] = {s.u[0].data(), s.u[1].data(), s.u[2].data()};
        supplier_from(g, u0)(0.0, out);
    }
    if (w0) {
        double* out[3] = {s.w[0].data(), s.w[1].data(), s.w[2].data()};
        supplier_from(g, w0)(0.0, out);
    }
    const Spectral& sp = spectral_of(g);
    if (max_div(sp, s.u) > 1e-10 * max_grad(sp, s.u))
        throw DivergenceError("initial velocity is not divergence free");
    return s;
}

void step(SolverState& s, const SolverConfig& cfg, const VectorSupplier& a,
          const VectorSupplier& f) {
    const Grid& g = cfg.grid;
    const double tau = cfg.dt();
    const double c = cfl_number(s, g, tau);
    if (c > cfg.cfl)
        throw StepSizeError("solver: CFL number " + std::to_string(c) + " exceeds bound " +
                            std::to_string(cfg.cfl));
    const Kit K(g, cfg.dealias);
    Hat3 uh, wh;
    for (int i = 0; i < 3; ++i) {
        uh[i] = K.fwd(s.u[i].data());
        wh[i] = K.fwd(s.w[i].data());
    }
    // The state is kept solenoidal: project once more in case the input drifted.
    for (std::size_t m = 0; m < K.M; ++m) {
        if (K.k2[m] == 0) continue;
        const auto& k = K.kv[m];
        const cplx kn = (k[0] * uh[0][m] + k[1] * uh[1][m] + k[2] * uh[2][m]) / K.k2[m];
        for (int i = 0; i < 3; ++i) uh[i][m] -= k[i] * kn;
    }

    const Rhs n1 = explicit_terms(K, uh, wh, s.t, cfg.toggles, a, f);
    Hat3 up = uh, wp = wh;
    axpy3(up, tau, n1.u);
    axpy3(wp, tau, n1.w);
    apply_linear(K, up, wp, tau, cfg.toggles);
    const Rhs n2 = explicit_terms(K, up, wp, s.t + tau, cfg.toggles, a, f);

    axpy3(uh, 0.5 * tau, n1.u);
    axpy3(wh, 0.5 * tau, n1.w);
    apply_linear(K, uh, wh, tau, cfg.toggles);
    axpy3(uh, 0.5 * tau, n2.u);
    axpy3(wh, 0.5 * tau, n2.w);

    for (int i = 0; i < 3; ++i) {
        s.u[i] = K.inv(uh[i]);
        s.w[i] = K.inv(wh[i]);
        for (std::size_t p = 0; p < K.R; ++p)
            if (!std::isfinite(s.u[i][p]) || !std::isfinite(s.w[i][p]))
                throw DivergenceError("solver: non-finite value at t = " + std::to_string(s.t + tau));
    }
    s.t += tau;
}

SolverState advance(SolverState s, const SolverConfig& cfg, double duration,
                    const VectorSupplier& a, const VectorSupplier& f) {
    cfg.validate();
    if (duration < 0) throw StepSizeError("advance: negative duration");
    const double tau = cfg.dt();
    const long n = std::lround(duration / tau);
    if (std::abs(n * tau - duration) > 1e-9 * std::max(1.0, duration))
        throw StepSizeError("advance: duration is not a multiple of the step");
    const double t0 = s.t;
    for (long i = 0; i < n; ++i) {
        step(s, cfg, a, f);
        s.t = t0 + (i + 1) * tau;
    }
    return s;
}

Diagnostics diagnose(const SolverState& s, const SolverConfig& cfg) {
    const Grid& g = cfg.grid;
    const Spectral& sp = spectral_of(g);
    const double h3 = g.h() * g.h() * g.h();
    Diagnostics d;
    d.t = s.t;
    double su = 0;
    for (int i = 0; i < 3; ++i)
        for (std::size_t p = 0; p < g.cells(); ++p) {
            d.energy_u += s.u[i][p] * s.u[i][p];
            d.energy_w += s.w[i][p] * s.w[i][p];
        }
    su = d.energy_u;
    d.energy_u *= h3;
    d.energy_w *= h3;
    d.rms_u = std::sqrt(su / (3.0 * g.cells()));
    Arr3 cu{Arr(g.cells()), Arr(g.cells()), Arr(g.cells())};
    const double* in[3] = {s.u[0].data(), s.u[1].data(), s.u[2].data()};
    double* out[3] = {cu[0].data(), cu[1].data(), cu[2].data()};
    slice::curl(sp, in, out);
    for (int i = 0; i < 3; ++i)
        for (double v : cu[i]) d.enstrophy += v * v;
    d.enstrophy *= h3;
    d.max_div_u = max_div(sp, s.u);
    d.max_div_w = max_div(sp, s.w);
    d.cfl = cfl_number(s, g, cfg.dt());
    return d;
}

RunResult run(const SolverConfig& cfg, const SolverState& initial, const VectorSupplier& a,
              const VectorSupplier& f) {
    cfg.validate();
    const Grid& g = cfg.grid;
    if (initial.u[0].size() != g.cells()) throw ShapeError("run: initial state does not match the grid");
    const Kit K(g, cfg.dealias);
    RunResult r{Field(g, 3), Field(g, 3), Field(g, 1), Field(g, 3), Field(g, 3), {}};
    r.u.divergence_free = true;
    r.a.divergence_free = true;
    r.f.divergence_free = true;
    SolverState s = initial;
    s.t = 0;
    const VectorSupplier fa = cfg.toggles.perturbation ? a : VectorSupplier{};
    const VectorSupplier ff = cfg.toggles.forcing ? f : VectorSupplier{};
    for (int n = 0; n < g.Nt; ++n) {
        s.t = g.t(n);
        for (int i = 0; i < 3; ++i) {
            std::copy(s.u[i].begin(), s.u[i].end(), r.u.slice(n, i));
            std::copy(s.w[i].begin(), s.w[i].end(), r.w.slice(n, i));
        }
        Hat ph = pressure_hat(K, s, cfg, fa, ff);
        K.sp.inverse_destructive(ph.data(), r.p.slice(n, 0));
        if (fa) {
            double* out[3] = {r.a.slice(n, 0), r.a.slice(n, 1), r.a.slice(n, 2)};
            fa(s.t, out);
        }
        if (ff) {
            double* out[3] = {r.f.slice(n, 0), r.f.slice(n, 1), r.f.slice(n, 2)};
            ff(s.t, out);
        }
        r.diagnostics.push_back(diagnose(s, cfg));
        if (n + 1 < g.Nt) s = advance(s, cfg, g.dt(), fa, ff);
    }
    return r;
}

void write_diagnostics_csv(const std::vector<Diagnostics>& d, const std::string& path) {
    std::ofstream o(path);
    if (!o) throw FormatError("cannot open " + path);
    o << "t,E_u,E_omega,enstrophy,max_div_u,max_div_omega,CFL\n" << std::setprecision(17);
    for (const auto& r : d)
        o << r.t << ',' << r.energy_u << ',' << r.energy_w << ',' << r.enstrophy << ','
          << r.max_div_u << ',' << r.max_div_w << ',' << r.cfl << '\n';
}

PointFn taylor_green(double L, double amplitude) {
    const double k = 2 * std::numbers::pi / L;
    return [k, amplitude](double, const double* x, double* o) {
        const double X = k * x[0], Y = k * x[1], Z = k * x[2];
        o[0] = amplitude * std::sin(X) * std::cos(Y) * std::cos(Z);
        o[1] = -amplitude * std::cos(X) * std::sin(Y) * std::cos(Z);
        o[2] = 0.0;
    };
}

PointFn default_perturbation(const Grid& g, double target_l6) {
    const double k = 2 * std::numbers::pi / g.L;
    auto unit = [k](const double* x, double* o) {
        const double X = k * x[0], Y = k * x[1], Z = k * x[2];
        o[0] = 0.0;
        o[1] = std::cos(X) * std::sin(Y) * std::cos(Z);
        o[2] = -std::cos(X) * std::cos(Y) * std::sin(Z);
    };
    // Node sums are exact for this trigonometric polynomial once Nx > 6.
    double s = 0;
    const int N = g.Nx;
    for (int z = 0; z < N; ++z)
        for (int y = 0; y < N; ++y)
            for (int i = 0; i < N; ++i) {
                const double x[3] = {g.x(i), g.x(y), g.x(z)};
                double v[3];
                unit(x, v);
                s += std::pow(v[1] * v[1] + v[2] * v[2], 3);
            }
    const double norm = std::pow(g.T * s * std::pow(g.h(), 3), 1.0 / 6.0);
    const double A = target_l6 / norm;
    return [unit, A](double, const double* x, double* o) {
        unit(x, o);
        for (int c = 0; c < 3; ++c) o[c] *= A;
    };
}

InterpolationReport interpolation_check(const Field& w, const Cylinder& q) {
    require_components(w, 3, "interpolation_check");
    const Grid& g = w.grid();
    if (q.a < -1e-12 || q.b > g.T + 1e-12 || !(q.r < g.L / 2) || !(q.a < q.b))
        throw DomainError("interpolation_check: cylinder lies outside the history");
    const Spectral& sp = spectral_of(g);
    const int N = g.Nx;
    const double h3 = g.h() * g.h() * g.h(), dt = g.dt();
    double s_lhs = 0, s_grad = 0, sup = 0;
    Arr d(g.cells());
    std::vector<char> inside(g.cells());
    for (int n = 0; n < g.Nt; ++n) {
        const double t = g.t(n);
        if (!(t > q.a && t < q.b)) continue;
        std::size_t idx = 0;
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int i = 0; i < N; ++i, ++idx) {
                    const double x[3] = {g.x(i), g.x(y), g.x(z)};
                    inside[idx] = q.contains(t, x, g.L);
                }
        double l2 = 0;
        for (std::size_t p = 0; p < g.cells(); ++p) {
            if (!inside[p]) continue;
            double m2 = 0;
            for (int c = 0; c < 3; ++c) m2 += w.slice(n, c)[p] * w.slice(n, c)[p];
            l2 += m2;
            s_lhs += std::pow(m2, 5.0 / 3.0);
        }
        sup = std::max(sup, l2 * h3);
        for (int c = 0; c < 3; ++c)
            for (int j = 0; j < 3; ++j) {
                slice::deriv(sp, w.slice(n, c), j, d.data());
                for (std::size_t p = 0; p < g.cells(); ++p)
                    if (inside[p]) s_grad += d[p] * d[p];
            }
    }
    InterpolationReport r;
    r.lhs = std::pow(s_lhs * dt * h3, 0.3);
    r.sup_l2 = std::sqrt(sup);
    r.grad_l2 = std::sqrt(s_grad * dt * h3);
    r.rhs = std::pow(r.sup_l2, 0.4) * std::pow(r.grad_l2, 0.6);
    if (r.rhs > 0) r.ratio = r.lhs / r.rhs;
    else r.ratio = r.lhs > 0 ? std::numeric_limits<double>::infinity() : 0.0;
    r.finite = std::isfinite(r.lhs) && std::isfinite(r.rhs) && std::isfinite(r.ratio);
    return r;
}

}  // namespace mm
