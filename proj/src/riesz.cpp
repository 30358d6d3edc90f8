#include "mm/riesz.hpp"

#include <algorithm>
#include <cmath>
#include <boost/math/quadrature/gauss.hpp>

#include "mm/spectral.hpp"

namespace mm {

namespace {

constexpr int GL = 16;

// Gauss-Legendre nodes and weights on [-1, 1].
struct Rule {
    std::array<double, GL> x{}, w{};
    Rule() {
        using G = boost::math::quadrature::gauss<double, GL>;
        const auto& a = G::abscissa();
        const auto& wt = G::weights();
        int k = 0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0) {
                x[k] = 0;
                w[k++] = wt[i];
                continue;
            }
            x[k] = a[i];
            w[k++] = wt[i];
            x[k] = -a[i];
            w[k++] = wt[i];
        }
    }
};

const Rule& rule() {
    static const Rule r;
    return r;
}

struct Interval {
    double lo, hi;
};

// Nonnegative pieces of [lo, hi] after folding by |.| and splitting at 0.
std::vector<Interval> fold(double lo, double hi) {
    if (lo >= 0) return {{lo, hi}};
    if (hi <= 0) return {{-hi, -lo}};
    return {{0, -lo}, {0, hi}};
}

// Nodes for the time integral over [lo, hi] (lo >= 0); t = s^2 removes the
// square-root behaviour of the kernel when the interval starts at 0.
void time_nodes(Interval I, std::vector<double>& t, std::vector<double>& w) {
    const Rule& R = rule();
    if (I.lo == 0) {
        const double S = std::sqrt(I.hi);
        for (int i = 0; i < GL; ++i) {
            const double s = 0.5 * S * (R.x[i] + 1);
            t.push_back(s * s);
            w.push_back(0.5 * S * R.w[i] * 2 * s);
        }
    } else {
        for (int i = 0; i < GL; ++i) {
            t.push_back(I.lo + 0.5 * (I.hi - I.lo) * (R.x[i] + 1));
            w.push_back(0.5 * (I.hi - I.lo) * R.w[i]);
        }
    }
}

void space_nodes(Interval I, std::vector<double>& x, std::vector<double>& w) {
    const Rule& R = rule();
    for (int i = 0; i < GL; ++i) {
        x.push_back(I.lo + 0.5 * (I.hi - I.lo) * (R.x[i] + 1));
        w.push_back(0.5 * (I.hi - I.lo) * R.w[i]);
    }
}

// Integral of the kernel over a box that avoids the singular point except
// possibly on its boundary.
double box_integral(const RieszKernel& K, Interval t, Interval x, Interval y, Interval z) {
    double total = 0;
    for (const auto& ti : fold(t.lo, t.hi))
        for (const auto& xi : fold(x.lo, x.hi))
            for (const auto& yi : fold(y.lo, y.hi))
                for (const auto& zi : fold(z.lo, z.hi)) {
                    std::vector<double> tn, tw, xn, xw, yn, yw, zn, zw;
                    time_nodes(ti, tn, tw);
                    space_nodes(xi, xn, xw);
                    space_nodes(yi, yn, yw);
                    space_nodes(zi, zn, zw);
                    double s = 0;
                    for (std::size_t a = 0; a < tn.size(); ++a)
                        for (std::size_t b = 0; b < xn.size(); ++b)
                            for (std::size_t c = 0; c < yn.size(); ++c)
                                for (std::size_t d = 0; d < zn.size(); ++d) {
                                    const double r = std::sqrt(xn[b] * xn[b] + yn[c] * yn[c] + zn[d] * zn[d]);
                                    s += tw[a] * xw[b] * yw[c] * zw[d] * K.kernel(tn[a], r);
                                }
                    total += s;
                }
    return total;
}

int signed_offset(int d, int N) {
    d = ((d % N) + N) % N;
    return d > N / 2 ? d - N : d;
}

int near_index(int dn, int i, int j, int k) {
    constexpr int M = RieszKernel::near + 1;
    return ((dn * M + i) * M + j) * M + k;
}

}  // namespace

RieszKernel::RieszKernel(const Grid& g, double a) : g_(g), a_(a) {
    if (!(a > 0 && a < 5)) throw DomainError("Riesz order must lie in (0, 5)");
    g.validate();
    const double dt = g.dt(), h = g.h();
    auto cell = [&](int n, int i, int j, int k) {
        return box_integral(*this, {(n - 0.5) * dt, (n + 0.5) * dt}, {(i - 0.5) * h, (i + 0.5) * h},
                            {(j - 0.5) * h, (j + 0.5) * h}, {(k - 0.5) * h, (k + 0.5) * h});
    };
    for (int n = 0; n <= near; ++n)
        for (int i = 0; i <= near; ++i)
            for (int j = i; j <= near; ++j)
                for (int k = j; k <= near; ++k)
                    if (n || i || j || k) near_[near_index(n, i, j, k)] = cell(n, i, j, k);
    // Self cell: by symmetry 16 copies of the positive orthant box B. With B'
    // its parabolic half, the kernel integral over B' is 2^{-a} times that over
    // B, so the integral over B follows from the 15 sub-boxes of B minus B'.
    const Interval T[2] = {{0, dt / 8}, {dt / 8, dt / 2}};
    const Interval S[2] = {{0, h / 4}, {h / 4, h / 2}};
    double ring = 0;
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int a2 = 0; a2 < 2; ++a2)
                for (int a3 = 0; a3 < 2; ++a3)
                    if (a0 || a1 || a2 || a3) ring += box_integral(*this, T[a0], S[a1], S[a2], S[a3]);
    near_[0] = 16 * ring / (1 - std::pow(2.0, -a));
}

double RieszKernel::kernel(double tau, double r) const {
    return std::pow(std::sqrt(std::abs(tau)) + r, -(5 - a_));
}

double RieszKernel::weight(int dn, int dx, int dy, int dz) const {
    const int N = g_.Nx;
    int o[3] = {std::abs(signed_offset(dx, N)), std::abs(signed_offset(dy, N)),
                std::abs(signed_offset(dz, N))};
    dn = std::abs(dn);
    if (dn <= near && o[0] <= near && o[1] <= near && o[2] <= near) {
        std::sort(o, o + 3);
        return near_[near_index(dn, o[0], o[1], o[2])];
    }
    const double h = g_.h();
    const double r = h * std::sqrt(double(o[0]) * o[0] + double(o[1]) * o[1] + double(o[2]) * o[2]);
    return kernel(dn * g_.dt(), r) * g_.dt() * h * h * h;
}

std::vector<std::vector<double>> riesz_direct(const Field& f, double a,
                                              const std::vector<NodeIndex>& targets) {
    const Grid& g = f.grid();
    const RieszKernel K(g, a);
    const int nc = f.components(), N = g.Nx;
    struct Src {
        NodeIndex at;
        std::array<double, 3> v;
    };
    std::vector<Src> src;
    for (int n = 0; n < g.Nt; ++n)
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int x = 0; x < N; ++x) {
                    Src s{{n, x, y, z}, {0, 0, 0}};
                    bool any = false;
                    for (int c = 0; c < nc; ++c) {
                        s.v[c] = f.at(n, c, z, y, x);
                        any = any || s.v[c] != 0;
                    }
                    if (any) src.push_back(s);
                }
    for (const NodeIndex& t : targets)
        if (t.n < 0 || t.n >= g.Nt || t.x < 0 || t.x >= N || t.y < 0 || t.y >= N || t.z < 0 || t.z >= N)
            throw DomainError("riesz_direct: target off grid");
    std::vector<std::vector<double>> out(targets.size(), std::vector<double>(nc, 0.0));
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const NodeIndex& t = targets[i];
        for (const Src& s : src) {
            const double w = K.weight(t.n - s.at.n, t.x - s.at.x, t.y - s.at.y, t.z - s.at.z);
            for (int c = 0; c < nc; ++c) out[i][c] += w * s.v[c];
        }
    }
    return out;
}

Field riesz_apply(const Field& f, double a) {
    const Grid& g = f.grid();
    const RieszKernel K(g, a);
    const Spectral& sp = *Spectral::get(g.Nx, g.L);
    const int N = g.Nx, Nt = g.Nt, nc = f.components();
    const std::size_t M = g.cells(), modes = sp.modes();

    // Transformed kernel per time lag; real because the weights are even in space.
    std::vector<double> Kh(std::size_t(Nt) * modes);
#pragma omp parallel
    {
        std::vector<double> w(M);
        std::vector<cplx> wh(modes);
#pragma omp for schedule(static)
        for (int lag = 0; lag < Nt; ++lag) {
            for (int z = 0; z < N; ++z)
                for (int y = 0; y < N; ++y)
                    for (int x = 0; x < N; ++x) w[(std::size_t(z) * N + y) * N + x] = K.weight(lag, x, y, z);
            sp.forward(w.data(), wh.data());
            for (std::size_t i = 0; i < modes; ++i) Kh[std::size_t(lag) * modes + i] = wh[i].real();
        }
    }

    Field out(g, nc);
    std::vector<cplx> F(std::size_t(Nt) * modes), O(std::size_t(Nt) * modes);
    for (int c = 0; c < nc; ++c) {
        std::vector<int> active;
        for (int n = 0; n < Nt; ++n) {
            const double* s = f.slice(n, c);
            if (std::any_of(s, s + M, [](double v) { return v != 0; })) active.push_back(n);
        }
        if (active.empty()) continue;
#pragma omp parallel for schedule(static)
        for (std::size_t i = 0; i < active.size(); ++i)
            sp.forward(f.slice(active[i], c), F.data() + std::size_t(active[i]) * modes);

        // O[n] = sum_m Kh[|n - m|] F[m], blocked over modes to stay in cache.
        constexpr std::size_t chunk = 256;
        const std::size_t nchunks = (modes + chunk - 1) / chunk;
#pragma omp parallel for schedule(static)
        for (std::size_t b = 0; b < nchunks; ++b) {
            const std::size_t k0 = b * chunk, k1 = std::min(modes, k0 + chunk);
            for (int n = 0; n < Nt; ++n) {
                cplx* o = O.data() + std::size_t(n) * modes;
                for (std::size_t k = k0; k < k1; ++k) o[k] = 0;
                for (int m : active) {
                    const double* kh = Kh.data() + std::size_t(std::abs(n - m)) * modes;
                    const cplx* fm = F.data() + std::size_t(m) * modes;
                    for (std::size_t k = k0; k < k1; ++k) o[k] += kh[k] * fm[k];
                }
            }
        }
#pragma omp parallel for schedule(static)
        for (int n = 0; n < Nt; ++n)
            sp.inverse_destructive(O.data() + std::size_t(n) * modes, out.slice(n, c));
    }
    return out;
}

double adams_hedberg_nu(double p, double q, double a) {
    if (!(p > 1 && p <= q && std::isfinite(q)))
        throw ExponentError("Adams-Hedberg needs 1 < p <= q < infinity");
    if (!(a > 0 && a < 5.0 / q)) throw ExponentError("Adams-Hedberg needs 0 < a < 5/q");
    return 1 - a * q / 5;
}

AdamsHedbergReport adams_hedberg_check(const Field& f, double p, double q, double a,
                                       const CylinderSamplingPlan& plan) {
    AdamsHedbergReport r;
    r.nu = adams_hedberg_nu(p, q, a);
    const NormEstimate nf = morrey_norm(f, {p, q}, plan);
    r.norm_f = nf.norm;
    if (nf.empty) {
        r.empty = true;
        return r;
    }
    const Field If = riesz_apply(f, a);
    r.norm_If = morrey_norm(If, {p / r.nu, q / r.nu}, plan).norm;
    r.rho = r.norm_If / r.norm_f;
    r.finite = std::isfinite(r.rho);
    return r;
}

ScaleInvarianceReport adams_hedberg_scaling(const Grid& g, const ProfileFn& profile, double t_c,
                                            double x_c, double p, double q, double a,
                                            const CylinderSamplingPlan& base,
                                            const std::vector<double>& lambdas) {
    ScaleInvarianceReport rep;
    rep.lambdas = lambdas;
    for (double lam : lambdas) {
        const Field f = sample(g, 1, [&](double t, const double* x, double* o) {
            double d[3];
            for (int k = 0; k < 3; ++k) {
                d[k] = std::remainder(x[k] - x_c, g.L);
                d[k] *= lam;
            }
            o[0] = profile(lam * lam * (t - t_c), d);
        });
        CylinderSamplingPlan pl = base;
        pl.r_min = base.r_min / lam;
        pl.r_max = base.r_max / lam;
        pl.space_stride = std::max(1, int(std::lround(base.space_stride / lam)));
        pl.time_stride = std::max(1, int(std::lround(base.time_stride / (lam * lam))));
        rep.rho.push_back(adams_hedberg_check(f, p, q, a, pl).rho);
    }
    if (!rep.rho.empty()) {
        const auto [lo, hi] = std::minmax_element(rep.rho.begin(), rep.rho.end());
        rep.spread = *hi / *lo - 1;
    }
    return rep;
}

namespace {

RieszGainExponents gain_exponents(const Rational& p, const Rational& q) {
    if (!(p > 2 && p <= q)) throw ExponentError("Riesz gain exponents need 2 < p <= q");
    if (!(q > 5)) throw ExponentError("Riesz gain exponents need q > 5");
    RieszGainExponents e;
    e.nu = gain_nu(q);
    e.p_over_nu = p / e.nu;
    e.q_over_nu = q / e.nu;
    e.sigma = gain_sigma(p, q);
    return e;
}

}  // namespace

RieszGainExponents corollary_I1_exponents(const Rational& p, const Rational& q) {
    return gain_exponents(p, q);
}

RieszGainExponents corollary_I2_exponents(const Rational& p, const Rational& q) {
    return gain_exponents(p, q);
}

}  // namespace mm
