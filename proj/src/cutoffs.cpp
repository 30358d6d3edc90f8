#include "mm/cutoffs.hpp"

#include <cmath>

namespace mm {

namespace {

double binom(int n, int k) {
    double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return r;
}

}  // namespace

Smoothstep::Smoothstep(int order) : n_(order) {
    if (order < 1 || order > 8) throw DomainError("Smoothstep: order must lie in [1, 8]");
    // s^{n+1} sum_k C(n+k, k) (1-s)^k, expanded in monomials.
    std::vector<double> c(2 * n_ + 2, 0.0);
    for (int k = 0; k <= n_; ++k) {
        const double w = binom(n_ + k, k);
        for (int j = 0; j <= k; ++j) c[n_ + 1 + j] += w * binom(k, j) * ((j % 2) ? -1.0 : 1.0);
    }
    coef_.push_back(c);
    for (int d = 1; d <= 3 + n_; ++d) {
        const auto& p = coef_.back();
        std::vector<double> q(p.size() > 1 ? p.size() - 1 : 1, 0.0);
        for (std::size_t i = 1; i < p.size(); ++i) q[i - 1] = p[i] * double(i);
        coef_.push_back(q);
    }
}

double Smoothstep::operator()(double s, int k) const {
    if (s <= 0) return 0.0;
    if (s >= 1) return k == 0 ? 1.0 : 0.0;
    if (k >= int(coef_.size())) return 0.0;
    const auto& c = coef_[k];
    double r = 0;
    for (std::size_t i = c.size(); i-- > 0;) r = r * s + c[i];
    return r;
}

Cutoff::Cutoff(const Cylinder& plateau, const Cylinder& support, int order)
    : in_(plateau), out_(support), step_(order) {
    if (!(plateau.a > support.a && plateau.b < support.b && plateau.r < support.r && plateau.r > 0))
        throw NestingError("Cutoff: plateau must lie strictly inside the support");
    for (int k = 0; k < 3; ++k)
        if (std::abs(plateau.x0[k] - support.x0[k]) > 1e-12)
            throw NestingError("Cutoff: plateau and support balls must be concentric");
}

double Cutoff::time_factor(double t, int m) const {
    if (m < 0 || m > step_.order()) throw DomainError("Cutoff: time derivative order too high");
    const double da = in_.a - out_.a, db = out_.b - in_.b;
    const double sa = (t - out_.a) / da, sb = (out_.b - t) / db;
    double r = 0;
    for (int j = 0; j <= m; ++j) {
        const double fa = step_(sa, j) / std::pow(da, j);
        const double fb = step_(sb, m - j) * std::pow(-1.0 / db, m - j);
        r += binom(m, j) * fa * fb;
    }
    return r;
}

double Cutoff::space_factor(const double* x, const std::array<int, 3>& beta, double L) const {
    double y[3], rho = 0;
    for (int k = 0; k < 3; ++k) {
        double d = x[k] - in_.x0[k];
        if (std::isfinite(L)) d -= L * std::nearbyint(d / L);
        y[k] = d;
        rho += d * d;
    }
    const double r2 = in_.r * in_.r, D = out_.r * out_.r - r2;
    const double s = (rho - r2) / D;
    int ax[3], ord = 0;
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < beta[k]; ++j) {
            if (ord == 3) throw DomainError("Cutoff: spatial derivative order above 3");
            ax[ord++] = k;
        }
    if (ord == 0) return 1.0 - step_(s, 0);
    auto g = [&](int k) { return -step_(s, k) / std::pow(D, k); };
    if (ord == 1) return 2 * g(1) * y[ax[0]];
    auto dl = [](int a, int b) { return a == b ? 1.0 : 0.0; };
    const int i = ax[0], j = ax[1];
    if (ord == 2) return 4 * g(2) * y[i] * y[j] + 2 * g(1) * dl(i, j);
    const int k = ax[2];
    return 8 * g(3) * y[i] * y[j] * y[k] +
           4 * g(2) * (dl(i, j) * y[k] + dl(i, k) * y[j] + dl(j, k) * y[i]);
}

double Cutoff::value(double t, const double* x, double L) const {
    const double tf = time_factor(t, 0);
    return tf == 0 ? 0.0 : tf * space_factor(x, {0, 0, 0}, L);
}

Field Cutoff::field(const Grid& g) const {
    return sample(g, 1, [&](double t, const double* x, double* out) { out[0] = value(t, x, g.L); });
}

CutoffGrid::CutoffGrid(const Cutoff& c, const Grid& g) : c_(&c), g_(g) {
    if (!(c.support().r < g.L / 2))
        throw DomainError("CutoffGrid: support radius must be below L/2 to avoid wrapping");
    const int N = g.Nx;
    for (int bx = 0; bx <= 3; ++bx)
        for (int by = 0; by + bx <= 3; ++by)
            for (int bz = 0; bz + by + bx <= 3; ++bz) {
                std::vector<double> v(g.cells());
                bool any = false;
                std::size_t idx = 0;
                for (int z = 0; z < N; ++z)
                    for (int y = 0; y < N; ++y)
                        for (int x = 0; x < N; ++x, ++idx) {
                            const double p[3] = {g.x(x), g.x(y), g.x(z)};
                            v[idx] = c.space_factor(p, {bx, by, bz}, g.L);
                            any = any || v[idx] != 0;
                        }
                if (any) tab_[beta_index(bx, by, bz)] = std::move(v);
            }
}

BumpFamily make_bumps(const Cylinder& outer, const Cylinder& mid, const Cylinder& inner,
                      int order) {
    if (!(outer.a > 0))
        throw DomainError("make_bumps: the outer cylinder must start after t = 0");
    if (!mid.strictly_inside(outer) || !inner.strictly_inside(mid))
        throw NestingError("make_bumps: cylinders must be strictly nested with positive margins");
    BumpFamily b{outer, mid, inner, Cutoff(mid, outer, order), Cutoff(inner, mid, order)};
    return b;
}

std::array<Cylinder, 5> default_cylinders(const Grid& g) {
    static constexpr double radius[5] = {0.41, 0.35, 0.29, 0.23, 0.17};
    std::array<Cylinder, 5> c;
    for (int i = 0; i < 5; ++i) {
        c[i].a = g.T * (0.10 + 0.08 * i);
        c[i].b = g.T * (0.98 - 0.08 * i);
        c[i].x0 = {g.L / 2, g.L / 2, g.L / 2};
        c[i].r = g.L * radius[i];
    }
    return c;
}

BumpFamily velocity_bumps(const Grid& g, int order) {
    const auto c = default_cylinders(g);
    return make_bumps(c[0], c[1], c[2], order);
}

BumpFamily microrotation_bumps(const Grid& g, int order) {
    const auto c = default_cylinders(g);
    return make_bumps(c[2], c[3], c[4], order);
}

}  // namespace mm
