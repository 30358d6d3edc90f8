#pragma once

// Expressions of the form sum_k (d^k chi) * G_k for one cutoff chi and grid
// factors G_k, on a single time slice. Derivatives act by the Leibniz rule:
// analytic on chi, spectral on G_k. Evaluating after all derivatives keeps
// identities like phi * grad(psi) = 0 exact instead of truncation-limited.

#include <array>
#include <map>
#include <vector>

#include "mm/cutoffs.hpp"
#include "mm/spectral.hpp"

namespace mm::loc {

using Arr = std::vector<double>;
using Vec = std::array<Arr, 3>;

constexpr int kPlain = -1;

inline int key(int m, int bidx) { return m * 64 + bidx; }
inline int axis_step(int axis) { return axis == 0 ? 16 : (axis == 1 ? 4 : 1); }

struct Ctx {
    const Spectral& sp;
    const CutoffGrid* cg;  // null when no cutoff keys are evaluated
    int n;

    std::size_t cells() const { return sp.real_size(); }
    Arr d(const Arr& g, int axis) const {
        Arr r(g.size());
        slice::deriv(sp, g.data(), axis, r.data());
        return r;
    }
    Arr zeros() const { return Arr(cells(), 0.0); }
};

class Scalar {
public:
    Scalar() = default;
    Scalar(int k, Arr g) { t_.emplace(k, std::move(g)); }

    void add(int k, const Arr& g, double s = 1.0) {
        auto it = t_.find(k);
        if (it == t_.end()) {
            Arr v(g.size());
            for (std::size_t i = 0; i < g.size(); ++i) v[i] = s * g[i];
            t_.emplace(k, std::move(v));
        } else {
            for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += s * g[i];
        }
    }
    void add(const Scalar& o, double s = 1.0) {
        for (const auto& [k, g] : o.t_) add(k, g, s);
    }
    const std::map<int, Arr>& terms() const { return t_; }

private:
    std::map<int, Arr> t_;
};

using VScalar = std::array<Scalar, 3>;

inline Scalar plain(Arr g) { return Scalar(kPlain, std::move(g)); }
// (d_t^m d^beta chi) * g
inline Scalar cut(int m, int bidx, Arr g) { return Scalar(key(m, bidx), std::move(g)); }
inline int beta(int bx, int by, int bz) { return CutoffGrid::beta_index(bx, by, bz); }
inline int unit(int axis) { return beta(axis == 0, axis == 1, axis == 2); }
inline int pair(int i, int j) {
    int b[3] = {0, 0, 0};
    ++b[i];
    ++b[j];
    return beta(b[0], b[1], b[2]);
}

inline Scalar d(const Ctx& c, const Scalar& s, int axis) {
    Scalar r;
    for (const auto& [k, g] : s.terms()) {
        if (k != kPlain) {
            const int b = k % 64;
            const int bx = b / 16, by = (b / 4) % 4, bz = b % 4;
            if (bx + by + bz >= 3) throw DomainError("loc: cutoff derivative order above 3");
            r.add(k + axis_step(axis), g);
        }
        r.add(k, c.d(g, axis));
    }
    return r;
}

inline VScalar curl(const Ctx& c, const VScalar& v) {
    VScalar r;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, e = (a + 2) % 3;
        r[a].add(d(c, v[e], b));
        r[a].add(d(c, v[b], e), -1.0);
    }
    return r;
}

inline Scalar div(const Ctx& c, const VScalar& v) {
    Scalar r;
    for (int a = 0; a < 3; ++a) r.add(d(c, v[a], a));
    return r;
}

inline VScalar grad(const Ctx& c, const Scalar& s) {
    return {d(c, s, 0), d(c, s, 1), d(c, s, 2)};
}

inline Arr eval(const Ctx& c, const Scalar& s) {
    Arr r = c.zeros();
    const std::size_t N = r.size();
    for (const auto& [k, g] : s.terms()) {
        if (k == kPlain) {
            for (std::size_t i = 0; i < N; ++i) r[i] += g[i];
            continue;
        }
        const double tf = c.cg->time(c.n, k / 64);
        const double* X = c.cg->space(k % 64);
        if (tf == 0 || !X) continue;
        for (std::size_t i = 0; i < N; ++i) r[i] += tf * X[i] * g[i];
    }
    return r;
}

inline Vec eval(const Ctx& c, const VScalar& v) {
    return {eval(c, v[0]), eval(c, v[1]), eval(c, v[2])};
}

// Grid-level helpers on one slice.
inline Arr mul(const Arr& a, const Arr& b) {
    Arr r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * b[i];
    return r;
}

inline Vec scale(const Arr& s, const Vec& v) { return {mul(s, v[0]), mul(s, v[1]), mul(s, v[2])}; }

inline Vec curl(const Ctx& c, const Vec& v) {
    Vec r{c.zeros(), c.zeros(), c.zeros()};
    const double* in[3] = {v[0].data(), v[1].data(), v[2].data()};
    double* out[3] = {r[0].data(), r[1].data(), r[2].data()};
    slice::curl(c.sp, in, out);
    return r;
}

inline Arr div(const Ctx& c, const Vec& v) {
    Arr r = c.zeros();
    const double* in[3] = {v[0].data(), v[1].data(), v[2].data()};
    slice::divergence(c.sp, in, r.data());
    return r;
}

inline VScalar plain(const Vec& v) { return {plain(v[0]), plain(v[1]), plain(v[2])}; }

inline VScalar lift_v(int m, int bidx, const Vec& v) {
    return {cut(m, bidx, v[0]), cut(m, bidx, v[1]), cut(m, bidx, v[2])};
}

// (d_i d^beta chi-vector) ^ v where the cutoff vector is grad(d_extra chi):
// component a = sum_{b,e} eps_{abe} d_b d_extra chi * v_e.
inline VScalar grad_cross(const Vec& v, int extra_axis = -1) {
    VScalar r;
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, e = (a + 2) % 3;
        const int kb = extra_axis < 0 ? unit(b) : pair(b, extra_axis);
        const int ke = extra_axis < 0 ? unit(e) : pair(e, extra_axis);
        r[a].add(key(0, kb), v[e]);
        r[a].add(key(0, ke), v[b], -1.0);
    }
    return r;
}

inline void add(VScalar& a, const VScalar& b, double s = 1.0) {
    for (int i = 0; i < 3; ++i) a[i].add(b[i], s);
}

}  // namespace mm::loc
