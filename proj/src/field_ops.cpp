#include "mm/field_ops.hpp"

#include <algorithm>
#include <cmath>

namespace mm {

void MeanLog::record(double m) {
    std::lock_guard<std::mutex> lock(m_);
    max_abs_ = std::max(max_abs_, std::abs(m));
    ++count_;
}

double MeanLog::max_abs() const {
    std::lock_guard<std::mutex> lock(m_);
    return max_abs_;
}

long MeanLog::count() const {
    std::lock_guard<std::mutex> lock(m_);
    return count_;
}

MeanLog& MeanLog::operator=(const MeanLog& o) {
    if (this == &o) return *this;
    const double a = o.max_abs();
    const long c = o.count();
    std::lock_guard<std::mutex> lock(m_);
    max_abs_ = a;
    count_ = c;
    return *this;
}

void MeanLog::merge(const MeanLog& o) {
    const double a = o.max_abs();
    const long c = o.count();
    std::lock_guard<std::mutex> lock(m_);
    max_abs_ = std::max(max_abs_, a);
    count_ += c;
}

const Spectral& spectral_of(const Grid& g) { return *Spectral::get(g.Nx, g.L); }

namespace {

template <class Op>
void per_slice(int Nt, Op&& op) {
#pragma omp parallel for schedule(static)
    for (int n = 0; n < Nt; ++n) op(n);
}

}  // namespace

Field curl(const Field& v) {
    require_components(v, 3, "curl");
    const Spectral& sp = spectral_of(v.grid());
    Field r(v.grid(), 3);
    per_slice(v.grid().Nt, [&](int n) {
        const double* in[3] = {v.slice(n, 0), v.slice(n, 1), v.slice(n, 2)};
        double* out[3] = {r.slice(n, 0), r.slice(n, 1), r.slice(n, 2)};
        slice::curl(sp, in, out);
    });
    r.divergence_free = true;
    return r;
}

Field divergence(const Field& v) {
    require_components(v, 3, "divergence");
    const Spectral& sp = spectral_of(v.grid());
    Field r(v.grid(), 1);
    per_slice(v.grid().Nt, [&](int n) {
        const double* in[3] = {v.slice(n, 0), v.slice(n, 1), v.slice(n, 2)};
        slice::divergence(sp, in, r.slice(n, 0));
    });
    return r;
}

Field gradient(const Field& s) {
    require_components(s, 1, "gradient");
    const Spectral& sp = spectral_of(s.grid());
    Field r(s.grid(), 3);
    per_slice(s.grid().Nt, [&](int n) {
        double* out[3] = {r.slice(n, 0), r.slice(n, 1), r.slice(n, 2)};
        slice::gradient(sp, s.slice(n, 0), out);
    });
    return r;
}

Field laplacian(const Field& v) {
    const Spectral& sp = spectral_of(v.grid());
    Field r(v.grid(), v.components());
    per_slice(v.grid().Nt, [&](int n) {
        for (int c = 0; c < v.components(); ++c) slice::laplacian(sp, v.slice(n, c), r.slice(n, c));
    });
    r.divergence_free = v.divergence_free;
    return r;
}

Field partial(const Field& v, int axis) {
    const Spectral& sp = spectral_of(v.grid());
    Field r(v.grid(), v.components());
    per_slice(v.grid().Nt, [&](int n) {
        for (int c = 0; c < v.components(); ++c)
            slice::deriv(sp, v.slice(n, c), axis, r.slice(n, c));
    });
    return r;
}

double mean_mode_ratio(const Field& s) {
    const Spectral& sp = spectral_of(s.grid());
    const std::size_t M = s.grid().cells();
    double worst = 0;
    for (int n = 0; n < s.grid().Nt; ++n)
        for (int c = 0; c < s.components(); ++c) {
            const double* p = s.slice(n, c);
            double mx = 0;
            for (std::size_t i = 0; i < M; ++i) mx = std::max(mx, std::abs(p[i]));
            if (mx == 0) continue;
            worst = std::max(worst, std::abs(slice::mean(sp, p)) / mx);
        }
    return worst;
}

Field inverse_laplacian(const Field& s, bool project_mean, MeanLog* log) {
    constexpr double zero_mean_tol = 1e-12;
    if (!project_mean) {
        const double r = mean_mode_ratio(s);
        if (r > zero_mean_tol)
            throw MeanModeError("inverse_laplacian: input has nonzero spatial mean (relative " +
                                std::to_string(r) + ") and project_mean is not set");
    }
    const Spectral& sp = spectral_of(s.grid());
    Field r(s.grid(), s.components());
    per_slice(s.grid().Nt, [&](int n) {
        for (int c = 0; c < s.components(); ++c) {
            const double m = slice::inverse_laplacian(sp, s.slice(n, c), r.slice(n, c));
            if (log) log->record(m);
        }
    });
    return r;
}

Field leray_project(const Field& v) {
    require_components(v, 3, "leray_project");
    const Spectral& sp = spectral_of(v.grid());
    Field r(v.grid(), 3);
    per_slice(v.grid().Nt, [&](int n) {
        const double* in[3] = {v.slice(n, 0), v.slice(n, 1), v.slice(n, 2)};
        double* out[3] = {r.slice(n, 0), r.slice(n, 1), r.slice(n, 2)};
        slice::leray(sp, in, out);
    });
    r.divergence_free = true;
    return r;
}

double max_divergence(const Field& v) {
    return max_abs(divergence(v));
}

SpectralSnapshot to_spectral(const Field& f, int n) {
    const Spectral& sp = spectral_of(f.grid());
    SpectralSnapshot s;
    s.N = f.grid().Nx;
    s.L = f.grid().L;
    s.comps.resize(f.components());
    for (int c = 0; c < f.components(); ++c) {
        s.comps[c].resize(sp.modes());
        sp.forward(f.slice(n, c), s.comps[c].data());
    }
    return s;
}

void from_spectral(const SpectralSnapshot& s, Field& f, int n) {
    if (s.N != f.grid().Nx || int(s.comps.size()) != f.components())
        throw ShapeError("from_spectral: snapshot does not match field");
    const Spectral& sp = spectral_of(f.grid());
    for (int c = 0; c < f.components(); ++c) sp.inverse(s.comps[c].data(), f.slice(n, c));
}

SpectralSnapshot heat_step(const SpectralSnapshot& v, double tau, double diffusivity) {
    if (tau < 0) throw DomainError("heat_step: negative duration");
    const Spectral& sp = *Spectral::get(v.N, v.L);
    SpectralSnapshot r = v;
    for (auto& comp : r.comps)
        sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
            const double k2 = sp.k(ix) * sp.k(ix) + sp.k(iy) * sp.k(iy) + sp.k(iz) * sp.k(iz);
            comp[i] *= std::exp(-diffusivity * k2 * tau);
        });
    return r;
}

}  // namespace mm
