#include "mm/spectral.hpp"

#include <fftw3.h>

#include <cstring>
#include <map>
#include <mutex>
#include <numbers>

namespace mm {

namespace {
std::mutex planner_mutex;
}

std::shared_ptr<const Spectral> Spectral::get(int N, double L) {
    static std::mutex m;
    static std::map<std::pair<int, double>, std::shared_ptr<const Spectral>> cache;
    std::lock_guard<std::mutex> lock(m);
    auto key = std::make_pair(N, L);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    auto sp = std::make_shared<const Spectral>(N, L);
    cache.emplace(key, sp);
    return sp;
}

Spectral::Spectral(int N, double L) : N_(N), L_(L), kscale_(2.0 * std::numbers::pi / L) {
    std::lock_guard<std::mutex> lock(planner_mutex);
    std::vector<double> r(real_size());
    std::vector<cplx> c(modes());
    auto* cp = reinterpret_cast<fftw_complex*>(c.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd_ = fftw_plan_dft_r2c_3d(N, N, N, r.data(), cp, flags);
    inv_ = fftw_plan_dft_c2r_3d(N, N, N, cp, r.data(), flags);
}

Spectral::~Spectral() {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

void Spectral::forward(const double* in, cplx* out) const {
    fftw_execute_dft_r2c(static_cast<fftw_plan>(fwd_), const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void Spectral::inverse(const cplx* in, double* out) const {
    std::vector<cplx> tmp(in, in + modes());
    inverse_destructive(tmp.data(), out);
}

void Spectral::inverse_destructive(cplx* in, double* out) const {
    fftw_execute_dft_c2r(static_cast<fftw_plan>(inv_), reinterpret_cast<fftw_complex*>(in), out);
    const double s = 1.0 / double(real_size());
    for (std::size_t i = 0; i < real_size(); ++i) out[i] *= s;
}

namespace slice {

namespace {
const cplx I(0.0, 1.0);

void kvec(const Spectral& sp, int iz, int iy, int ix, double k[3]) {
    k[0] = sp.dk(ix);
    k[1] = sp.dk(iy);
    k[2] = sp.dk(iz);
}

double ksq(const Spectral& sp, int iz, int iy, int ix) {
    const double a = sp.k(ix), b = sp.k(iy), c = sp.k(iz);
    return a * a + b * b + c * c;
}
}  // namespace

void deriv(const Spectral& sp, const double* in, int axis, double* out) {
    std::vector<cplx> h(sp.modes());
    sp.forward(in, h.data());
    sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
        double k[3];
        kvec(sp, iz, iy, ix, k);
        h[i] *= I * k[axis];
    });
    sp.inverse(h.data(), out);
}

void laplacian(const Spectral& sp, const double* in, double* out) {
    std::vector<cplx> h(sp.modes());
    sp.forward(in, h.data());
    sp.for_modes([&](std::size_t i, int iz, int iy, int ix) { h[i] *= -ksq(sp, iz, iy, ix); });
    sp.inverse(h.data(), out);
}

double mean(const Spectral& sp, const double* in) {
    long double s = 0;
    for (std::size_t i = 0; i < sp.real_size(); ++i) s += in[i];
    return double(s / sp.real_size());
}

double inverse_laplacian(const Spectral& sp, const double* in, double* out) {
    std::vector<cplx> h(sp.modes());
    sp.forward(in, h.data());
    const double m = h[0].real() / double(sp.real_size());
    sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
        const double k2 = ksq(sp, iz, iy, ix);
        h[i] = (i == 0) ? cplx(0.0) : h[i] / (-k2);
    });
    sp.inverse(h.data(), out);
    return m;
}

void gradient(const Spectral& sp, const double* in, double* const out[3]) {
    std::vector<cplx> h(sp.modes()), g(sp.modes());
    sp.forward(in, h.data());
    for (int a = 0; a < 3; ++a) {
        sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
            double k[3];
            kvec(sp, iz, iy, ix, k);
            g[i] = I * k[a] * h[i];
        });
        sp.inverse(g.data(), out[a]);
    }
}

void divergence(const Spectral& sp, const double* const in[3], double* out) {
    std::vector<cplx> h(sp.modes()), acc(sp.modes(), cplx(0.0));
    for (int a = 0; a < 3; ++a) {
        sp.forward(in[a], h.data());
        sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
            double k[3];
            kvec(sp, iz, iy, ix, k);
            acc[i] += I * k[a] * h[i];
        });
    }
    sp.inverse(acc.data(), out);
}

void curl(const Spectral& sp, const double* const in[3], double* const out[3]) {
    std::vector<cplx> h[3], o(sp.modes());
    for (int a = 0; a < 3; ++a) {
        h[a].resize(sp.modes());
        sp.forward(in[a], h[a].data());
    }
    for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3, c = (a + 2) % 3;
        sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
            double k[3];
            kvec(sp, iz, iy, ix, k);
            o[i] = I * (k[b] * h[c][i] - k[c] * h[b][i]);
        });
        sp.inverse(o.data(), out[a]);
    }
}

void leray(const Spectral& sp, const double* const in[3], double* const out[3]) {
    std::vector<cplx> h[3];
    for (int a = 0; a < 3; ++a) {
        h[a].resize(sp.modes());
        sp.forward(in[a], h[a].data());
    }
    sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
        double k[3];
        kvec(sp, iz, iy, ix, k);
        const double k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        if (k2 == 0) return;
        const cplx kd = (k[0] * h[0][i] + k[1] * h[1][i] + k[2] * h[2][i]) / k2;
        for (int a = 0; a < 3; ++a) h[a][i] -= k[a] * kd;
    });
    for (int a = 0; a < 3; ++a) sp.inverse(h[a].data(), out[a]);
}

}  // namespace slice
}  // namespace mm
