#include "mm/synthetic.hpp"

#include <cmath>
#include <random>

#include "mm/field_ops.hpp"

namespace mm {

Field random_bandlimited(const Grid& g, int nc, unsigned seed, int kmax, int nmodes,
                         bool time_derivative) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> kd(-kmax, kmax);
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    struct Mode {
        int k[3];
        double amp, phase, w, tphase;
    };
    std::vector<Mode> modes(std::size_t(nc) * nmodes);
    for (auto& m : modes) {
        for (int& k : m.k) k = kd(rng);
        m.amp = ud(rng);
        m.phase = 3.0 * ud(rng);
        m.w = 2.0 * ud(rng);
        m.tphase = 3.0 * ud(rng);
    }
    const double ks = 2.0 * std::numbers::pi / g.L;
    return sample(g, nc, [&](double t, const double* x, double* out) {
        for (int c = 0; c < nc; ++c) {
            double s = 0;
            for (int j = 0; j < nmodes; ++j) {
                const Mode& m = modes[std::size_t(c) * nmodes + j];
                const double arg = ks * (m.k[0] * x[0] + m.k[1] * x[1] + m.k[2] * x[2]) + m.phase;
                const double mod = time_derivative ? 0.5 * m.w * std::cos(m.w * t + m.tphase)
                                                   : 1.0 + 0.5 * std::sin(m.w * t + m.tphase);
                s += m.amp * std::cos(arg) * mod;
            }
            out[c] = s;
        }
    });
}

Field random_solenoidal(const Grid& g, unsigned seed, int kmax, bool time_derivative) {
    Field v = leray_project(random_bandlimited(g, 3, seed, kmax, 6, time_derivative));
    v.divergence_free = true;
    return v;
}

}  // namespace mm
