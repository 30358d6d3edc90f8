#pragma once

#include "mm/core.hpp"
#include "mm/field_ops.hpp"
#include "mm/synthetic.hpp"

namespace mmtest {

using mm::random_bandlimited;
using mm::random_solenoidal;

inline mm::Field random_zero_mean(const mm::Grid& g, int nc, unsigned seed, int kmax = 3) {
    mm::Field v = random_bandlimited(g, nc, seed, kmax);
    const auto& sp = mm::spectral_of(g);
    for (int n = 0; n < g.Nt; ++n)
        for (int c = 0; c < nc; ++c) {
            const double m = mm::slice::mean(sp, v.slice(n, c));
            for (std::size_t i = 0; i < g.cells(); ++i) v.slice(n, c)[i] -= m;
        }
    return v;
}

}  // namespace mmtest
