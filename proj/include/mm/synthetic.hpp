#pragma once

#include "mm/core.hpp"

namespace mm {

// Sum of a few random low Fourier modes per component with smooth random time
// modulation. Band-limited in space, so spectral calculus is exact on it.
// time_derivative returns the exact d/dt of the same field.
Field random_bandlimited(const Grid& g, int nc, unsigned seed, int kmax = 3, int nmodes = 6,
                         bool time_derivative = false);
// Leray projection of random_bandlimited; tagged divergence_free.
Field random_solenoidal(const Grid& g, unsigned seed, int kmax = 3, bool time_derivative = false);

}  // namespace mm
