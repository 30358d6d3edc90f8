#pragma once

#include <complex>
#include <memory>
#include <vector>

#include "mm/core.hpp"

namespace mm {

using cplx = std::complex<double>;

// FFTW-backed transforms of one Nx^3 slice. Plans are shared and immutable;
// execution uses the new-array interface and is safe from several threads.
class Spectral {
public:
    static std::shared_ptr<const Spectral> get(int N, double L);
    Spectral(int N, double L);
    ~Spectral();
    Spectral(const Spectral&) = delete;
    Spectral& operator=(const Spectral&) = delete;

    int N() const { return N_; }
    double L() const { return L_; }
    std::size_t real_size() const { return std::size_t(N_) * N_ * N_; }
    std::size_t modes() const { return std::size_t(N_) * N_ * (N_ / 2 + 1); }

    void forward(const double* in, cplx* out) const;
    // Normalized inverse; input is left untouched.
    void inverse(const cplx* in, double* out) const;
    // Normalized inverse that may overwrite its input.
    void inverse_destructive(cplx* in, double* out) const;

    // Signed integer frequency of index i along a full axis.
    int freq(int i) const { return i <= N_ / 2 ? (i == N_ / 2 ? -N_ / 2 : i) : i - N_; }
    // Wavenumber used by first derivatives (Nyquist mode dropped).
    double dk(int i) const { return (i == N_ / 2) ? 0.0 : kscale_ * freq(i); }
    // Wavenumber used by Laplacian-type operators.
    double k(int i) const { return kscale_ * freq(i); }
    double kscale() const { return kscale_; }

    // Visit every stored mode: f(index, iz, iy, ix).
    template <class F>
    void for_modes(F&& f) const {
        const int H = N_ / 2 + 1;
        std::size_t idx = 0;
        for (int iz = 0; iz < N_; ++iz)
            for (int iy = 0; iy < N_; ++iy)
                for (int ix = 0; ix < H; ++ix, ++idx) f(idx, iz, iy, ix);
    }

private:
    int N_;
    double L_;
    double kscale_;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
};

// Slice-level spectral calculus. All inputs/outputs are Nx^3 real arrays.
namespace slice {
void deriv(const Spectral& sp, const double* in, int axis, double* out);
void laplacian(const Spectral& sp, const double* in, double* out);
// Returns the spatial mean that was removed before inversion.
double inverse_laplacian(const Spectral& sp, const double* in, double* out);
void gradient(const Spectral& sp, const double* in, double* const out[3]);
void divergence(const Spectral& sp, const double* const in[3], double* out);
void curl(const Spectral& sp, const double* const in[3], double* const out[3]);
void leray(const Spectral& sp, const double* const in[3], double* const out[3]);
double mean(const Spectral& sp, const double* in);
}  // namespace slice

}  // namespace mm
