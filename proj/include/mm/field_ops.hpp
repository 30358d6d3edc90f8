#pragma once

#include <mutex>
#include <vector>

#include "mm/core.hpp"
#include "mm/spectral.hpp"

namespace mm {

// Record of zero modes removed before inverting the Laplacian.
class MeanLog {
public:
    MeanLog() = default;
    MeanLog(const MeanLog& o) : max_abs_(o.max_abs()), count_(o.count()) {}
    MeanLog& operator=(const MeanLog& o);

    void record(double m);
    double max_abs() const;
    long count() const;
    void merge(const MeanLog& o);

private:
    mutable std::mutex m_;
    double max_abs_ = 0;
    long count_ = 0;
};

const Spectral& spectral_of(const Grid& g);

Field curl(const Field& v);
Field divergence(const Field& v);
Field gradient(const Field& s);
Field laplacian(const Field& v);
Field partial(const Field& v, int axis);
// Zero-mean input required per slice unless project_mean is set, in which case
// the mean is subtracted and recorded in log (if given).
Field inverse_laplacian(const Field& s, bool project_mean = false, MeanLog* log = nullptr);
Field leray_project(const Field& v);

// Largest spectral divergence magnitude over all slices.
double max_divergence(const Field& v);
// Largest per-slice ratio |mean| / max|s|, used to enforce the zero-mean contract.
double mean_mode_ratio(const Field& s);

// Fourier representation of one time slice.
struct SpectralSnapshot {
    int N = 0;
    double L = 0;
    std::vector<std::vector<cplx>> comps;

    cplx mean(int c) const { return comps[c][0] / double(std::size_t(N) * N * N); }
};

SpectralSnapshot to_spectral(const Field& f, int n);
void from_spectral(const SpectralSnapshot& s, Field& f, int n);
// Multiplies mode k by exp(-diffusivity |k|^2 tau).
SpectralSnapshot heat_step(const SpectralSnapshot& v, double tau, double diffusivity = 1.0);

}  // namespace mm
