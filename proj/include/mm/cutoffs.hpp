#pragma once

#include <array>
#include <vector>

#include "mm/core.hpp"
#include "mm/morrey.hpp"

namespace mm {

// Polynomial smoothstep of order n: 0 for s <= 0, 1 for s >= 1, C^n across both
// ends. Degree 2n+1.
class Smoothstep {
public:
    explicit Smoothstep(int order = 4);
    int order() const { return n_; }
    // k-th derivative at s.
    double operator()(double s, int k = 0) const;

private:
    int n_;
    std::vector<std::vector<double>> coef_;  // coef_[k]: monomial coefficients of S^{(k)}
};

// Smooth separable cutoff chi(t, x) = T(t) X(x): equal to 1 on the closed plateau
// cylinder and 0 outside the open support cylinder. The two cylinders must be
// concentric in space; X depends on |x - x0|^2 (torus-minimal offset).
class Cutoff {
public:
    Cutoff() = default;
    Cutoff(const Cylinder& plateau, const Cylinder& support, int order = 4);

    const Cylinder& plateau() const { return in_; }
    const Cylinder& support() const { return out_; }
    int order() const { return step_.order(); }

    // m-th time derivative of T, m <= order.
    double time_factor(double t, int m = 0) const;
    // Spatial derivative d^beta X with |beta| <= 3.
    double space_factor(const double* x, const std::array<int, 3>& beta, double L) const;
    double value(double t, const double* x, double L) const;
    Field field(const Grid& g) const;

private:
    Cylinder in_, out_;
    Smoothstep step_;
};

// Spatial derivatives of one cutoff sampled on a grid, for |beta| <= 3.
class CutoffGrid {
public:
    CutoffGrid(const Cutoff& c, const Grid& g);

    const Cutoff& cutoff() const { return *c_; }
    const Grid& grid() const { return g_; }
    static int beta_index(int bx, int by, int bz) { return (bx * 4 + by) * 4 + bz; }
    // Nullptr when the derivative vanishes identically on the grid.
    const double* space(int bidx) const {
        return tab_[bidx].empty() ? nullptr : tab_[bidx].data();
    }
    double time(int n, int m) const { return c_->time_factor(g_.t(n), m); }

private:
    const Cutoff* c_;
    Grid g_;
    std::array<std::vector<double>, 64> tab_;
};

// Nested cylinders outer > mid > inner with cutoffs
//   big:   1 on mid,   supported in outer   (psi on the velocity side)
//   small: 1 on inner, supported in mid     (phi on the velocity side)
// so that big * small = small and small * grad(big) = 0 exactly. The same shape
// serves the microrotation side with (varphi, varpi) on Q1 > Qa > Q2.
struct BumpFamily {
    Cylinder outer, mid, inner;
    Cutoff big, small;
};

// Throws NestingError unless each cylinder lies strictly inside the previous one
// (positive margins in time at both ends and in radius, concentric balls), and
// DomainError unless the outer cylinder starts after t = 0.
BumpFamily make_bumps(const Cylinder& outer, const Cylinder& mid, const Cylinder& inner,
                      int order = 4);

// Default nested cylinders {Q, Q0, Q1, Qa, Q2} centred in the box: radii
// L * {0.41, 0.35, 0.29, 0.23, 0.17}, time windows shrinking by 0.08 T per level
// from ]0.10 T, 0.98 T[.
std::array<Cylinder, 5> default_cylinders(const Grid& g);
BumpFamily velocity_bumps(const Grid& g, int order = 4);
BumpFamily microrotation_bumps(const Grid& g, int order = 4);

}  // namespace mm
