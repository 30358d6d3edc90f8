#pragma once

#include <array>
#include <functional>
#include <vector>

#include "mm/core.hpp"
#include "mm/exponents.hpp"
#include "mm/morrey.hpp"

namespace mm {

// Quadrature weights of the parabolic Riesz kernel (|t|^{1/2} + |x|)^{-(5-a)}
// on a grid: the exact cell integral for offsets within two cells of the
// target in every index direction, and kernel-at-center times cell volume
// beyond that. Spatial offsets use the torus-minimal image; time is free.
class RieszKernel {
public:
    RieszKernel(const Grid& g, double a);

    double order() const { return a_; }
    const Grid& grid() const { return g_; }
    // Weight for index offsets (dn; dx, dy, dz), spatial offsets taken modulo Nx.
    double weight(int dn, int dx, int dy, int dz) const;
    // Kernel value at a physical offset (no quadrature).
    double kernel(double tau, double r) const;

    static constexpr int near = 2;

private:
    Grid g_;
    double a_;
    // near_[dn][i][j][k] with dn in [0, near] and 0 <= i <= j <= k <= near.
    std::array<double, (near + 1) * (near + 1) * (near + 1) * (near + 1)> near_{};
};

struct NodeIndex {
    int n = 0;
    int x = 0, y = 0, z = 0;
};

// I_a f at the listed target nodes by direct summation over the nonzero
// nodes of f. Result is [target][component].
std::vector<std::vector<double>> riesz_direct(const Field& f, double a,
                                              const std::vector<NodeIndex>& targets);

// I_a f on the whole grid: spatial transforms per slice and an exact discrete
// convolution in time per mode. Identical sums to riesz_direct.
Field riesz_apply(const Field& f, double a);

// nu = 1 - a q / 5 of the Adams-Hedberg inequality. Requires 0 < a < 5/q.
double adams_hedberg_nu(double p, double q, double a);

struct AdamsHedbergReport {
    double rho = 0;          // ||I_a f||_{M^{p/nu, q/nu}} / ||f||_{M^{p,q}}
    bool empty = false;      // f vanished on every sampled cylinder
    bool finite = true;
    double nu = 0;
    double norm_f = 0, norm_If = 0;
};

AdamsHedbergReport adams_hedberg_check(const Field& f, double p, double q, double a,
                                       const CylinderSamplingPlan& plan);

// A profile evaluated at an offset (tau, dx, dy, dz) from a fixed center.
using ProfileFn = std::function<double(double tau, const double* dx)>;

struct ScaleInvarianceReport {
    std::vector<double> lambdas;
    std::vector<double> rho;
    double spread = 0;  // max rho / min rho - 1
};

// rho of the family f_lambda(t, x) = profile(lambda^2 (t - t_c), lambda (x - x_c))
// sampled on g, each measured with the base plan scaled by 1/lambda (radii,
// space stride) and 1/lambda^2 (time stride) so the cylinder families match.
ScaleInvarianceReport adams_hedberg_scaling(const Grid& g, const ProfileFn& profile, double t_c,
                                            double x_c, double p, double q, double a,
                                            const CylinderSamplingPlan& base,
                                            const std::vector<double>& lambdas);

// Morrey exponents reached by I_1 and I_2: nu = 1 - (q-5)/(5q),
// targets (p/nu, q/nu) and sigma = min(p/nu, q). Requires 2 < p <= q, 5 < q.
struct RieszGainExponents {
    Rational nu, p_over_nu, q_over_nu, sigma;
};
RieszGainExponents corollary_I1_exponents(const Rational& p, const Rational& q);
RieszGainExponents corollary_I2_exponents(const Rational& p, const Rational& q);

}  // namespace mm
