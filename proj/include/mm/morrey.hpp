#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "mm/core.hpp"

namespace mm {

// A space-time point (t, x).
struct Event {
    double t = 0;
    std::array<double, 3> x{};
};

// |t-s|^{1/2} + |x-y|, with the spatial gap taken as the minimal image on a
// torus of side L (L = infinity means free space).
double quasi_distance(const Event& a, const Event& b,
                      double L = std::numeric_limits<double>::infinity());

// ]t0-r^2, t0+r^2[ x B(x0, r): the natural ball of the quasi-distance.
struct ParabolicCylinder {
    double t0 = 0;
    std::array<double, 3> x0{};
    double r = 1;
};

// ]a, b[ x B(x0, r): the cylinders used for localization.
struct Cylinder {
    double a = 0, b = 1;
    std::array<double, 3> x0{};
    double r = 1;

    static Cylinder from(const ParabolicCylinder& c) {
        return {c.t0 - c.r * c.r, c.t0 + c.r * c.r, c.x0, c.r};
    }
    // Node-center membership with torus-minimal spatial distance.
    bool contains(double t, const double* x, double L) const;
    // Strictly inside the other cylinder with positive margins in time and space.
    bool strictly_inside(const Cylinder& outer) const;
    bool operator==(const Cylinder&) const = default;
};

// Pointwise product with the indicator of c (grid nodes inside c are kept).
Field restrict_to(const Field& f, const Cylinder& c);

struct MorreyParams {
    double p = 2;
    double q = 2;
    void validate() const;  // 1 < p <= q < infinity
};

// Dyadic radii r_min 2^j <= r_max, centers at nodes whose time index is a
// multiple of time_stride and whose spatial indices are multiples of space_stride.
struct CylinderSamplingPlan {
    double r_min = 0;
    double r_max = 0;
    int time_stride = 1;
    int space_stride = 1;

    std::vector<double> radii() const;
    // Throws PlanError if a radius violates 2h <= r < L/4 or the strides leave
    // grid points uncovered by the smallest radius class.
    void validate(const Grid& g) const;
    std::size_t center_count(const Grid& g) const;
    std::string summary(const Grid& g) const;
    // Halved strides and an extra radius r_min/2 when admissible; a superset.
    CylinderSamplingPlan refined(const Grid& g) const;
    // A reasonable default for a grid: radii from 2h to below L/4, stride 2.
    static CylinderSamplingPlan default_for(const Grid& g);
};

// Integrals of a nonnegative density over every cylinder of a plan, on the
// identical family for every density so paired checks compare like with like.
class CylinderTable {
public:
    CylinderTable(const Grid& g, const CylinderSamplingPlan& plan);

    // Fills S[radius][center] = sum over nodes of weight * density * dt h^3.
    void integrate(const Field& density);
    // Cylinder measure per radius (integral of 1), independent of the center.
    double measure(std::size_t radius) const { return measure_[radius]; }

    std::size_t radius_count() const { return radii_.size(); }
    std::size_t center_count() const { return centers_t_.size() * centers_x_.size(); }
    double radius(std::size_t j) const { return radii_[j]; }
    const std::vector<double>& values(std::size_t j) const { return S_[j]; }
    ParabolicCylinder cylinder(std::size_t j, std::size_t center) const;

private:
    Grid g_;
    std::vector<double> radii_;
    std::vector<int> centers_t_;
    std::vector<std::array<int, 3>> centers_x_;
    std::vector<double> measure_;
    std::vector<std::vector<double>> S_;
};

// Per-node |f|^p (Euclidean magnitude for vector fields).
Field abs_pow(const Field& f, double p);

struct NormEstimate {
    double norm = 0;
    bool empty = true;  // f vanished on every sampled cylinder
    ParabolicCylinder argmax;
    std::string plan_summary;
};

// Lower estimate of the parabolic Morrey norm: max over plan cylinders of
// (r^{-5(1-p/q)} integral |f|^p)^{1/p}.
NormEstimate morrey_norm(const Field& f, const MorreyParams& mp, const CylinderSamplingPlan& plan);
// Same maximum taken from precomputed integrals of |f|^p.
NormEstimate morrey_from_table(const CylinderTable& t, const MorreyParams& mp);

// Direct space-time quadrature (sum |f|^p dt h^3)^{1/p}.
double lp_norm(const Field& f, double p);

// f_lambda(t, x) = f(tc + lambda^2 (t - tc), xc + lambda (x - xc)) about the node
// (center_t, center_x). lambda must be a power of two. lambda < 1 resamples by
// trigonometric interpolation (time treated as periodic with period Nt dt);
// lambda > 1 decimates exactly, reading f as zero outside [0, T] and outside
// the spatial cell of side L centred at center_x.
Field parabolic_rescale(const Field& f, double lambda, int center_t, int center_x);
Field parabolic_rescale(const Field& f, double lambda);

struct RatioReport {
    double ratio = 0;          // global ratio, see each check for its meaning
    bool empty = false;        // 0/0 sentinel
    double worst_cylinder = 0; // largest cylinder-wise LHS / RHS (Hoelder)
    double bound = 1;          // cylinder-wise bound that worst_cylinder must respect
    bool finite = true;
    std::size_t cylinders = 0;
    std::string note;
};

// Hoelder in Morrey spaces. Requires 1/p1 + 1/p2 <= 1/p0 and 1/q1 + 1/q2 = 1/q0.
// When 1/p1 + 1/p2 < 1/p0, the exact cylinder-wise bound carries the factor
// (|Q| / r^5)^{1/p0 - 1/p1 - 1/p2}; bound reports the largest such factor.
RatioReport check_holder(const Field& f, const Field& g, const MorreyParams& m1,
                         const MorreyParams& m2, const MorreyParams& m0,
                         const CylinderSamplingPlan& plan);

// ||1_Q f||_{M^{p0,q0}} / ||1_Q f||_{M^{p1,q1}}; requires p0 <= p1, p0 <= q0 <= q1.
RatioReport check_localization(const Field& f, const Cylinder& Q, const MorreyParams& m0,
                               const MorreyParams& m1, const CylinderSamplingPlan& plan);

}  // namespace mm
