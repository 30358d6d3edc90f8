#pragma once

#include <optional>
#include <vector>

#include "mm/core.hpp"
#include "mm/exponents.hpp"
#include "mm/morrey.hpp"

namespace mm {

struct ExponentState {
    Rational p, q, nu;
    int step = 0;
};

// p_{n+1} = min(p_n / nu, q) with nu = nu(q) fixed, until p reaches q.
// states[0] is the start; length() is the number of iterations.
struct BootstrapChain {
    std::vector<ExponentState> states;
    int length() const { return int(states.size()) - 1; }
};

// Exact rationals while the chain is short (at most 256 steps), f64 with 1e-12
// relative slack beyond. Requires 2 < p0 <= q0 and 5 < q0 <= 6; throws
// ExponentError naming the violated bound.
BootstrapChain bootstrap_chain(const Rational& p0, const Rational& q0);

struct GainMap {
    Rational nu;        // 1 - q1/5 (first-order potential) or 1 - 2 q1/5 (second order)
    Rational q_over_nu;
};

struct OmegaWindow {
    Rational q1;          // 1/q1 = 1/q0 + 3/10
    Rational lo, hi;      // the open-closed window (10/3, 15/4] for (p, q)
    GainMap first_order;  // I_1 map
    GainMap second_order; // I_2 map
};

// Requires 5 < q0 <= 6.
OmegaWindow omega_window(const Rational& q0);

// Regularity geometry: Q contains Q1 contains Q2, strictly.
struct HypothesisGeometry {
    Cylinder Q, Q1, Q2;
};

struct HypothesisReport {
    NormEstimate hypothesis;  // |1_Q u| in M^{p0,q0}
    double u_lq = 0;          // |1_Q1 u| in L^{q0}
    double w_lq = 0;          // |1_Q2 omega| in L^{q0}
    double w_window_lo = 0;   // |1_Q2 omega| in L^{p} at the window end points p = 10/3 and 15/4
    double w_window_hi = 0;
    bool finite = true;
};

// Throws NestingError unless Q2 is strictly inside Q1 and Q1 strictly inside Q.
HypothesisReport hypothesis_check(const Field& u, const Field& w, const HypothesisGeometry& geo,
                                  double p0, double q0, const CylinderSamplingPlan& plan);

struct EnergyPoint {
    double r = 0;
    double value = 0;  // (1/r) integral over the cylinder of |grad u|^2 + |grad omega|^2
    std::size_t nodes = 0;
};

struct EnergyMonitorSeries {
    std::vector<EnergyPoint> points;  // radii strictly decreasing
    double slope = 0;                 // least-squares log-log slope over the three smallest radii
    std::optional<double> crossing;   // largest r from which every value down the series is <= eps
};

// Cylinders ]t0 - r^2, t0 + r^2[ x B(x0, r). The integral is the node mean of the
// density times the exact cylinder measure (8 pi / 3) r^5, which removes the
// lattice noise of node counting at small radii. Throws DomainError if a cylinder
// leaves [0, T] in time or if r >= L/2.
EnergyMonitorSeries ckn_series(const Field& density, const Event& center, std::vector<double> radii,
                               std::optional<double> eps = std::nullopt);
// Gradients are spectral; density = |grad u|^2 + |grad omega|^2.
EnergyMonitorSeries ckn_monitor(const Field& u, const Field& w, const Event& center,
                                std::vector<double> radii, std::optional<double> eps = std::nullopt);

// Slope of log y against log x by least squares.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mm
