#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "mm/core.hpp"
#include "mm/morrey.hpp"

namespace mm {

// Independent switches for the terms of the velocity/microrotation system.
// Diffusion is always on.
struct Toggles {
    bool convection = true;    // (u.grad)u and (u.grad)omega
    bool coupling = true;      // (1/2) curl omega and (1/2) curl u
    bool grad_div = true;      // grad div omega
    bool damping = true;       // -omega
    bool perturbation = true;  // (a.grad)u + (u.grad)a
    bool forcing = true;       // f
};

struct SolverConfig {
    Grid grid;          // history grid; the solver steps substeps times per slice interval
    int substeps = 2;
    bool dealias = true;  // 2/3 rule on the explicit products
    double cfl = 1.0;     // dt * sum_i max|u_i| / h must stay at or below this
    Toggles toggles;

    double dt() const { return grid.dt() / substeps; }
    void validate() const;
};

// Fills the three components of a divergence-free vector field at time t on
// one Nx^3 slice. An empty supplier means the zero field.
using VectorSupplier = std::function<void(double t, double* const out[3])>;

VectorSupplier supplier_from(const Grid& g, const PointFn& fn);

struct Diagnostics {
    double t = 0;
    double energy_u = 0;    // int |u|^2
    double energy_w = 0;    // int |omega|^2
    double enstrophy = 0;   // int |curl u|^2
    double max_div_u = 0;
    double max_div_w = 0;
    double rms_u = 0;
    double cfl = 0;
};

struct SolverState {
    double t = 0;
    std::array<std::vector<double>, 3> u, w;
    std::vector<double> p;  // zero-mean pressure from the last right-hand side evaluation
};

// Builds a state from initial data; throws DivergenceError unless div u0 is
// below 1e-10 relative to its gradient.
SolverState initial_state(const Grid& g, const PointFn& u0, const PointFn& w0);

// One step of length cfg.dt(): integrating factor for the linear parts, Heun
// for the rest. Throws StepSizeError on a CFL violation and DivergenceError on
// non-finite values.
void step(SolverState& s, const SolverConfig& cfg, const VectorSupplier& a,
          const VectorSupplier& f);

// Advances by duration (a multiple of cfg.dt() up to rounding); zero returns s unchanged.
SolverState advance(SolverState s, const SolverConfig& cfg, double duration,
                    const VectorSupplier& a = {}, const VectorSupplier& f = {});

Diagnostics diagnose(const SolverState& s, const SolverConfig& cfg);

struct RunResult {
    Field u, w, p, a, f;  // histories on cfg.grid
    std::vector<Diagnostics> diagnostics;  // one row per history slice
};

RunResult run(const SolverConfig& cfg, const SolverState& initial, const VectorSupplier& a = {},
              const VectorSupplier& f = {});

void write_diagnostics_csv(const std::vector<Diagnostics>& d, const std::string& path);

// (sin x cos y cos z, -cos x sin y cos z, 0) scaled by amplitude, in units of 2 pi / L.
PointFn taylor_green(double L, double amplitude = 1.0);

// Frozen solenoidal mode (0, cos x sin y cos z, -cos x cos y sin z) scaled so that
// its L^6 norm over [0,T] x box equals target.
PointFn default_perturbation(const Grid& g, double target_l6);

// 1_Q omega in L^{10/3} against |omega|_{L^inf L^2(Q)}^{2/5} |grad omega|_{L^2 L^2(Q)}^{3/5}.
struct InterpolationReport {
    double lhs = 0;
    double sup_l2 = 0;
    double grad_l2 = 0;
    double rhs = 0;
    double ratio = 0;  // lhs / rhs; infinity when rhs = 0 < lhs
    bool finite = true;
};
InterpolationReport interpolation_check(const Field& w, const Cylinder& q);

}  // namespace mm
