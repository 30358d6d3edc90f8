#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mm/core.hpp"
#include "mm/cutoffs.hpp"
#include "mm/exponents.hpp"
#include "mm/morrey.hpp"
#include "mm/solver.hpp"

namespace mm {

using json = nlohmann::json;

struct InitialData {
    std::string velocity = "taylor_green";  // taylor_green | random | zero
    double velocity_amplitude = 1.0;
    std::string microrotation = "zero";     // zero | smooth | random
    double microrotation_amplitude = 0.5;
};

struct PerturbationSpec {
    std::string kind = "default";  // default | zero
    double l6_norm = 0.5;
};

struct ForcingSpec {
    std::string kind = "zero";  // zero | cosine: amplitude cos(3t) (sin z, 0, sin y)
    double amplitude = 0.0;
};

struct CknSpec {
    std::optional<double> t0;                   // default T/2
    std::optional<std::array<double, 3>> x0;    // default box centre
    std::vector<double> radii{0.6, 0.5, 0.4, 0.3, 0.2};
    double eps_star = 0.1;
};

// Every pass/fail threshold of the acceptance report. Ratios bounded below
// (halving, evolution order, slope window) are thresholds, not tolerances,
// but share the positivity rule.
struct Tolerances {
    double identity = 1e-8;          // appendix identities, relative
    double reconstruction = 1e-8;    // U, W reconstruction and W1 split, relative
    double expansion = 1e-7;         // signed term sums against direct pipelines
    double morrey_lp = 1e-10;        // p = q against L^p quadrature
    double indicator = 0.02;         // indicator closed forms
    double scaling = 0.05;           // dilation laws
    double adams_hedberg = 0.10;     // spread of the ratio across scales
    double holder = 1e-9;            // cylinder-wise excess over the bound
    double divergence = 1e-10;       // max div u relative to rms u, every slice
    double decay = 1e-10;            // linear mode amplitudes, absolute
    double energy = 1e-6;            // energy growth per unit time
    double halving_ratio = 3.5;      // error ratio when the step is halved
    double duhamel = 1e-6;           // single-mode closed form, absolute
    double evolution_ratio = 3.5;    // residual ratio when dt is halved
    double ckn_slope_lo = 3.5;
    double ckn_slope_hi = 4.5;
};

struct ExperimentConfig {
    SolverConfig solver;
    InitialData initial;
    PerturbationSpec perturbation;
    ForcingSpec forcing;
    // {Q, Q0, Q1, Qa, Q2}: velocity cutoffs on Q > Q0 > Q1, microrotation on Q1 > Qa > Q2.
    std::array<Cylinder, 5> cylinders{};
    int cutoff_order = 4;
    Rational p0 = 3, q0 = 6;
    CylinderSamplingPlan plan{};           // r_min == 0 selects default_for(grid)
    MorreyParams omega_exponents{3.5, 3.75};
    CknSpec ckn;
    Tolerances tolerances;
    bool synthetic = true;                 // run the grid-independent oracle checks
    std::string out_dir = "out";
    unsigned seed = 17;
    int threads = 0;                       // 0 keeps the runtime default

    const Grid& grid() const { return solver.grid; }
    CylinderSamplingPlan effective_plan() const;
    // Throws ConfigError naming the offending field.
    void validate() const;
};

ExperimentConfig default_config();
// Fields absent from j keep their defaults; unknown keys throw ConfigError.
ExperimentConfig config_from_json(const json& j);
ExperimentConfig load_config(const std::string& path);
json to_json(const ExperimentConfig& c);

// Initial data, perturbation and forcing as the solver consumes them.
SolverState initial_state_of(const ExperimentConfig& c);
VectorSupplier perturbation_of(const ExperimentConfig& c);
VectorSupplier forcing_of(const ExperimentConfig& c);

}  // namespace mm
