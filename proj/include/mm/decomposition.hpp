#pragma once

#include <string>
#include <vector>

#include "mm/core.hpp"
#include "mm/cutoffs.hpp"
#include "mm/field_ops.hpp"
#include "mm/morrey.hpp"

namespace mm {

// D(t) = int_0^t exp(kappa (t-s) Lap) S(s) ds with D(0) = 0, the source taken
// piecewise linear in s between slices and integrated exactly per Fourier mode.
Field duhamel(const Field& source, double diffusivity = 1.0);

// Streaming form of duhamel: push the source slices in time order.
class DuhamelStream {
public:
    DuhamelStream(const Grid& g, int components, double diffusivity = 1.0);
    // Consumes the source at the next slice and returns D there in Fourier space.
    const std::vector<std::vector<cplx>>& push(const double* const* source);
    const std::vector<std::vector<cplx>>& state() const { return D_; }
    int slices_consumed() const { return n_; }

private:
    const Spectral& sp_;
    int nc_;
    int n_ = 0;
    std::vector<double> E_, p1_, p2_;
    std::vector<std::vector<cplx>> D_, S_, work_;
};

struct IdentityResidual {
    double residual = 0;  // max |lhs - rhs|
    double scale = 0;     // max(|lhs|, |rhs|)
    double relative() const { return scale > 0 ? residual / scale : 0.0; }
};

// psi Lap^{-1}(phi Lap u) against -psi Lap^{-1}(phi curl[psi curl u]) + psi Lap^{-1}(phi grad div u),
// with big = psi, small = phi. Means are projected before each inversion.
IdentityResidual verify_rot_identity(const Field& u, const BumpFamily& b, MeanLog* log = nullptr);

// psi curl((b.grad) c) against its four-term rewriting. Throws DivergenceError
// unless div b and div c are both below 1e-10 relative to their gradients.
IdentityResidual verify_convective_identity(const Field& b, const Field& c, const Cutoff& psi);

struct UDecomposition {
    Field U, U1, U2, U3;
    Field target;           // phi u
    double reconstruction;  // relative |U1 - U2 + U3 - U|, U = psi Lap^{-1} Lap(phi u)
    double versus_target;   // relative |U1 - U2 + U3 - phi u|
    double mean_shift;      // max |psi <phi u>|, the torus offset between U and phi u
    double schur_ratio;     // max over slices of |psi Lap^{-1}((Lap phi) u)| / |u| (empirical)
    MeanLog means;
};
UDecomposition decompose_U(const Field& u, const BumpFamily& b);

// Groups of the localized vorticity source R in the evolution
// d_t Ucal = Lap Ucal + curl R, Ucal = curl[psi curl u].
struct RAssembly {
    Field commutator;  // (d_t psi + Lap psi) curl u - 2 sum_j d_j((d_j psi) curl u)
    Field omega_curl;  // (psi/2) curl curl omega
    Field forcing;     // psi curl f
    Field uu, au, ua;  // rewritten convective groups, each four terms
    Field direct;      // the same R with the convective parts as psi curl((b.grad) c)
    Field total() const;
};
RAssembly assemble_R(const Field& u, const Field& omega, const Field& a, const Field& f,
                     const Cutoff& psi);

// f = P[d_t u - Lap u + (u.grad)u - (1/2) curl omega - (a.grad)u - (u.grad)a], which
// makes (u, omega) solve the velocity equation with a gradient pressure.
Field manufactured_forcing(const Field& u, const Field& dudt, const Field& omega,
                           const Field& a);

struct EvolutionResidual {
    double residual = 0;  // max over interior slices of |d_t Ucal - Lap Ucal - curl R|
    double scale = 0;     // max |d_t Ucal|
    double relative() const { return scale > 0 ? residual / scale : 0.0; }
};
// Central differences in time on Ucal = curl[psi curl u]; second order in dt.
EvolutionResidual evolution_residual(const Field& u, const Field& omega, const Field& a,
                                     const Field& f, const Cutoff& psi);

struct TermReport {
    int index = 0;         // 1-based underbrace number, or position in the split
    std::string label;
    std::string group;
    double coefficient = 1;  // signed weight in the sum
    Field field;             // kept only on request
    MorreyParams exponents;
    NormEstimate norm;
    bool finite = true;
    double max_abs = 0;
};

struct ExpansionOptions {
    bool norms = true;
    bool keep_fields = false;
    MorreyParams exponents{2, 2};
    CylinderSamplingPlan plan{};  // r_min == 0 selects default_for(grid)
};

struct Expansion {
    std::vector<TermReport> terms;
    Field value;      // the quantity rebuilt from the signed sum of terms
    Field direct;     // the same quantity through the direct pipeline
    double residual;  // relative_residual(value, direct)
    MeanLog means;
    std::string note;
};

// U1 = -psi Lap^{-1}(phi Ucal) with Ucal = Duhamel(curl R); sixteen terms
// psi Lap^{-1}(phi curl Duhamel(R_i)).
Expansion expand_U1_terms(const Field& u, const Field& omega, const Field& a, const Field& f,
                          const BumpFamily& b, const ExpansionOptions& o = {});

struct WDecomposition {
    Field W, W1, W2, W3, W1a, W1b, W1c;
    double reconstruction;  // relative |W1 - W2 + W3 - W|, W = varphi Lap^{-1} Lap(varpi omega)
    double versus_target;   // relative |W1 - W2 + W3 - varpi omega|
    double split;           // relative |W1 - (-W1a + W1b - W1c)|
    MeanLog means;
};
// b.big = varphi, b.small = varpi.
WDecomposition decompose_W(const Field& omega, const BumpFamily& b);

// Exponent window of the first microrotation gain: 10/3 < p <= q <= 15/4.
void require_omega_window(const MorreyParams& mp);

// Eight terms varphi Lap^{-1}(varpi curl Duhamel(S_i)) of W1a with
// Wcal_a = varphi curl omega.
Expansion expand_W1a_terms(const Field& u, const Field& omega, const BumpFamily& b,
                           const ExpansionOptions& o = {});
// Terms varphi Lap^{-1} grad Duhamel_2(S_i) of W1b with Wcal_b = varpi div omega;
// the convective piece is split into its four product-rule subterms.
Expansion expand_W1b_terms(const Field& u, const Field& omega, const BumpFamily& b,
                           const ExpansionOptions& o = {});
// W1c = varphi Lap^{-1} sum_k d_k((grad varpi) w_k) - varphi Lap^{-1} sum_k (d_k grad varpi) w_k.
Expansion expand_W1c_terms(const Field& omega, const BumpFamily& b,
                           const ExpansionOptions& o = {});

}  // namespace mm
