#include "mm/decomposition.hpp"

#include <cmath>
#include <functional>
#include <optional>

#include "loc.hpp"

namespace mm {

using loc::Arr;
using loc::Vec;
using loc::VScalar;

namespace {

const cplx I(0.0, 1.0);

// phi_1(x) = int_0^1 e^{-x(1-v)} dv and phi_2(x) = int_0^1 e^{-x(1-v)} v dv.
double phi1(double x) {
    if (x < 1e-2) return 1 - x / 2 + x * x / 6 - x * x * x / 24 + x * x * x * x / 120;
    return -std::expm1(-x) / x;
}
double phi2(double x) {
    if (x < 1e-2) return 0.5 - x / 6 + x * x / 24 - x * x * x / 120 + x * x * x * x / 720;
    return (x + std::expm1(-x)) / (x * x);
}

void kvec(const Spectral& sp, int iz, int iy, int ix, double k[3]) {
    k[0] = sp.dk(ix);
    k[1] = sp.dk(iy);
    k[2] = sp.dk(iz);
}

double ksq(const Spectral& sp, int iz, int iy, int ix) {
    const double a = sp.k(ix), b = sp.k(iy), c = sp.k(iz);
    return a * a + b * b + c * c;
}

Arr slice_copy(const Field& f, int n, int c) {
    const double* p = f.slice(n, c);
    return Arr(p, p + f.grid().cells());
}

Vec vec_at(const Field& f, int n) {
    return {slice_copy(f, n, 0), slice_copy(f, n, 1), slice_copy(f, n, 2)};
}

void store(Field& f, int n, const Vec& v) {
    for (int c = 0; c < 3; ++c) std::copy(v[c].begin(), v[c].end(), f.slice(n, c));
}

// (b.grad) c on one slice, spectral derivatives of c.
Vec convect(const loc::Ctx& x, const Vec& b, const Vec& c) {
    Vec r{x.zeros(), x.zeros(), x.zeros()};
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 3; ++i) {
            const Arr dc = x.d(c[i], j);
            for (std::size_t p = 0; p < dc.size(); ++p) r[i][p] += b[j][p] * dc[p];
        }
    return r;
}

Vec lap(const loc::Ctx& x, const Vec& v) {
    Vec r{x.zeros(), x.zeros(), x.zeros()};
    for (int c = 0; c < 3; ++c) slice::laplacian(x.sp, v[c].data(), r[c].data());
    return r;
}

Vec grad_div(const loc::Ctx& x, const Vec& v) {
    const Arr d = loc::div(x, v);
    return {x.d(d, 0), x.d(d, 1), x.d(d, 2)};
}

// Laplacian of the cutoff as a key list: sum_i d_i^2 chi times g.
loc::Scalar lap_cut(const Arr& g, double s = 1.0) {
    loc::Scalar r;
    for (int i = 0; i < 3; ++i) r.add(loc::key(0, loc::pair(i, i)), g, s);
    return r;
}

// The four product-rule pieces of chi curl((b.grad) c) for a solenoidal b:
//   A = curl sum_j d_j(chi b_j c)      B = curl sum_j (d_j chi) b_j c
//   C = sum_j d_j(grad chi ^ b_j c)    D = sum_j (d_j grad chi) ^ b_j c
// so that chi curl((b.grad) c) = A - B - C + D.
enum class Piece { A, B, C, D };

VScalar convective_piece(const loc::Ctx& x, Piece p, const Vec& b, const Vec& c) {
    VScalar r;
    for (int j = 0; j < 3; ++j) {
        const Vec bc = loc::scale(b[j], c);
        switch (p) {
            case Piece::A: {
                const VScalar s = loc::lift_v(0, 0, bc);
                for (int i = 0; i < 3; ++i) r[i].add(loc::d(x, s[i], j));
                break;
            }
            case Piece::B:
                loc::add(r, loc::lift_v(0, loc::unit(j), bc));
                break;
            case Piece::C: {
                const VScalar s = loc::grad_cross(bc);
                for (int i = 0; i < 3; ++i) r[i].add(loc::d(x, s[i], j));
                break;
            }
            case Piece::D:
                loc::add(r, loc::grad_cross(bc, j));
                break;
        }
    }
    if (p == Piece::A || p == Piece::B) return loc::curl(x, r);
    return r;
}

// Everything a source builder may need on one slice.
struct Slice {
    Vec u, w, a, f;
};

struct Inputs {
    const Field* u = nullptr;
    const Field* w = nullptr;
    const Field* a = nullptr;
    const Field* f = nullptr;

    Slice at(int n) const {
        Slice s;
        if (u) s.u = vec_at(*u, n);
        if (w) s.w = vec_at(*w, n);
        if (a) s.a = vec_at(*a, n);
        if (f) s.f = vec_at(*f, n);
        return s;
    }
};

using Builder = std::function<VScalar(const loc::Ctx&, const Slice&)>;

struct TermDef {
    std::string label, group;
    double coef;
    Builder build;
};

enum class Outer { CurlDuhamel, GradDuhamel, Plain };

struct Chain {
    Outer kind;
    double diffusivity = 1.0;
    int source_components = 3;
    const Cutoff* source_cutoff;  // the cutoff inside the source expressions
    const Cutoff* inner;          // multiplies before Lap^{-1}; may be null
    const Cutoff* outer;          // multiplies after Lap^{-1}
};

bool inside_support(const Cutoff& c, double t) {
    return t > c.support().a && t < c.support().b;
}

// outer Lap^{-1}(inner * Op(source)), streamed slice by slice.
Field run_chain(const Grid& g, const Chain& ch, const Builder& build, const Inputs& in,
                MeanLog& log) {
    const Spectral& sp = spectral_of(g);
    const CutoffGrid src_cg(*ch.source_cutoff, g);
    const CutoffGrid out_cg(*ch.outer, g);
    std::optional<CutoffGrid> in_cg;
    if (ch.inner) in_cg.emplace(*ch.inner, g);
    std::optional<DuhamelStream> stream;
    if (ch.kind != Outer::Plain) stream.emplace(g, ch.source_components, ch.diffusivity);

    const std::size_t cells = g.cells();
    const int nsrc = ch.source_components;
    Field out(g, 3);
    std::vector<cplx> work(sp.modes());
    for (int n = 0; n < g.Nt; ++n) {
        const double t = g.t(n);
        const loc::Ctx x{sp, &src_cg, n};
        Vec src{Arr(cells, 0.0), Arr(cells, 0.0), Arr(cells, 0.0)};
        if (inside_support(*ch.source_cutoff, t)) {
            const VScalar e = build(x, in.at(n));
            for (int c = 0; c < nsrc; ++c) src[c] = loc::eval(x, e[c]);
        }
        Vec v{Arr(cells), Arr(cells), Arr(cells)};
        if (stream) {
            const double* ptr[3] = {src[0].data(), src[1].data(), src[2].data()};
            const auto& D = stream->push(ptr);
            for (int a = 0; a < 3; ++a) {
                const int b = (a + 1) % 3, e = (a + 2) % 3;
                sp.for_modes([&](std::size_t i, int iz, int iy, int ix) {
                    double k[3];
                    kvec(sp, iz, iy, ix, k);
                    work[i] = ch.kind == Outer::CurlDuhamel ? I * (k[b] * D[e][i] - k[e] * D[b][i])
                                                            : I * k[a] * D[0][i];
                });
                sp.inverse_destructive(work.data(), v[a].data());
            }
        } else {
            v = std::move(src);
        }
        const double to = out_cg.time(n, 0);
        if (to == 0) continue;
        const double* Xo = out_cg.space(0);
        if (in_cg) {
            const double ti = in_cg->time(n, 0);
            const double* Xi = in_cg->space(0);
            for (int c = 0; c < 3; ++c)
                for (std::size_t p = 0; p < cells; ++p) v[c][p] *= ti * Xi[p];
        }
        for (int c = 0; c < 3; ++c) {
            double* o = out.slice(n, c);
            log.record(slice::inverse_laplacian(sp, v[c].data(), o));
            for (std::size_t p = 0; p < cells; ++p) o[p] *= to * Xo[p];
        }
    }
    return out;
}

Expansion run_expansion(const Grid& g, const Chain& ch, const std::vector<TermDef>& defs,
                        const Builder& direct, const Inputs& in, double sign,
                        const ExpansionOptions& o) {
    Expansion ex;
    ex.terms.resize(defs.size());
    ex.value = Field(g, 3);
    const CylinderSamplingPlan plan =
        o.plan.r_min > 0 ? o.plan : CylinderSamplingPlan::default_for(g);
    if (o.norms) {
        o.exponents.validate();
        plan.validate(g);
    }
    MeanLog& log = ex.means;
    const int nt = int(defs.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < nt; ++i) {
        Field f = run_chain(g, ch, defs[i].build, in, log);
        TermReport& r = ex.terms[i];
        r.index = i + 1;
        r.label = defs[i].label;
        r.group = defs[i].group;
        r.coefficient = defs[i].coef;
        r.exponents = o.exponents;
        r.max_abs = max_abs(f);
        r.finite = all_finite(f);
        if (o.norms) {
            r.norm = morrey_norm(f, o.exponents, plan);
            r.finite = r.finite && std::isfinite(r.norm.norm);
        }
#pragma omp critical(mm_expansion_sum)
        axpy(sign * defs[i].coef, f, ex.value);
        if (o.keep_fields) r.field = std::move(f);
    }
    ex.direct = sign * run_chain(g, ch, direct, in, log);
    ex.residual = relative_residual(ex.value, ex.direct);
    return ex;
}

void require_solenoidal(const Field& v, const char* what) {
    require_components(v, 3, what);
    const double d = max_divergence(v);
    double scale = 0;
    for (int c = 0; c < 3; ++c)
        for (int ax = 0; ax < 3; ++ax) {
            Field comp = component(v, c);
            scale = std::max(scale, max_abs(partial(comp, ax)));
        }
    if (d > 1e-10 * std::max(scale, 1e-300) && d > 0)
        throw DivergenceError(std::string(what) + ": field is not divergence free (max |div| = " +
                              std::to_string(d) + ")");
}

void require_grid(const Field& a, const Field& b, const char* what) {
    if (!(a.grid() == b.grid())) throw ShapeError(std::string(what) + ": grids differ");
}

}  // namespace

// ---------------------------------------------------------------------------
// Duhamel

DuhamelStream::DuhamelStream(const Grid& g, int components, double diffusivity)
    : sp_(spectral_of(g)), nc_(components) {
    if (components < 1 || components > 3) throw ShapeError("DuhamelStream: 1 to 3 components");
    if (!(diffusivity > 0)) throw DomainError("DuhamelStream: diffusivity must be positive");
    const double tau = g.dt();
    E_.resize(sp_.modes());
    p1_.resize(sp_.modes());
    p2_.resize(sp_.modes());
    sp_.for_modes([&](std::size_t i, int iz, int iy, int ix) {
        const double x = diffusivity * ksq(sp_, iz, iy, ix) * tau;
        E_[i] = std::exp(-x);
        p2_[i] = tau * phi2(x);
        p1_[i] = tau * phi1(x) - p2_[i];
    });
    D_.assign(nc_, std::vector<cplx>(sp_.modes(), cplx(0.0)));
    S_ = D_;
    work_ = D_;
}

const std::vector<std::vector<cplx>>& DuhamelStream::push(const double* const* source) {
    for (int c = 0; c < nc_; ++c) sp_.forward(source[c], work_[c].data());
    if (n_ > 0) {
        for (int c = 0; c < nc_; ++c)
            for (std::size_t i = 0; i < D_[c].size(); ++i)
                D_[c][i] = E_[i] * D_[c][i] + p1_[i] * S_[c][i] + p2_[i] * work_[c][i];
    }
    std::swap(S_, work_);
    ++n_;
    return D_;
}

Field duhamel(const Field& source, double diffusivity) {
    const Grid& g = source.grid();
    const Spectral& sp = spectral_of(g);
    DuhamelStream s(g, source.components(), diffusivity);
    Field r(g, source.components());
    std::vector<cplx> work(sp.modes());
    for (int n = 0; n < g.Nt; ++n) {
        const double* ptr[3] = {source.slice(n, 0), nullptr, nullptr};
        for (int c = 1; c < source.components(); ++c) ptr[c] = source.slice(n, c);
        const auto& D = s.push(ptr);
        for (int c = 0; c < source.components(); ++c) {
            work = D[c];
            sp.inverse_destructive(work.data(), r.slice(n, c));
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Appendix identities

IdentityResidual verify_rot_identity(const Field& u, const BumpFamily& b, MeanLog* log) {
    require_components(u, 3, "verify_rot_identity");
    const Grid& g = u.grid();
    const Spectral& sp = spectral_of(g);
    const CutoffGrid psi(b.big, g), phi(b.small, g);
    const std::size_t cells = g.cells();
    IdentityResidual r;
    Arr tmp(cells), l(cells), r1(cells), r2(cells);
    for (int n = 0; n < g.Nt; ++n) {
        const double tp = psi.time(n, 0), tf = phi.time(n, 0);
        const double *Xp = psi.space(0), *Xf = phi.space(0);
        const loc::Ctx x{sp, &psi, n};
        const Vec U = vec_at(u, n);
        const Vec lapu = lap(x, U);
        const Vec rot = loc::eval(x, loc::curl(x, loc::lift_v(0, 0, loc::curl(x, U))));
        const Vec gd = grad_div(x, U);
        for (int c = 0; c < 3; ++c) {
            auto apply = [&](const Arr& in, Arr& out) {
                for (std::size_t p = 0; p < cells; ++p) tmp[p] = tf * Xf[p] * in[p];
                const double m = slice::inverse_laplacian(sp, tmp.data(), out.data());
                if (log) log->record(m);
                for (std::size_t p = 0; p < cells; ++p) out[p] *= tp * Xp[p];
            };
            apply(lapu[c], l);
            apply(rot[c], r1);
            apply(gd[c], r2);
            for (std::size_t p = 0; p < cells; ++p) {
                const double rhs = -r1[p] + r2[p];
                r.residual = std::max(r.residual, std::abs(l[p] - rhs));
                r.scale = std::max({r.scale, std::abs(l[p]), std::abs(rhs)});
            }
        }
    }
    return r;
}

IdentityResidual verify_convective_identity(const Field& b, const Field& c, const Cutoff& psi) {
    require_grid(b, c, "verify_convective_identity");
    require_solenoidal(b, "verify_convective_identity (b)");
    require_solenoidal(c, "verify_convective_identity (c)");
    const Grid& g = b.grid();
    const Spectral& sp = spectral_of(g);
    const CutoffGrid cg(psi, g);
    IdentityResidual r;
    for (int n = 0; n < g.Nt; ++n) {
        const loc::Ctx x{sp, &cg, n};
        const Vec B = vec_at(b, n), C = vec_at(c, n);
        const Vec lhs = loc::eval(x, loc::lift_v(0, 0, loc::curl(x, convect(x, B, C))));
        VScalar rhs = convective_piece(x, Piece::A, B, C);
        loc::add(rhs, convective_piece(x, Piece::B, B, C), -1.0);
        loc::add(rhs, convective_piece(x, Piece::C, B, C), -1.0);
        loc::add(rhs, convective_piece(x, Piece::D, B, C));
        const Vec rv = loc::eval(x, rhs);
        for (int k = 0; k < 3; ++k)
            for (std::size_t p = 0; p < lhs[k].size(); ++p) {
                r.residual = std::max(r.residual, std::abs(lhs[k][p] - rv[k][p]));
                r.scale = std::max({r.scale, std::abs(lhs[k][p]), std::abs(rv[k][p])});
            }
    }
    return r;
}

// ---------------------------------------------------------------------------
// U = U1 - U2 + U3 and W = W1 - W2 + W3

namespace {

struct Split {
    Field whole, first, second, third, target;
    double schur = 0;
};

// outer Lap^{-1} Lap(inner v) split by the Laplacian commutator identity.
Split laplacian_split(const Field& v, const Cutoff& outer, const Cutoff& inner, MeanLog& log) {
    const Grid& g = v.grid();
    const Spectral& sp = spectral_of(g);
    const CutoffGrid og(outer, g), ig(inner, g);
    const std::size_t cells = g.cells();
    Split s{Field(g, 3), Field(g, 3), Field(g, 3), Field(g, 3), Field(g, 3)};
    Arr tmp(cells), lapv(cells);
    for (int n = 0; n < g.Nt; ++n) {
        const double to = og.time(n, 0), ti = ig.time(n, 0);
        const double *Xo = og.space(0), *Xi = ig.space(0);
        const loc::Ctx x{sp, &ig, n};
        const Vec V = vec_at(v, n);
        VScalar third;
        for (int i = 0; i < 3; ++i) {
            const VScalar t = loc::lift_v(0, loc::unit(i), V);
            for (int c = 0; c < 3; ++c) third[c].add(loc::d(x, t[c], i), 2.0);
        }
        const Vec th = loc::eval(x, third);
        for (int c = 0; c < 3; ++c) {
            double* tg = s.target.slice(n, c);
            for (std::size_t p = 0; p < cells; ++p) tg[p] = ti * Xi[p] * V[c][p];
            auto finish = [&](const Arr& in, double* out) {
                log.record(slice::inverse_laplacian(sp, in.data(), out));
                for (std::size_t p = 0; p < cells; ++p) out[p] *= to * Xo[p];
            };
            slice::laplacian(sp, tg, tmp.data());
            finish(tmp, s.whole.slice(n, c));
            slice::laplacian(sp, V[c].data(), lapv.data());
            for (std::size_t p = 0; p < cells; ++p) tmp[p] = ti * Xi[p] * lapv[p];
            finish(tmp, s.first.slice(n, c));
            const Arr lc = loc::eval(x, lap_cut(V[c]));
            finish(lc, s.second.slice(n, c));
            finish(th[c], s.third.slice(n, c));
        }
    }
    const double nv = lp_norm(v, 2);
    s.schur = nv > 0 ? lp_norm(s.second, 2) / nv : 0.0;
    return s;
}

}  // namespace

UDecomposition decompose_U(const Field& u, const BumpFamily& b) {
    require_components(u, 3, "decompose_U");
    MeanLog log;
    Split s = laplacian_split(u, b.big, b.small, log);
    UDecomposition d;
    const Field rebuilt = s.first - s.second + s.third;
    d.reconstruction = relative_residual(rebuilt, s.whole);
    d.versus_target = relative_residual(rebuilt, s.target);
    d.mean_shift = max_abs(s.whole - s.target);
    d.schur_ratio = s.schur;
    d.U = std::move(s.whole);
    d.U1 = std::move(s.first);
    d.U2 = std::move(s.second);
    d.U3 = std::move(s.third);
    d.target = std::move(s.target);
    d.means = log;
    return d;
}

WDecomposition decompose_W(const Field& omega, const BumpFamily& b) {
    require_components(omega, 3, "decompose_W");
    const Grid& g = omega.grid();
    MeanLog log;
    Split s = laplacian_split(omega, b.big, b.small, log);
    WDecomposition d;
    const Field rebuilt = s.first - s.second + s.third;
    d.reconstruction = relative_residual(rebuilt, s.whole);
    d.versus_target = relative_residual(rebuilt, s.target);

    const Spectral& sp = spectral_of(g);
    const CutoffGrid vp(b.big, g), wp(b.small, g);
    const std::size_t cells = g.cells();
    d.W1a = Field(g, 3);
    d.W1b = Field(g, 3);
    d.W1c = Field(g, 3);
    for (int n = 0; n < g.Nt; ++n) {
        const double to = vp.time(n, 0), ti = wp.time(n, 0);
        const double *Xo = vp.space(0), *Xi = wp.space(0);
        const Vec w = vec_at(omega, n);
        const loc::Ctx xa{sp, &vp, n}, xb{sp, &wp, n};
        const Vec rot = loc::eval(xa, loc::curl(xa, loc::lift_v(0, 0, loc::curl(xa, w))));
        const Arr dw = loc::div(xb, w);
        const Vec gb = loc::eval(xb, loc::grad(xb, loc::cut(0, 0, dw)));
        VScalar cc;
        for (int l = 0; l < 3; ++l) cc[l] = loc::cut(0, loc::unit(l), dw);
        const Vec gc = loc::eval(xb, cc);
        Arr tmp(cells);
        for (int c = 0; c < 3; ++c) {
            auto finish = [&](const double* in, double* out) {
                log.record(slice::inverse_laplacian(sp, in, out));
                for (std::size_t p = 0; p < cells; ++p) out[p] *= to * Xo[p];
            };
            for (std::size_t p = 0; p < cells; ++p) tmp[p] = ti * Xi[p] * rot[c][p];
            finish(tmp.data(), d.W1a.slice(n, c));
            finish(gb[c].data(), d.W1b.slice(n, c));
            finish(gc[c].data(), d.W1c.slice(n, c));
        }
    }
    d.split = relative_residual(s.first, (-1.0) * d.W1a + d.W1b - d.W1c);
    d.W = std::move(s.whole);
    d.W1 = std::move(s.first);
    d.W2 = std::move(s.second);
    d.W3 = std::move(s.third);
    d.means = log;
    return d;
}

// ---------------------------------------------------------------------------
// Velocity side: R, its evolution, the sixteen terms

namespace {

// Terms (1)-(4) of R before the convective groups.
VScalar r_commutator(const loc::Ctx& x, const Slice& s) {
    const Vec cu = loc::curl(x, s.u);
    VScalar r = loc::lift_v(1, 0, cu);
    for (int c = 0; c < 3; ++c) r[c].add(lap_cut(cu[c]));
    return r;
}

VScalar r_flux(const loc::Ctx& x, const Slice& s) {
    const Vec cu = loc::curl(x, s.u);
    VScalar r;
    for (int j = 0; j < 3; ++j) {
        const VScalar t = loc::lift_v(0, loc::unit(j), cu);
        for (int c = 0; c < 3; ++c) r[c].add(loc::d(x, t[c], j));
    }
    return r;
}

VScalar r_omega(const loc::Ctx& x, const Slice& s) {
    Vec cc = loc::curl(x, loc::curl(x, s.w));
    for (auto& c : cc)
        for (double& v : c) v *= 0.5;
    return loc::lift_v(0, 0, cc);
}

VScalar r_forcing(const loc::Ctx& x, const Slice& s) {
    return loc::lift_v(0, 0, loc::curl(x, s.f));
}

VScalar chi_curl_convect(const loc::Ctx& x, const Vec& b, const Vec& c) {
    return loc::lift_v(0, 0, loc::curl(x, convect(x, b, c)));
}

struct RTerm {
    const char* label;
    const char* group;
    double coef;
    std::function<VScalar(const loc::Ctx&, const Slice&)> build;
};

std::vector<RTerm> r_terms() {
    using P = Piece;
    auto piece = [](P p, int bsel, int csel) {
        return [p, bsel, csel](const loc::Ctx& x, const Slice& s) {
            const Vec& b = bsel == 0 ? s.u : s.a;
            const Vec& c = csel == 0 ? s.u : s.a;
            return convective_piece(x, p, b, c);
        };
    };
    return {
        {"(d_t psi + Lap psi) curl u", "commutator", 1, r_commutator},
        {"sum_j d_j((d_j psi) curl u)", "commutator", -2, r_flux},
        {"(psi/2) curl curl omega", "omega", 1, r_omega},
        {"psi curl f", "forcing", 1, r_forcing},
        {"curl sum_j d_j(psi u_j u)", "u*u", -1, piece(P::A, 0, 0)},
        {"curl sum_j (d_j psi) u_j u", "u*u", 1, piece(P::B, 0, 0)},
        {"sum_j d_j(grad psi ^ u_j u)", "u*u", 1, piece(P::C, 0, 0)},
        {"sum_j (d_j grad psi) ^ u_j u", "u*u", -1, piece(P::D, 0, 0)},
        {"curl sum_j d_j(psi a_j u)", "a*u", 1, piece(P::A, 1, 0)},
        {"curl sum_j (d_j psi) a_j u", "a*u", -1, piece(P::B, 1, 0)},
        {"sum_j d_j(grad psi ^ a_j u)", "a*u", -1, piece(P::C, 1, 0)},
        {"sum_j (d_j grad psi) ^ a_j u", "a*u", 1, piece(P::D, 1, 0)},
        {"curl sum_j d_j(psi u_j a)", "u*a", 1, piece(P::A, 0, 1)},
        {"curl sum_j (d_j psi) u_j a", "u*a", -1, piece(P::B, 0, 1)},
        {"sum_j d_j(grad psi ^ u_j a)", "u*a", -1, piece(P::C, 0, 1)},
        {"sum_j (d_j grad psi) ^ u_j a", "u*a", 1, piece(P::D, 0, 1)},
    };
}

VScalar r_direct(const loc::Ctx& x, const Slice& s) {
    VScalar r = r_commutator(x, s);
    loc::add(r, r_flux(x, s), -2.0);
    loc::add(r, r_omega(x, s));
    loc::add(r, r_forcing(x, s));
    loc::add(r, chi_curl_convect(x, s.u, s.u), -1.0);
    loc::add(r, chi_curl_convect(x, s.a, s.u));
    loc::add(r, chi_curl_convect(x, s.u, s.a));
    return r;
}

void check_velocity_inputs(const Field& u, const Field& omega, const Field& a, const Field& f,
                           const char* what) {
    for (const Field* p : {&u, &omega, &a, &f}) {
        require_components(*p, 3, what);
        require_grid(u, *p, what);
    }
    require_solenoidal(u, what);
    require_solenoidal(a, what);
    require_solenoidal(f, what);
}

}  // namespace

Field RAssembly::total() const {
    return commutator + omega_curl + forcing + uu + au + ua;
}

RAssembly assemble_R(const Field& u, const Field& omega, const Field& a, const Field& f,
                     const Cutoff& psi) {
    check_velocity_inputs(u, omega, a, f, "assemble_R");
    const Grid& g = u.grid();
    const Spectral& sp = spectral_of(g);
    const CutoffGrid cg(psi, g);
    RAssembly R{Field(g, 3), Field(g, 3), Field(g, 3), Field(g, 3),
                Field(g, 3), Field(g, 3), Field(g, 3)};
    const auto terms = r_terms();
    const Inputs in{&u, &omega, &a, &f};
    for (int n = 0; n < g.Nt; ++n) {
        if (!inside_support(psi, g.t(n))) continue;
        const loc::Ctx x{sp, &cg, n};
        const Slice s = in.at(n);
        VScalar grp[6];
        for (const auto& t : terms) {
            const std::string gname = t.group;
            const int k = gname == "commutator" ? 0
                        : gname == "omega"      ? 1
                        : gname == "forcing"    ? 2
                        : gname == "u*u"        ? 3
                        : gname == "a*u"        ? 4
                                                : 5;
            loc::add(grp[k], t.build(x, s), t.coef);
        }
        Field* dst[6] = {&R.commutator, &R.omega_curl, &R.forcing, &R.uu, &R.au, &R.ua};
        for (int k = 0; k < 6; ++k) store(*dst[k], n, loc::eval(x, grp[k]));
        store(R.direct, n, loc::eval(x, r_direct(x, s)));
    }
    return R;
}

Field manufactured_forcing(const Field& u, const Field& dudt, const Field& omega,
                           const Field& a) {
    for (const Field* p : {&u, &dudt, &omega, &a}) {
        require_components(*p, 3, "manufactured_forcing");
        require_grid(u, *p, "manufactured_forcing");
    }
    const Grid& g = u.grid();
    const Spectral& sp = spectral_of(g);
    Field rhs(g, 3);
    for (int n = 0; n < g.Nt; ++n) {
        const loc::Ctx x{sp, nullptr, n};
        const Vec U = vec_at(u, n), Ut = vec_at(dudt, n), W = vec_at(omega, n), A = vec_at(a, n);
        const Vec lu = lap(x, U), cw = loc::curl(x, W);
        const Vec uu = convect(x, U, U), au = convect(x, A, U), ua = convect(x, U, A);
        Vec r = Ut;
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < r[c].size(); ++p)
                r[c][p] += -lu[c][p] + uu[c][p] - 0.5 * cw[c][p] - au[c][p] - ua[c][p];
        store(rhs, n, r);
    }
    return leray_project(rhs);
}

EvolutionResidual evolution_residual(const Field& u, const Field& omega, const Field& a,
                                     const Field& f, const Cutoff& psi) {
    check_velocity_inputs(u, omega, a, f, "evolution_residual");
    const Grid& g = u.grid();
    if (g.Nt < 3) throw ShapeError("evolution_residual: need at least 3 time slices");
    const Spectral& sp = spectral_of(g);
    const CutoffGrid cg(psi, g);
    const Inputs in{&u, &omega, &a, &f};
    auto ucal = [&](int n) {
        const loc::Ctx x{sp, &cg, n};
        return loc::lift_v(0, 0, loc::curl(x, vec_at(u, n)));
    };
    EvolutionResidual r;
    const double dt = g.dt();
    for (int n = 1; n + 1 < g.Nt; ++n) {
        const loc::Ctx xm{sp, &cg, n - 1}, x0{sp, &cg, n}, xp{sp, &cg, n + 1};
        const Vec um = loc::eval(xm, loc::curl(xm, ucal(n - 1)));
        const Vec up = loc::eval(xp, loc::curl(xp, ucal(n + 1)));
        const VScalar uc = loc::curl(x0, ucal(n));
        VScalar lapu;
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 3; ++i) lapu[c].add(loc::d(x0, loc::d(x0, uc[c], i), i));
        const Vec lv = loc::eval(x0, lapu);
        const Vec cr = loc::eval(x0, loc::curl(x0, r_direct(x0, in.at(n))));
        for (int c = 0; c < 3; ++c)
            for (std::size_t p = 0; p < lv[c].size(); ++p) {
                const double dtu = (up[c][p] - um[c][p]) / (2 * dt);
                r.residual = std::max(r.residual, std::abs(dtu - lv[c][p] - cr[c][p]));
                r.scale = std::max(r.scale, std::abs(dtu));
            }
    }
    return r;
}

Expansion expand_U1_terms(const Field& u, const Field& omega, const Field& a, const Field& f,
                          const BumpFamily& b, const ExpansionOptions& o) {
    check_velocity_inputs(u, omega, a, f, "expand_U1_terms");
    std::vector<TermDef> defs;
    for (const auto& t : r_terms()) defs.push_back({t.label, t.group, t.coef, t.build});
    const Chain ch{Outer::CurlDuhamel, 1.0, 3, &b.big, &b.small, &b.big};
    Expansion ex = run_expansion(u.grid(), ch, defs, r_direct, Inputs{&u, &omega, &a, &f},
                                 -1.0, o);
    ex.note =
        "U1 = -(signed sum of terms); term 6 enters with +1, matching the R definition";
    return ex;
}

// ---------------------------------------------------------------------------
// Microrotation side

void require_omega_window(const MorreyParams& mp) {
    mp.validate();
    if (!(mp.p > 10.0 / 3.0 && mp.p <= mp.q && mp.q <= 15.0 / 4.0))
        throw ExponentError("microrotation exponents must satisfy 10/3 < p <= q <= 15/4");
}

namespace {

void check_omega_inputs(const Field& u, const Field& omega, const char* what) {
    require_components(u, 3, what);
    require_components(omega, 3, what);
    require_grid(u, omega, what);
    require_solenoidal(u, what);
}

VScalar a_commutator(const loc::Ctx& x, const Slice& s) {
    const Vec cw = loc::curl(x, s.w);
    VScalar r = loc::lift_v(1, 0, cw);
    for (int c = 0; c < 3; ++c) r[c].add(lap_cut(cw[c]));
    return r;
}

VScalar a_flux(const loc::Ctx& x, const Slice& s) {
    const Vec cw = loc::curl(x, s.w);
    VScalar r;
    for (int j = 0; j < 3; ++j) {
        const VScalar t = loc::lift_v(0, loc::unit(j), cw);
        for (int c = 0; c < 3; ++c) r[c].add(loc::d(x, t[c], j));
    }
    return r;
}

VScalar a_damping(const loc::Ctx& x, const Slice& s) {
    return loc::lift_v(0, 0, loc::curl(x, s.w));
}

VScalar a_coupling(const loc::Ctx& x, const Slice& s) {
    return loc::lift_v(0, 0, loc::curl(x, loc::curl(x, s.u)));
}

VScalar a_direct(const loc::Ctx& x, const Slice& s) {
    VScalar r = a_commutator(x, s);
    loc::add(r, a_flux(x, s), -2.0);
    loc::add(r, a_damping(x, s), -1.0);
    loc::add(r, chi_curl_convect(x, s.u, s.w), -1.0);
    loc::add(r, a_coupling(x, s), 0.5);
    return r;
}

// Scalar sources of Wcal_b = varpi div omega, returned in component 0.
VScalar b_commutator(const loc::Ctx& x, const Slice& s) {
    const Arr dw = loc::div(x, s.w);
    VScalar r;
    r[0] = loc::cut(1, 0, dw);
    r[0].add(lap_cut(dw, 2.0));
    r[0].add(loc::key(0, 0), dw, -1.0);
    return r;
}

VScalar b_flux(const loc::Ctx& x, const Slice& s) {
    const Arr dw = loc::div(x, s.w);
    VScalar r;
    for (int j = 0; j < 3; ++j) r[0].add(loc::d(x, loc::cut(0, loc::unit(j), dw), j));
    return r;
}

// varpi d_i d_j g = d_i d_j(varpi g) - d_i((d_j varpi) g) - d_j((d_i varpi) g) + (d_i d_j varpi) g
// with g = u_j w_i, summed over i, j.
VScalar b_piece(const loc::Ctx& x, const Slice& s, int which) {
    VScalar r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const Arr gij = loc::mul(s.u[j], s.w[i]);
            switch (which) {
                case 0:
                    r[0].add(loc::d(x, loc::d(x, loc::cut(0, 0, gij), j), i));
                    break;
                case 1:
                    r[0].add(loc::d(x, loc::cut(0, loc::unit(j), gij), i));
                    break;
                case 2:
                    r[0].add(loc::d(x, loc::cut(0, loc::unit(i), gij), j));
                    break;
                default:
                    r[0].add(loc::key(0, loc::pair(i, j)), gij);
                    break;
            }
        }
    return r;
}

VScalar b_direct(const loc::Ctx& x, const Slice& s) {
    VScalar r = b_commutator(x, s);
    loc::add(r, b_flux(x, s), -4.0);
    r[0].add(loc::cut(0, 0, loc::div(x, convect(x, s.u, s.w))), -1.0);
    return r;
}

VScalar c_flux(const loc::Ctx& x, const Slice& s) {
    VScalar r;
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) r[l].add(loc::d(x, loc::cut(0, loc::unit(l), s.w[k]), k));
    return r;
}

VScalar c_curvature(const loc::Ctx&, const Slice& s) {
    VScalar r;
    for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) r[l].add(loc::key(0, loc::pair(k, l)), s.w[k]);
    return r;
}

VScalar c_direct(const loc::Ctx& x, const Slice& s) {
    const Arr dw = loc::div(x, s.w);
    VScalar r;
    for (int l = 0; l < 3; ++l) r[l] = loc::cut(0, loc::unit(l), dw);
    return r;
}

}  // namespace

Expansion expand_W1a_terms(const Field& u, const Field& omega, const BumpFamily& b,
                           const ExpansionOptions& o) {
    check_omega_inputs(u, omega, "expand_W1a_terms");
    if (o.norms) require_omega_window(o.exponents);
    auto piece = [](Piece p) {
        return [p](const loc::Ctx& x, const Slice& s) { return convective_piece(x, p, s.u, s.w); };
    };
    const std::vector<TermDef> defs = {
        {"(d_t varphi + Lap varphi) curl omega", "commutator", 1, a_commutator},
        {"sum_j d_j((d_j varphi) curl omega)", "commutator", -2, a_flux},
        {"varphi curl omega", "damping", -1, a_damping},
        {"curl sum_j d_j(varphi u_j omega)", "u*omega", -1, piece(Piece::A)},
        {"curl sum_j (d_j varphi) u_j omega", "u*omega", 1, piece(Piece::B)},
        {"sum_j d_j(grad varphi ^ u_j omega)", "u*omega", 1, piece(Piece::C)},
        {"sum_j (d_j grad varphi) ^ u_j omega", "u*omega", -1, piece(Piece::D)},
        {"varphi curl curl u", "coupling", 0.5, a_coupling},
    };
    const Chain ch{Outer::CurlDuhamel, 1.0, 3, &b.big, &b.small, &b.big};
    Expansion ex = run_expansion(u.grid(), ch, defs, a_direct, Inputs{&u, &omega, nullptr, nullptr},
                                 1.0, o);
    ex.note = "W1a = signed sum of terms; term 7 enters with -1";
    return ex;
}

Expansion expand_W1b_terms(const Field& u, const Field& omega, const BumpFamily& b,
                           const ExpansionOptions& o) {
    check_omega_inputs(u, omega, "expand_W1b_terms");
    if (o.norms) require_omega_window(o.exponents);
    auto piece = [](int w) {
        return [w](const loc::Ctx& x, const Slice& s) { return b_piece(x, s, w); };
    };
    const std::vector<TermDef> defs = {
        {"(d_t varpi + 2 Lap varpi - varpi) div omega", "commutator", 1, b_commutator},
        {"sum_j d_j((d_j varpi) div omega)", "commutator", -4, b_flux},
        {"sum_ij d_i d_j(varpi u_j w_i)", "u*omega", -1, piece(0)},
        {"sum_ij d_i((d_j varpi) u_j w_i)", "u*omega", 1, piece(1)},
        {"sum_ij d_j((d_i varpi) u_j w_i)", "u*omega", 1, piece(2)},
        {"sum_ij (d_i d_j varpi) u_j w_i", "u*omega", -1, piece(3)},
    };
    const Chain ch{Outer::GradDuhamel, 2.0, 1, &b.small, nullptr, &b.big};
    Expansion ex = run_expansion(u.grid(), ch, defs, b_direct, Inputs{&u, &omega, nullptr, nullptr},
                                 1.0, o);
    ex.note = "W1b = signed sum; the curvature subterm (d_i d_j varpi) u_j w_i enters the "
              "convective piece with +1";
    return ex;
}

Expansion expand_W1c_terms(const Field& omega, const BumpFamily& b, const ExpansionOptions& o) {
    require_components(omega, 3, "expand_W1c_terms");
    if (o.norms) require_omega_window(o.exponents);
    const std::vector<TermDef> defs = {
        {"sum_k d_k((grad varpi) w_k)", "flux", 1, c_flux},
        {"sum_k (d_k grad varpi) w_k", "curvature", -1, c_curvature},
    };
    const Chain ch{Outer::Plain, 1.0, 3, &b.small, nullptr, &b.big};
    Expansion ex = run_expansion(omega.grid(), ch, defs, c_direct,
                                 Inputs{nullptr, &omega, nullptr, nullptr}, 1.0, o);
    ex.note = "W1c = flux - curvature";
    return ex;
}

}  // namespace mm
