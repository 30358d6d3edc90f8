#include "mm/morrey.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "mm/spectral.hpp"

namespace mm {

namespace {

// Signed minimal-image difference on a circle of circumference L.
double wrap(double d, double L) {
    if (!std::isfinite(L)) return d;
    d = std::fmod(d, L);
    if (d > 0.5 * L) d -= L;
    if (d < -0.5 * L) d += L;
    return d;
}

int wrap_index(int i, int N) { return ((i % N) + N) % N; }

// Minimal-image signed offset of index i on a ring of N.
int signed_offset(int i, int N) { return i <= N / 2 - 1 ? i : i - N; }

}  // namespace

double quasi_distance(const Event& a, const Event& b, double L) {
    double s = 0;
    for (int k = 0; k < 3; ++k) {
        const double d = wrap(a.x[k] - b.x[k], L);
        s += d * d;
    }
    return std::sqrt(std::abs(a.t - b.t)) + std::sqrt(s);
}

bool Cylinder::contains(double t, const double* x, double L) const {
    if (!(t > a && t < b)) return false;
    double s = 0;
    for (int k = 0; k < 3; ++k) {
        const double d = wrap(x[k] - x0[k], L);
        s += d * d;
    }
    return s < r * r;
}

bool Cylinder::strictly_inside(const Cylinder& o) const {
    double s = 0;
    for (int k = 0; k < 3; ++k) s += (x0[k] - o.x0[k]) * (x0[k] - o.x0[k]);
    return a > o.a && b < o.b && std::sqrt(s) + r < o.r;
}

Field restrict_to(const Field& f, const Cylinder& c) {
    const Grid& g = f.grid();
    Field r(g, f.components());
    const int N = g.Nx;
    for (int n = 0; n < g.Nt; ++n) {
        const double t = g.t(n);
        if (!(t > c.a && t < c.b)) continue;
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int i = 0; i < N; ++i) {
                    const double x[3] = {g.x(i), g.x(y), g.x(z)};
                    if (!c.contains(t, x, g.L)) continue;
                    for (int k = 0; k < f.components(); ++k) r.at(n, k, z, y, i) = f.at(n, k, z, y, i);
                }
    }
    return r;
}

void MorreyParams::validate() const {
    if (!(p > 1)) throw ExponentError("Morrey exponents need p > 1");
    if (!(p <= q)) throw ExponentError("Morrey exponents need p <= q");
    if (!std::isfinite(q)) throw ExponentError("Morrey exponents need q < infinity");
}

std::vector<double> CylinderSamplingPlan::radii() const {
    std::vector<double> r;
    if (!(r_min > 0)) return r;
    for (double v = r_min; v <= r_max * (1 + 1e-12); v *= 2) r.push_back(v);
    return r;
}

void CylinderSamplingPlan::validate(const Grid& g) const {
    std::ostringstream why;
    if (time_stride < 1 || space_stride < 1) why << "strides must be >= 1; ";
    if (r_min < 2 * g.h() * (1 - 1e-12)) why << "r_min below twice the grid spacing; ";
    if (r_max < r_min) why << "r_max below r_min; ";
    if (r_max >= g.L / 4) why << "cylinders of radius >= L/4 would wrap around the torus; ";
    // Every node must lie in some cylinder of the smallest radius class.
    const double gap_x = 0.5 * std::sqrt(3.0) * space_stride * g.h();
    const double gap_t = 0.5 * time_stride * g.dt();
    if (gap_x >= r_min) why << "space stride leaves nodes uncovered by radius r_min; ";
    if (gap_t >= r_min * r_min) why << "time stride leaves nodes uncovered by radius r_min; ";
    if (!why.str().empty()) throw PlanError("invalid cylinder plan: " + why.str());
}

std::size_t CylinderSamplingPlan::center_count(const Grid& g) const {
    const std::size_t nt = (g.Nt + time_stride - 1) / time_stride;
    const std::size_t nx = (g.Nx + space_stride - 1) / space_stride;
    return nt * nx * nx;
}

std::string CylinderSamplingPlan::summary(const Grid& g) const {
    std::ostringstream s;
    s << radii().size() << " radii in [" << r_min << ", " << r_max << "], time stride "
      << time_stride << ", space stride " << space_stride << ", " << center_count(g)
      << " centers, " << radii().size() * center_count(g) << " cylinders";
    return s.str();
}

CylinderSamplingPlan CylinderSamplingPlan::refined(const Grid& g) const {
    CylinderSamplingPlan p = *this;
    p.time_stride = std::max(1, time_stride / 2);
    p.space_stride = std::max(1, space_stride / 2);
    if (r_min / 2 >= 2 * g.h() * (1 - 1e-12)) p.r_min = r_min / 2;
    return p;
}

CylinderSamplingPlan CylinderSamplingPlan::default_for(const Grid& g) {
    CylinderSamplingPlan p;
    p.r_min = 2 * g.h();
    p.r_max = std::nextafter(g.L / 4, 0.0);
    p.space_stride = 2;
    p.time_stride = 1;
    while ((p.time_stride * 2) * g.dt() * 0.5 < p.r_min * p.r_min && p.time_stride < 8)
        p.time_stride *= 2;
    return p;
}

namespace {

// A node belongs to a cylinder iff it lies strictly inside: spatial offset
// below r and time offset below r^2.
int time_reach(double r, double dt) {
    int d = int(std::floor(r * r / dt));
    while (d > 0 && !(d * dt < r * r)) --d;
    return d;
}

}  // namespace

CylinderTable::CylinderTable(const Grid& g, const CylinderSamplingPlan& plan) : g_(g) {
    plan.validate(g);
    radii_ = plan.radii();
    for (int n = 0; n < g.Nt; n += plan.time_stride) centers_t_.push_back(n);
    for (int z = 0; z < g.Nx; z += plan.space_stride)
        for (int y = 0; y < g.Nx; y += plan.space_stride)
            for (int x = 0; x < g.Nx; x += plan.space_stride) centers_x_.push_back({x, y, z});
    S_.resize(radii_.size());
    measure_.resize(radii_.size());
}

ParabolicCylinder CylinderTable::cylinder(std::size_t j, std::size_t center) const {
    const std::size_t nx = centers_x_.size();
    const int n = centers_t_[center / nx];
    const auto& c = centers_x_[center % nx];
    ParabolicCylinder pc;
    pc.t0 = g_.t(n);
    pc.x0 = {g_.x(c[0]), g_.x(c[1]), g_.x(c[2])};
    pc.r = radii_[j];
    return pc;
}

void CylinderTable::integrate(const Field& density) {
    if (!(density.grid() == g_)) throw ShapeError("CylinderTable: grid mismatch");
    require_components(density, 1, "CylinderTable::integrate");
    const Spectral& sp = *Spectral::get(g_.Nx, g_.L);
    const int N = g_.Nx;
    const std::size_t M = g_.cells();
    const double h = g_.h(), dt = g_.dt();
    const std::size_t ncx = centers_x_.size();

    const std::size_t R = radii_.size();
    std::vector<std::vector<cplx>> what(R);
    std::vector<int> reach(R);
    for (std::size_t j = 0; j < R; ++j) {
        const double r = radii_[j];
        // Ball indicator on minimal-image offsets.
        std::vector<double> w(M);
        double wsum = 0;
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int x = 0; x < N; ++x) {
                    const double ox = signed_offset(x, N), oy = signed_offset(y, N), oz = signed_offset(z, N);
                    const double v = (ox * ox + oy * oy + oz * oz) * h * h < r * r ? 1.0 : 0.0;
                    w[(std::size_t(z) * N + y) * N + x] = v;
                    wsum += v;
                }
        reach[j] = time_reach(r, dt);
        measure_[j] = (2 * reach[j] + 1) * dt * wsum * h * h * h;
        what[j].resize(sp.modes());
        sp.forward(w.data(), what[j].data());
    }

    // Ball integrals per slice and radius, kept only at the strided centers.
    std::vector<double> B(R * g_.Nt * ncx);
    auto Bat = [&](std::size_t j, int n) { return B.data() + (j * g_.Nt + n) * ncx; };
#pragma omp parallel
    {
        std::vector<cplx> gh(sp.modes()), prod(sp.modes());
        std::vector<double> conv(M);
#pragma omp for schedule(static)
        for (int n = 0; n < g_.Nt; ++n) {
            sp.forward(density.slice(n, 0), gh.data());
            for (std::size_t j = 0; j < R; ++j) {
                for (std::size_t i = 0; i < gh.size(); ++i) prod[i] = gh[i] * what[j][i];
                sp.inverse_destructive(prod.data(), conv.data());
                double* out = Bat(j, n);
                for (std::size_t c = 0; c < ncx; ++c) {
                    const auto& p = centers_x_[c];
                    out[c] = conv[(std::size_t(p[2]) * N + p[1]) * N + p[0]];
                }
            }
        }
    }

    for (std::size_t j = 0; j < R; ++j) {
        const int D = reach[j];
        std::vector<double>& S = S_[j];
        S.assign(centers_t_.size() * ncx, 0.0);
        double smax = 0;
        for (std::size_t it = 0; it < centers_t_.size(); ++it) {
            const int n0 = centers_t_[it];
            double* out = S.data() + it * ncx;
            for (int m = std::max(0, n0 - D); m <= std::min(g_.Nt - 1, n0 + D); ++m) {
                const double* b = Bat(j, m);
                for (std::size_t c = 0; c < ncx; ++c) out[c] += b[c];
            }
            for (std::size_t c = 0; c < ncx; ++c) {
                out[c] *= dt * h * h * h;
                smax = std::max(smax, out[c]);
            }
        }
        // Transform round-off below this floor is indistinguishable from zero.
        const double floor = 1e-14 * smax;
        for (double& v : S)
            if (v < floor) v = 0;
    }
}

Field abs_pow(const Field& f, double p) {
    const Grid& g = f.grid();
    Field r(g, 1);
    const std::size_t M = g.cells();
    for (int n = 0; n < g.Nt; ++n) {
        double* o = r.slice(n, 0);
        if (f.components() == 1) {
            const double* a = f.slice(n, 0);
            if (p == 2)
                for (std::size_t i = 0; i < M; ++i) o[i] = a[i] * a[i];
            else
                for (std::size_t i = 0; i < M; ++i) o[i] = std::pow(std::abs(a[i]), p);
        } else {
            const double *a = f.slice(n, 0), *b = f.slice(n, 1), *c = f.slice(n, 2);
            for (std::size_t i = 0; i < M; ++i)
                o[i] = std::pow(a[i] * a[i] + b[i] * b[i] + c[i] * c[i], 0.5 * p);
        }
    }
    return r;
}

NormEstimate morrey_from_table(const CylinderTable& t, const MorreyParams& mp) {
    mp.validate();
    NormEstimate e;
    double best = -1;
    for (std::size_t j = 0; j < t.radius_count(); ++j) {
        const double scale = std::pow(t.radius(j), -5.0 * (1.0 - mp.p / mp.q));
        const auto& S = t.values(j);
        for (std::size_t c = 0; c < S.size(); ++c) {
            const double v = scale * S[c];
            if (v > best) {
                best = v;
                e.argmax = t.cylinder(j, c);
            }
        }
    }
    e.empty = !(best > 0);
    e.norm = e.empty ? 0.0 : std::pow(best, 1.0 / mp.p);
    return e;
}

NormEstimate morrey_norm(const Field& f, const MorreyParams& mp, const CylinderSamplingPlan& plan) {
    mp.validate();
    CylinderTable t(f.grid(), plan);
    t.integrate(abs_pow(f, mp.p));
    NormEstimate e = morrey_from_table(t, mp);
    e.plan_summary = plan.summary(f.grid());
    return e;
}

double lp_norm(const Field& f, double p) {
    const Grid& g = f.grid();
    Field a = abs_pow(f, p);
    long double s = 0;
    for (double v : a.data()) s += v;
    return std::pow(double(s) * g.cell_volume(), 1.0 / p);
}

namespace {

// Periodic trigonometric interpolation kernel for n unit-spaced samples, with
// the Nyquist mode split evenly when n is even.
double dirichlet(double d, int n) {
    d = std::remainder(d, double(n));
    if (std::abs(d) < 1e-13) return 1.0;
    const double a = std::numbers::pi * d;
    return n % 2 ? std::sin(a) / (n * std::sin(a / n)) : std::sin(a) / (n * std::tan(a / n));
}

bool power_of_two(double lambda, int& exponent) {
    const double l2 = std::log2(lambda);
    exponent = int(std::lround(l2));
    return lambda > 0 && std::abs(l2 - exponent) < 1e-12;
}

// Resample along one axis: element (o, k, i) sits at o*n*stride + k*stride + i.
// Sample k moves to centre + (k - centre)/up on the trigonometric interpolant.
// Lines with neighbouring i are processed together so reads stay contiguous.
void rescale_axis(std::vector<double>& data, std::size_t outer, int n, std::size_t stride,
                  int centre, int up) {
    if (up == 1) return;
    std::vector<double> W(std::size_t(n) * n);
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            W[std::size_t(k) * n + j] = dirichlet(centre + double(k - centre) / up - j, n);
    constexpr std::size_t block = 32;
    const std::size_t lines = outer * stride;
    const std::size_t nblocks = (lines + block - 1) / block;
#pragma omp parallel
    {
        std::vector<double> buf(block * n), res(block * n);
        std::size_t off[block];
#pragma omp for schedule(static)
        for (std::size_t b = 0; b < nblocks; ++b) {
            const std::size_t l0 = b * block, bw = std::min(block, lines - l0);
            for (std::size_t i = 0; i < bw; ++i) {
                const std::size_t l = l0 + i;
                off[i] = (l / stride) * n * stride + l % stride;
            }
            for (int k = 0; k < n; ++k)
                for (std::size_t i = 0; i < bw; ++i) buf[k * bw + i] = data[off[i] + k * stride];
            std::fill(res.begin(), res.end(), 0.0);
            for (int k = 0; k < n; ++k) {
                double* r = res.data() + k * bw;
                const double* w = W.data() + std::size_t(k) * n;
                for (int j = 0; j < n; ++j) {
                    const double wkj = w[j];
                    const double* in = buf.data() + j * bw;
                    for (std::size_t i = 0; i < bw; ++i) r[i] += wkj * in[i];
                }
            }
            for (int k = 0; k < n; ++k)
                for (std::size_t i = 0; i < bw; ++i) data[off[i] + k * stride] = res[k * bw + i];
        }
    }
}

}  // namespace

Field parabolic_rescale(const Field& f, double lambda, int ct, int cx) {
    int e = 0;
    if (!power_of_two(lambda, e)) throw DomainError("parabolic_rescale: lambda must be a power of two");
    const Grid& g = f.grid();
    const int N = g.Nx, Nt = g.Nt, nc = f.components();
    if (ct < 0 || ct >= Nt || cx < 0 || cx >= N) throw DomainError("parabolic_rescale: center off grid");
    if (e == 0) return f;
    Field r(g, nc);
    if (e > 0) {
        // f is read as a compactly supported function on the cell of side L
        // centred at x_c; sources outside that cell or outside [0, T] give zero.
        const int s = 1 << e;
        auto src = [&](int i) {
            const long o = long(s) * (i - cx);
            return (o < -N / 2 || o >= N / 2) ? -1 : wrap_index(int(cx + o), N);
        };
        for (int n = 0; n < Nt; ++n) {
            const long src_n = ct + long(s) * s * (n - ct);
            if (src_n < 0 || src_n >= Nt) continue;
            for (int z = 0; z < N; ++z) {
                const int sz = src(z);
                if (sz < 0) continue;
                for (int y = 0; y < N; ++y) {
                    const int sy = src(y);
                    if (sy < 0) continue;
                    for (int x = 0; x < N; ++x) {
                        const int sx = src(x);
                        if (sx < 0) continue;
                        for (int c = 0; c < nc; ++c) r.at(n, c, z, y, x) = f.at(int(src_n), c, sz, sy, sx);
                    }
                }
            }
        }
        return r;
    }
    const int up = 1 << (-e);
    std::vector<double>& d = r.data();
    d = f.data();
    const std::size_t M = g.cells();
    const std::size_t NN = std::size_t(N) * N;
    const std::size_t blocks = std::size_t(Nt) * nc;
    rescale_axis(d, 1, Nt, std::size_t(nc) * M, ct, up * up);
    rescale_axis(d, blocks * NN, N, 1, cx, up);
    rescale_axis(d, blocks * N, N, N, cx, up);
    rescale_axis(d, blocks, N, NN, cx, up);
    return r;
}

Field parabolic_rescale(const Field& f, double lambda) {
    return parabolic_rescale(f, lambda, (f.grid().Nt - 1) / 2, f.grid().Nx / 2);
}

namespace {

void require_close(double a, double b, const char* what) {
    if (std::abs(a - b) > 1e-12 * std::max(1.0, std::abs(b))) throw ExponentError(what);
}

// Pointwise f.g: scalar*scalar, scalar*vector or vector.vector.
Field product(const Field& f, const Field& g) {
    if (!(f.grid() == g.grid())) throw ShapeError("check_holder: grid mismatch");
    if (f.components() == 1) return multiply(f, g);
    if (g.components() == 1) return multiply(g, f);
    Field r(f.grid(), 1);
    const std::size_t M = f.grid().cells();
    for (int n = 0; n < f.grid().Nt; ++n)
        for (int c = 0; c < 3; ++c) {
            const double *a = f.slice(n, c), *b = g.slice(n, c);
            double* o = r.slice(n, 0);
            for (std::size_t i = 0; i < M; ++i) o[i] += a[i] * b[i];
        }
    return r;
}

}  // namespace

RatioReport check_holder(const Field& f, const Field& g, const MorreyParams& m1,
                         const MorreyParams& m2, const MorreyParams& m0,
                         const CylinderSamplingPlan& plan) {
    m0.validate();
    m1.validate();
    m2.validate();
    const double slack = 1.0 / m0.p - 1.0 / m1.p - 1.0 / m2.p;
    if (slack < -1e-12) throw ExponentError("Hoelder relation violated: need 1/p1 + 1/p2 <= 1/p0");
    require_close(1.0 / m1.q + 1.0 / m2.q, 1.0 / m0.q,
                  "Hoelder relation violated: need 1/q1 + 1/q2 = 1/q0");

    const Grid& gr = f.grid();
    CylinderTable tfg(gr, plan), tf(gr, plan), tg(gr, plan);
    tfg.integrate(abs_pow(product(f, g), m0.p));
    tf.integrate(abs_pow(f, m1.p));
    tg.integrate(abs_pow(g, m2.p));

    RatioReport rep;
    rep.bound = 1;
    double worst = 0;
    std::size_t count = 0;
    for (std::size_t j = 0; j < tf.radius_count(); ++j) {
        const double r = tf.radius(j);
        const double s0 = std::pow(r, -5.0 * (1.0 - m0.p / m0.q));
        const double s1 = std::pow(r, -5.0 * (1.0 - m1.p / m1.q));
        const double s2 = std::pow(r, -5.0 * (1.0 - m2.p / m2.q));
        const double factor = slack > 0 ? std::pow(tf.measure(j) / std::pow(r, 5.0), slack) : 1.0;
        rep.bound = std::max(rep.bound, factor);
        const auto &A = tfg.values(j), &F = tf.values(j), &G = tg.values(j);
        for (std::size_t c = 0; c < A.size(); ++c) {
            const double rhs = std::pow(s1 * F[c], 1.0 / m1.p) * std::pow(s2 * G[c], 1.0 / m2.p);
            const double lhs = std::pow(s0 * A[c], 1.0 / m0.p);
            ++count;
            if (rhs == 0) {
                if (lhs > 0) worst = std::numeric_limits<double>::infinity();
                continue;
            }
            worst = std::max(worst, lhs / (factor * rhs));
        }
    }
    rep.worst_cylinder = worst;
    rep.cylinders = count;
    const double nfg = morrey_from_table(tfg, m0).norm;
    const double nf = morrey_from_table(tf, m1).norm;
    const double ng = morrey_from_table(tg, m2).norm;
    rep.empty = nf * ng == 0;
    rep.ratio = rep.empty ? 0.0 : nfg / (nf * ng);
    rep.finite = std::isfinite(rep.ratio) && std::isfinite(worst);
    return rep;
}

RatioReport check_localization(const Field& f, const Cylinder& Q, const MorreyParams& m0,
                               const MorreyParams& m1, const CylinderSamplingPlan& plan) {
    m0.validate();
    m1.validate();
    if (!(m0.p <= m1.p)) throw ExponentError("localization needs p0 <= p1");
    if (!(m0.q <= m1.q)) throw ExponentError("localization needs q0 <= q1");
    Field g = restrict_to(f, Q);
    const NormEstimate n0 = morrey_norm(g, m0, plan);
    const NormEstimate n1 = morrey_norm(g, m1, plan);
    RatioReport rep;
    rep.empty = n1.empty;
    rep.ratio = rep.empty ? 0.0 : n0.norm / n1.norm;
    rep.finite = std::isfinite(rep.ratio);
    rep.note = rep.empty ? "empty" : "";
    return rep;
}

}  // namespace mm
