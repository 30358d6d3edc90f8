#include "mm/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mm {

void Grid::validate() const {
    std::ostringstream why;
    if (!(L > 0)) why << "L must be positive; ";
    if (Nx < 8 || Nx % 2 != 0) why << "Nx must be even and >= 8; ";
    if (!(T > 0)) why << "T must be positive; ";
    if (Nt < 2) why << "Nt must be >= 2; ";
    if (!why.str().empty()) throw DomainError("invalid grid: " + why.str());
}

Field::Field(const Grid& g, int components) : g_(g), nc_(components) {
    g.validate();
    if (components != 1 && components != 3)
        throw ShapeError("field must have 1 or 3 components");
    v_.assign(std::size_t(g.Nt) * components * g.cells(), 0.0);
}

Field sample(const Grid& g, int components, const PointFn& fn) {
    Field f(g, components);
    const int N = g.Nx;
#pragma omp parallel for schedule(static)
    for (int n = 0; n < g.Nt; ++n) {
        double x[3], out[3];
        const double t = g.t(n);
        for (int z = 0; z < N; ++z)
            for (int y = 0; y < N; ++y)
                for (int i = 0; i < N; ++i) {
                    x[0] = g.x(i);
                    x[1] = g.x(y);
                    x[2] = g.x(z);
                    fn(t, x, out);
                    for (int c = 0; c < components; ++c) f.at(n, c, z, y, i) = out[c];
                }
    }
    return f;
}

void require_same_shape(const Field& a, const Field& b, const char* what) {
    if (!(a.grid() == b.grid()) || a.components() != b.components())
        throw ShapeError(std::string("shape mismatch in ") + what);
}

void require_components(const Field& a, int nc, const char* what) {
    if (a.components() != nc)
        throw ShapeError(std::string(what) + ": expected " + std::to_string(nc) +
                         " components, got " + std::to_string(a.components()));
}

Field operator+(const Field& a, const Field& b) {
    require_same_shape(a, b, "operator+");
    Field r = a;
    r.divergence_free = false;
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] += b.data()[i];
    return r;
}

Field operator-(const Field& a, const Field& b) {
    require_same_shape(a, b, "operator-");
    Field r = a;
    r.divergence_free = false;
    for (std::size_t i = 0; i < r.data().size(); ++i) r.data()[i] -= b.data()[i];
    return r;
}

Field operator*(double s, const Field& a) {
    Field r = a;
    for (double& v : r.data()) v *= s;
    return r;
}

void axpy(double s, const Field& x, Field& y) {
    require_same_shape(x, y, "axpy");
    for (std::size_t i = 0; i < y.data().size(); ++i) y.data()[i] += s * x.data()[i];
}

double max_abs(const Field& f) {
    double m = 0;
    for (double v : f.data()) m = std::max(m, std::abs(v));
    return m;
}

double rms(const Field& f) {
    long double s = 0;
    for (double v : f.data()) s += (long double)v * v;
    return f.data().empty() ? 0.0 : std::sqrt(double(s / f.data().size()));
}

double relative_residual(const Field& f, const Field& g) {
    require_same_shape(f, g, "relative_residual");
    double num = 0, den = 0;
    for (std::size_t i = 0; i < f.data().size(); ++i) {
        num = std::max(num, std::abs(f.data()[i] - g.data()[i]));
        den = std::max({den, std::abs(f.data()[i]), std::abs(g.data()[i])});
    }
    return den == 0 ? 0.0 : num / den;
}

bool all_finite(const Field& f) {
    return std::all_of(f.data().begin(), f.data().end(),
                       [](double v) { return std::isfinite(v); });
}

Field magnitude(const Field& f) {
    const Grid& g = f.grid();
    Field m(g, 1);
    const std::size_t M = g.cells();
    for (int n = 0; n < g.Nt; ++n) {
        double* out = m.slice(n, 0);
        for (int c = 0; c < f.components(); ++c) {
            const double* in = f.slice(n, c);
            for (std::size_t i = 0; i < M; ++i) out[i] += in[i] * in[i];
        }
        for (std::size_t i = 0; i < M; ++i) out[i] = std::sqrt(out[i]);
    }
    return m;
}

Field multiply(const Field& scalar, const Field& f) {
    require_components(scalar, 1, "multiply");
    if (!(scalar.grid() == f.grid())) throw ShapeError("grid mismatch in multiply");
    Field r(f.grid(), f.components());
    const std::size_t M = f.grid().cells();
    for (int n = 0; n < f.grid().Nt; ++n)
        for (int c = 0; c < f.components(); ++c) {
            const double* s = scalar.slice(n, 0);
            const double* a = f.slice(n, c);
            double* o = r.slice(n, c);
            for (std::size_t i = 0; i < M; ++i) o[i] = s[i] * a[i];
        }
    return r;
}

Field component(const Field& f, int c) {
    Field r(f.grid(), 1);
    const std::size_t M = f.grid().cells();
    for (int n = 0; n < f.grid().Nt; ++n)
        std::copy(f.slice(n, c), f.slice(n, c) + M, r.slice(n, 0));
    return r;
}

void set_threads(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

int threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace mm
