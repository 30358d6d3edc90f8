#pragma once

#include <cstddef>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace mm {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };
struct MeanModeError : Error { using Error::Error; };
struct ExponentError : Error { using Error::Error; };
struct NestingError : Error { using Error::Error; };
struct PlanError : Error { using Error::Error; };
struct StepSizeError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

// Periodic box [0,L)^3 sampled by Nx points per axis; time [0,T] sampled by
// Nt slices including both endpoints.
struct Grid {
    double L = 2.0 * std::numbers::pi;
    int Nx = 32;
    double T = 1.0;
    int Nt = 128;

    void validate() const;
    double h() const { return L / Nx; }
    double dt() const { return T / (Nt - 1); }
    double t(int n) const { return n * dt(); }
    double x(int i) const { return i * h(); }
    std::size_t cells() const { return std::size_t(Nx) * Nx * Nx; }
    double cell_volume() const { return dt() * h() * h() * h(); }
    bool operator==(const Grid& o) const = default;
};

// Space-time field, layout [t][component][z][y][x] with x fastest.
class Field {
public:
    Field() = default;
    Field(const Grid& g, int components);

    const Grid& grid() const { return g_; }
    int components() const { return nc_; }
    bool empty() const { return v_.empty(); }

    double* slice(int n, int c) { return v_.data() + offset(n, c); }
    const double* slice(int n, int c) const { return v_.data() + offset(n, c); }
    double& at(int n, int c, int z, int y, int x) {
        return v_[offset(n, c) + (std::size_t(z) * g_.Nx + y) * g_.Nx + x];
    }
    double at(int n, int c, int z, int y, int x) const {
        return v_[offset(n, c) + (std::size_t(z) * g_.Nx + y) * g_.Nx + x];
    }
    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

    // Set by producers that guarantee zero divergence; checked by consumers.
    bool divergence_free = false;

private:
    std::size_t offset(int n, int c) const {
        return (std::size_t(n) * nc_ + c) * g_.cells();
    }
    Grid g_;
    int nc_ = 0;
    std::vector<double> v_;
};

using PointFn = std::function<void(double t, const double* x, double* out)>;

Field sample(const Grid& g, int components, const PointFn& fn);

void require_same_shape(const Field& a, const Field& b, const char* what);
void require_components(const Field& a, int nc, const char* what);

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double s, const Field& a);
void axpy(double s, const Field& x, Field& y);

double max_abs(const Field& f);
double rms(const Field& f);
// max over all events of |f - g| divided by max(|f|,|g|); 0 when both vanish.
double relative_residual(const Field& f, const Field& g);
bool all_finite(const Field& f);
// Pointwise Euclidean magnitude over components.
Field magnitude(const Field& f);
// Pointwise multiplication by a scalar field (1 component).
Field multiply(const Field& scalar, const Field& f);
Field component(const Field& f, int c);

void set_threads(int n);
int threads();

}  // namespace mm
