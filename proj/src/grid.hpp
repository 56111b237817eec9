#pragma once

// Uniform periodic grids on [0,L1) x ... and real scalar fields with
// spectral (FFT) operations.  Spectral coefficients are normalized so
// that f(x) = sum_k c_k exp(i k.x); the zero mode is the mean.

#include <array>
#include <complex>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgfd {

inline constexpr double kTwoPi = 6.28318530717958647692528676656;

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct SolvabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Complex = std::complex<double>;

class PeriodicGrid {
  public:
    PeriodicGrid() = default;
    explicit PeriodicGrid(std::vector<int> shape, std::vector<double> lengths = {});

    int dims() const { return dims_; }
    int size(int axis) const { return shape_[axis]; }
    const std::array<int, 3>& shape() const { return shape_; }
    double length(int axis) const { return lengths_[axis]; }
    double spacing(int axis) const { return lengths_[axis] / shape_[axis]; }
    std::int64_t total() const { return total_; }
    double volume() const;
    double coord(int axis, int index) const { return index * spacing(axis); }

    // 2/3-rule cutoff: modes with any |k_int| > cutoff are dropped.
    int dealias_cutoff(int axis) const { return shape_[axis] / 3; }

    // Half-spectrum (r2c) layout: last axis stores n/2+1 complex modes.
    std::int64_t spectral_total() const;
    std::array<int, 3> spectral_shape() const;

    // Integer wavenumber of mode j on a full axis.
    int k_int(int axis, int j) const {
        int n = shape_[axis];
        return (j <= n / 2) ? j : j - n;
    }
    double k_scale(int axis) const { return kTwoPi / lengths_[axis]; }

    bool operator==(const PeriodicGrid& o) const;
    bool operator!=(const PeriodicGrid& o) const { return !(*this == o); }

  private:
    int dims_ = 0;
    std::array<int, 3> shape_{1, 1, 1};
    std::array<double, 3> lengths_{kTwoPi, kTwoPi, kTwoPi};
    std::int64_t total_ = 0;
};

class SpectralScalarField {
  public:
    SpectralScalarField() = default;
    explicit SpectralScalarField(const PeriodicGrid& grid, double fill = 0.0)
        : grid_(grid), values_(static_cast<std::size_t>(grid.total()), fill) {}
    SpectralScalarField(const PeriodicGrid& grid, std::vector<double> values);

    const PeriodicGrid& grid() const { return grid_; }
    std::int64_t size() const { return static_cast<std::int64_t>(values_.size()); }
    double& operator[](std::int64_t i) { return values_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return values_[static_cast<std::size_t>(i)]; }
    double* data() { return values_.data(); }
    const double* data() const { return values_.data(); }
    const std::vector<double>& values() const { return values_; }

    double mean() const;
    double max_abs() const;

    SpectralScalarField& operator+=(const SpectralScalarField& o);
    SpectralScalarField& operator-=(const SpectralScalarField& o);
    SpectralScalarField& operator*=(double s);
    // y += a*x, the workhorse of the time steppers.
    SpectralScalarField& axpy(double a, const SpectralScalarField& x);

  private:
    PeriodicGrid grid_;
    std::vector<double> values_;
};

SpectralScalarField operator+(SpectralScalarField a, const SpectralScalarField& b);
SpectralScalarField operator-(SpectralScalarField a, const SpectralScalarField& b);
SpectralScalarField operator*(double s, SpectralScalarField a);
// Pointwise product, no truncation; callers dealias at operation boundaries.
SpectralScalarField multiply(const SpectralScalarField& a, const SpectralScalarField& b);

// Evaluate fn at every node; for analytic test data and coordinates.
SpectralScalarField make_field(const PeriodicGrid& grid,
                               const std::function<double(const std::array<double, 3>&)>& fn);
SpectralScalarField coordinate_field(const PeriodicGrid& grid, int axis);

std::vector<Complex> transform_forward(const SpectralScalarField& f);
SpectralScalarField transform_backward(const PeriodicGrid& grid, const std::vector<Complex>& coeffs);

SpectralScalarField partial_derivative(const SpectralScalarField& f, int axis);
std::vector<SpectralScalarField> gradient(const SpectralScalarField& f);
SpectralScalarField laplacian(const SpectralScalarField& f);

// Solves (Laplacian - F) psi = mu.  F = 0 requires mean(mu) = 0 (to
// 1e-12 relative) and pins mean(psi) = 0.
SpectralScalarField invert_helmholtz(const SpectralScalarField& mu, double F);

SpectralScalarField dealias(const SpectralScalarField& f);
void dealias_in_place(SpectralScalarField& f);

// integral(a*b) over the box: mean of the pointwise product times volume.
double inner_l2(const SpectralScalarField& a, const SpectralScalarField& b);
double norm_l2(const SpectralScalarField& a);
double rms(const SpectralScalarField& a);

// Deterministic band-limited test field: iid unit normals on the nodes,
// truncated to |k_i| <= kmax with the mean removed, addressed by seed.
SpectralScalarField random_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax);

// Visits every half-spectrum mode: fn(flat index, integer wavenumbers).
void for_each_mode(const PeriodicGrid& grid,
                   const std::function<void(std::int64_t, const std::array<int, 3>&)>& fn);

}  // namespace sgfd
