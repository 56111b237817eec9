#include "grid.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>

#include "philox.hpp"

namespace sgfd {

namespace {

// FFTW's planner is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftWorkspace {
    std::array<int, 3> shape{1, 1, 1};
    int dims = 0;
    std::int64_t total = 0;
    std::int64_t spectral_total = 0;
    double* real_buf = nullptr;
    fftw_complex* cplx_buf = nullptr;
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;

    FftWorkspace(int dims_, const std::array<int, 3>& shape_) : shape(shape_), dims(dims_) {
        total = 1;
        for (int a = 0; a < dims; ++a) total *= shape[a];
        std::array<int, 3> sshape = shape;
        sshape[dims - 1] = shape[dims - 1] / 2 + 1;
        spectral_total = 1;
        for (int a = 0; a < dims; ++a) spectral_total *= sshape[a];

        real_buf = fftw_alloc_real(static_cast<std::size_t>(total));
        cplx_buf = fftw_alloc_complex(static_cast<std::size_t>(spectral_total));
        std::lock_guard<std::mutex> lock(planner_mutex());
        forward = fftw_plan_dft_r2c(dims, shape.data(), real_buf, cplx_buf, FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r(dims, shape.data(), cplx_buf, real_buf, FFTW_ESTIMATE);
        if (!forward || !backward) throw NumericalError("fftw plan creation failed");
    }
    ~FftWorkspace() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (backward) fftw_destroy_plan(backward);
        fftw_free(real_buf);
        fftw_free(cplx_buf);
    }
    FftWorkspace(const FftWorkspace&) = delete;
    FftWorkspace& operator=(const FftWorkspace&) = delete;
};

FftWorkspace& workspace_for(const PeriodicGrid& g) {
    thread_local std::map<std::array<int, 3>, std::unique_ptr<FftWorkspace>> cache;
    std::array<int, 3> key = g.shape();
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, std::make_unique<FftWorkspace>(g.dims(), g.shape())).first;
    }
    return *it->second;
}

}  // namespace

PeriodicGrid::PeriodicGrid(std::vector<int> shape, std::vector<double> lengths) {
    if (shape.size() != 2 && shape.size() != 3)
        throw InvalidArgument("grid must be 2- or 3-dimensional, got rank " +
                              std::to_string(shape.size()));
    dims_ = static_cast<int>(shape.size());
    if (!lengths.empty() && lengths.size() != shape.size())
        throw InvalidArgument("lengths rank does not match shape rank");
    total_ = 1;
    for (int a = 0; a < dims_; ++a) {
        int n = shape[static_cast<std::size_t>(a)];
        if (n < 8 || n % 2 != 0)
            throw InvalidArgument("grid size per axis must be even and >= 8, got " +
                                  std::to_string(n));
        shape_[a] = n;
        total_ *= n;
        if (!lengths.empty()) {
            double L = lengths[static_cast<std::size_t>(a)];
            if (!(L > 0.0)) throw InvalidArgument("grid length must be positive");
            lengths_[a] = L;
        }
    }
}

double PeriodicGrid::volume() const {
    double v = 1.0;
    for (int a = 0; a < dims_; ++a) v *= lengths_[a];
    return v;
}

std::int64_t PeriodicGrid::spectral_total() const {
    auto s = spectral_shape();
    std::int64_t t = 1;
    for (int a = 0; a < dims_; ++a) t *= s[a];
    return t;
}

std::array<int, 3> PeriodicGrid::spectral_shape() const {
    std::array<int, 3> s = shape_;
    s[dims_ - 1] = shape_[dims_ - 1] / 2 + 1;
    return s;
}

bool PeriodicGrid::operator==(const PeriodicGrid& o) const {
    if (dims_ != o.dims_) return false;
    for (int a = 0; a < dims_; ++a)
        if (shape_[a] != o.shape_[a] || lengths_[a] != o.lengths_[a]) return false;
    return true;
}

SpectralScalarField::SpectralScalarField(const PeriodicGrid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
    if (static_cast<std::int64_t>(values_.size()) != grid.total())
        throw InvalidArgument("value count does not match grid");
}

double SpectralScalarField::mean() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s / static_cast<double>(values_.size());
}

double SpectralScalarField::max_abs() const {
    double m = 0.0;
    for (double v : values_) m = std::max(m, std::fabs(v));
    return m;
}

static void require_same_grid(const PeriodicGrid& a, const PeriodicGrid& b) {
    if (a != b) throw InvalidArgument("fields live on different grids");
}

SpectralScalarField& SpectralScalarField::operator+=(const SpectralScalarField& o) {
    require_same_grid(grid_, o.grid());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += o.values_[i];
    return *this;
}

SpectralScalarField& SpectralScalarField::operator-=(const SpectralScalarField& o) {
    require_same_grid(grid_, o.grid());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] -= o.values_[i];
    return *this;
}

SpectralScalarField& SpectralScalarField::operator*=(double s) {
    for (double& v : values_) v *= s;
    return *this;
}

SpectralScalarField& SpectralScalarField::axpy(double a, const SpectralScalarField& x) {
    require_same_grid(grid_, x.grid());
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
    return *this;
}

SpectralScalarField operator+(SpectralScalarField a, const SpectralScalarField& b) {
    a += b;
    return a;
}
SpectralScalarField operator-(SpectralScalarField a, const SpectralScalarField& b) {
    a -= b;
    return a;
}
SpectralScalarField operator*(double s, SpectralScalarField a) {
    a *= s;
    return a;
}

SpectralScalarField multiply(const SpectralScalarField& a, const SpectralScalarField& b) {
    require_same_grid(a.grid(), b.grid());
    SpectralScalarField out(a.grid());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (std::int64_t i = 0; i < a.size(); ++i) po[i] = pa[i] * pb[i];
    return out;
}

SpectralScalarField make_field(const PeriodicGrid& grid,
                               const std::function<double(const std::array<double, 3>&)>& fn) {
    SpectralScalarField f(grid);
    std::array<double, 3> x{0.0, 0.0, 0.0};
    std::int64_t idx = 0;
    const int d = grid.dims();
    const int n0 = grid.size(0), n1 = grid.size(1);
    const int n2 = d == 3 ? grid.size(2) : 1;
    for (int i0 = 0; i0 < n0; ++i0) {
        x[0] = grid.coord(0, i0);
        for (int i1 = 0; i1 < n1; ++i1) {
            x[1] = grid.coord(1, i1);
            if (d == 2) {
                f[idx++] = fn(x);
            } else {
                for (int i2 = 0; i2 < n2; ++i2) {
                    x[2] = grid.coord(2, i2);
                    f[idx++] = fn(x);
                }
            }
        }
    }
    return f;
}

SpectralScalarField coordinate_field(const PeriodicGrid& grid, int axis) {
    return make_field(grid, [axis](const std::array<double, 3>& x) { return x[axis]; });
}

std::vector<Complex> transform_forward(const SpectralScalarField& f) {
    const PeriodicGrid& g = f.grid();
    FftWorkspace& ws = workspace_for(g);
    std::memcpy(ws.real_buf, f.data(), sizeof(double) * static_cast<std::size_t>(g.total()));
    fftw_execute(ws.forward);
    std::vector<Complex> out(static_cast<std::size_t>(g.spectral_total()));
    const double scale = 1.0 / static_cast<double>(g.total());
    for (std::int64_t i = 0; i < g.spectral_total(); ++i) {
        out[static_cast<std::size_t>(i)] =
            Complex(ws.cplx_buf[i][0] * scale, ws.cplx_buf[i][1] * scale);
    }
    return out;
}

SpectralScalarField transform_backward(const PeriodicGrid& grid, const std::vector<Complex>& coeffs) {
    if (static_cast<std::int64_t>(coeffs.size()) != grid.spectral_total())
        throw InvalidArgument("coefficient count does not match grid");
    FftWorkspace& ws = workspace_for(grid);
    for (std::int64_t i = 0; i < grid.spectral_total(); ++i) {
        ws.cplx_buf[i][0] = coeffs[static_cast<std::size_t>(i)].real();
        ws.cplx_buf[i][1] = coeffs[static_cast<std::size_t>(i)].imag();
    }
    fftw_execute(ws.backward);
    SpectralScalarField out(grid);
    std::memcpy(out.data(), ws.real_buf, sizeof(double) * static_cast<std::size_t>(grid.total()));
    return out;
}

void for_each_mode(const PeriodicGrid& grid,
                   const std::function<void(std::int64_t, const std::array<int, 3>&)>& fn) {
    const int d = grid.dims();
    auto ss = grid.spectral_shape();
    std::array<int, 3> k{0, 0, 0};
    std::int64_t idx = 0;
    for (int j0 = 0; j0 < ss[0]; ++j0) {
        k[0] = grid.k_int(0, j0);
        for (int j1 = 0; j1 < ss[1]; ++j1) {
            if (d == 2) {
                k[1] = j1;  // half axis stores only k >= 0
                fn(idx++, k);
            } else {
                k[1] = grid.k_int(1, j1);
                for (int j2 = 0; j2 < ss[2]; ++j2) {
                    k[2] = j2;  // half axis stores only k >= 0
                    fn(idx++, k);
                }
            }
        }
    }
}

namespace {

// Derivative factor i*k, with the Nyquist mode's derivative pinned to
// zero so derivatives of real fields stay real.
SpectralScalarField spectral_map(
    const SpectralScalarField& f,
    const std::function<Complex(const std::array<int, 3>&, const PeriodicGrid&)>& factor) {
    const PeriodicGrid& g = f.grid();
    std::vector<Complex> c = transform_forward(f);
    for_each_mode(g, [&](std::int64_t idx, const std::array<int, 3>& k) {
        c[static_cast<std::size_t>(idx)] *= factor(k, g);
    });
    return transform_backward(g, c);
}

bool is_nyquist(const PeriodicGrid& g, int axis, int kint) {
    return kint == g.size(axis) / 2;
}

}  // namespace

SpectralScalarField partial_derivative(const SpectralScalarField& f, int axis) {
    if (axis < 0 || axis >= f.grid().dims()) throw InvalidArgument("derivative axis out of range");
    return spectral_map(f, [axis](const std::array<int, 3>& k, const PeriodicGrid& g) {
        if (is_nyquist(g, axis, std::abs(k[axis]))) return Complex(0.0, 0.0);
        return Complex(0.0, k[axis] * g.k_scale(axis));
    });
}

std::vector<SpectralScalarField> gradient(const SpectralScalarField& f) {
    std::vector<SpectralScalarField> out;
    out.reserve(static_cast<std::size_t>(f.grid().dims()));
    for (int a = 0; a < f.grid().dims(); ++a) out.push_back(partial_derivative(f, a));
    return out;
}

SpectralScalarField laplacian(const SpectralScalarField& f) {
    return spectral_map(f, [](const std::array<int, 3>& k, const PeriodicGrid& g) {
        double k2 = 0.0;
        for (int a = 0; a < g.dims(); ++a) {
            double kp = k[a] * g.k_scale(a);
            k2 += kp * kp;
        }
        return Complex(-k2, 0.0);
    });
}

SpectralScalarField invert_helmholtz(const SpectralScalarField& mu, double F) {
    if (F < 0.0) throw InvalidArgument("helmholtz parameter F must be >= 0");
    const PeriodicGrid& g = mu.grid();
    std::vector<Complex> c = transform_forward(mu);
    if (F == 0.0) {
        double mean = c[0].real();
        double scale = rms(mu);
        if (std::fabs(mean) > 1e-12 * std::max(scale, 1e-300)) {
            throw SolvabilityError(
                "helmholtz F=0 needs zero-mean source: |mean| = " + std::to_string(std::fabs(mean)) +
                " exceeds 1e-12 * rms = " + std::to_string(1e-12 * scale));
        }
        c[0] = Complex(0.0, 0.0);
    }
    for_each_mode(g, [&](std::int64_t idx, const std::array<int, 3>& k) {
        double k2 = 0.0;
        for (int a = 0; a < g.dims(); ++a) {
            double kp = k[a] * g.k_scale(a);
            k2 += kp * kp;
        }
        if (k2 == 0.0 && F == 0.0) return;  // mean already pinned
        c[static_cast<std::size_t>(idx)] /= -(k2 + F);
    });
    return transform_backward(g, c);
}

SpectralScalarField dealias(const SpectralScalarField& f) {
    SpectralScalarField out = f;
    dealias_in_place(out);
    return out;
}

void dealias_in_place(SpectralScalarField& f) {
    const PeriodicGrid& g = f.grid();
    std::vector<Complex> c = transform_forward(f);
    for_each_mode(g, [&](std::int64_t idx, const std::array<int, 3>& k) {
        for (int a = 0; a < g.dims(); ++a) {
            if (std::abs(k[a]) > g.dealias_cutoff(a)) {
                c[static_cast<std::size_t>(idx)] = Complex(0.0, 0.0);
                return;
            }
        }
    });
    f = transform_backward(g, c);
}

double inner_l2(const SpectralScalarField& a, const SpectralScalarField& b) {
    require_same_grid(a.grid(), b.grid());
    double s = 0.0;
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::int64_t i = 0; i < a.size(); ++i) s += pa[i] * pb[i];
    return s / static_cast<double>(a.size()) * a.grid().volume();
}

double norm_l2(const SpectralScalarField& a) { return std::sqrt(inner_l2(a, a)); }

double rms(const SpectralScalarField& a) {
    double s = 0.0;
    const double* pa = a.data();
    for (std::int64_t i = 0; i < a.size(); ++i) s += pa[i] * pa[i];
    return std::sqrt(s / static_cast<double>(a.size()));
}

SpectralScalarField random_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax) {
    if (kmax < 1) throw InvalidArgument("random_field needs kmax >= 1");
    SpectralScalarField f(grid);
    for (std::int64_t i = 0; i < grid.total(); ++i)
        f[i] = philox_normal(seed, static_cast<std::uint64_t>(i), 0);
    std::vector<Complex> c = transform_forward(f);
    for_each_mode(grid, [&](std::int64_t idx, const std::array<int, 3>& k) {
        bool keep = true;
        for (int a = 0; a < grid.dims(); ++a)
            if (std::abs(k[a]) > kmax) keep = false;
        bool zero_mode = true;
        for (int a = 0; a < grid.dims(); ++a)
            if (k[a] != 0) zero_mode = false;
        if (!keep || zero_mode) c[static_cast<std::size_t>(idx)] = Complex(0.0, 0.0);
    });
    return transform_backward(grid, c);
}

}  // namespace sgfd
