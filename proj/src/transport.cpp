#include "transport.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "philox.hpp"

namespace sgfd {

namespace {

constexpr int kMaxInterpBand = 170;

std::int64_t resolve_steps(const WienerPath& path, double T) {
    if (path.dt <= 0.0) {
        throw InvalidArgument("transport needs a path with dt > 0");
    }
    std::int64_t n = static_cast<std::int64_t>(std::llround(T / path.dt));
    if (n < 0 || std::abs(static_cast<double>(n) * path.dt - T) > 1e-9 * std::max(T, path.dt)) {
        throw InvalidArgument("horizon T must be a whole number of path increments");
    }
    if (n > path.N) {
        throw InvalidArgument("horizon T exceeds the sampled path");
    }
    return n;
}

double field_scale(const VectorFieldOnGrid& u) {
    double s = 0.0;
    for (int c = 0; c < u.dims(); ++c) {
        s += norm_l2(u[c]);
    }
    return s;
}

}  // namespace

TrigInterpolant::TrigInterpolant(const SpectralScalarField& f, double rel_threshold) {
    const PeriodicGrid& grid = f.grid();
    dims_ = grid.dims();
    for (int a = 0; a < dims_; ++a) {
        k_scale_[static_cast<std::size_t>(a)] = grid.k_scale(a);
    }
    auto coeffs = transform_forward(f);
    double peak = 0.0;
    for (const auto& c : coeffs) {
        peak = std::max(peak, std::abs(c));
    }
    double floor = rel_threshold * peak;
    const int last = dims_ - 1;
    const int n_last = grid.size(last);
    for_each_mode(grid, [&](std::int64_t idx, const std::array<int, 3>& k) {
        Complex c = coeffs[static_cast<std::size_t>(idx)];
        if (std::abs(c) <= floor) {
            return;
        }
        // half-spectrum storage: modes off the k_last = 0 and Nyquist
        // planes stand in for their conjugate as well
        if (k[static_cast<std::size_t>(last)] > 0 &&
            k[static_cast<std::size_t>(last)] < n_last / 2) {
            c *= 2.0;
        }
        modes_.push_back({k, c});
        for (int a = 0; a < dims_; ++a) {
            int b = std::abs(k[static_cast<std::size_t>(a)]);
            if (b > kMaxInterpBand) {
                throw InvalidArgument("field band too wide for trigonometric interpolation");
            }
            band_[static_cast<std::size_t>(a)] = std::max(band_[static_cast<std::size_t>(a)], b);
        }
    });
}

double TrigInterpolant::operator()(const std::array<double, 3>& x) const {
    std::array<std::array<Complex, 2 * kMaxInterpBand + 1>, 3> table;
    for (int a = 0; a < dims_; ++a) {
        const int b = band_[static_cast<std::size_t>(a)];
        auto& tab = table[static_cast<std::size_t>(a)];
        const double phase = k_scale_[static_cast<std::size_t>(a)] * x[static_cast<std::size_t>(a)];
        const Complex step(std::cos(phase), std::sin(phase));
        tab[static_cast<std::size_t>(kMaxInterpBand)] = Complex(1.0, 0.0);
        for (int m = 1; m <= b; ++m) {
            tab[static_cast<std::size_t>(kMaxInterpBand + m)] =
                tab[static_cast<std::size_t>(kMaxInterpBand + m - 1)] * step;
            tab[static_cast<std::size_t>(kMaxInterpBand - m)] =
                std::conj(tab[static_cast<std::size_t>(kMaxInterpBand + m)]);
        }
    }
    double acc = 0.0;
    for (const auto& mode : modes_) {
        Complex term = mode.coeff;
        for (int a = 0; a < dims_; ++a) {
            term *= table[static_cast<std::size_t>(a)]
                         [static_cast<std::size_t>(kMaxInterpBand + mode.k[static_cast<std::size_t>(a)])];
        }
        acc += term.real();
    }
    return acc;
}

VectorInterpolant::VectorInterpolant(const VectorFieldOnGrid& u) {
    comps.reserve(static_cast<std::size_t>(u.dims()));
    for (int c = 0; c < u.dims(); ++c) {
        comps.emplace_back(u[c]);
    }
}

std::array<double, 3> VectorInterpolant::operator()(const std::array<double, 3>& x) const {
    std::array<double, 3> v{0.0, 0.0, 0.0};
    for (std::size_t c = 0; c < comps.size(); ++c) {
        v[c] = comps[c](x);
    }
    return v;
}

FlowSpec make_flow(const VectorFieldOnGrid& drift, const NoiseBasis& basis, bool incompressible) {
    auto report = validate_basis(basis);
    if (!report.pass) {
        std::string what = "noise basis rejected:";
        for (const auto& f : report.failures) {
            what += " " + f;
        }
        throw InvalidArgument(what);
    }
    const NoiseBasis* resolved = &basis;
    NoiseBasis converted;
    if (basis.mode == NoiseMode::qg_streamfunction) {
        converted = qg_velocity_fields(basis.streams, basis.weights);
        resolved = &converted;
    }
    FlowSpec flow;
    flow.drift = drift;
    flow.incompressible = incompressible;
    for (std::size_t i = 0; i < resolved->fields.size(); ++i) {
        double w = i < resolved->weights.size() ? resolved->weights[i] : 1.0;
        std::vector<SpectralScalarField> comps;
        for (int c = 0; c < resolved->fields[i].dims(); ++c) {
            comps.push_back(w * resolved->fields[i][c]);
        }
        flow.noise.emplace_back(std::move(comps));
    }
    validate_flow(flow);
    return flow;
}

void validate_flow(const FlowSpec& flow) {
    const PeriodicGrid& grid = flow.drift.grid();
    for (const auto& xi : flow.noise) {
        if (xi.grid() != grid) {
            throw InvalidArgument("flow noise fields must share the drift grid");
        }
    }
    if (flow.incompressible) {
        auto check = [](const VectorFieldOnGrid& u, const char* what) {
            double res = norm_l2(divergence(u)) / (field_scale(u) + 1e-300);
            if (res > 1e-10) {
                throw InvalidArgument(std::string(what) +
                                      " fails the divergence-free requirement: residual " +
                                      std::to_string(res));
            }
        };
        check(flow.drift, "drift");
        for (const auto& xi : flow.noise) {
            check(xi, "noise field");
        }
    }
}

MaterialLoop make_circle_loop(const PeriodicGrid& grid, const std::array<double, 3>& center,
                              double radius, int vertices, std::array<int, 2> axes) {
    if (vertices < 16) {
        throw InvalidArgument("material loops need at least 16 vertices");
    }
    if (radius <= 0.0) {
        throw InvalidArgument("loop radius must be positive");
    }
    MaterialLoop loop;
    loop.dims = grid.dims();
    loop.points.resize(static_cast<std::size_t>(vertices), center);
    for (int p = 0; p < vertices; ++p) {
        double th = kTwoPi * p / vertices;
        auto& x = loop.points[static_cast<std::size_t>(p)];
        x[static_cast<std::size_t>(axes[0])] = center[static_cast<std::size_t>(axes[0])] +
                                               radius * std::cos(th);
        x[static_cast<std::size_t>(axes[1])] = center[static_cast<std::size_t>(axes[1])] +
                                               radius * std::sin(th);
    }
    loop.initial_spacing.resize(static_cast<std::size_t>(vertices));
    for (std::size_t p = 0; p < loop.points.size(); ++p) {
        std::size_t q = (p + 1) % loop.points.size();
        double s = 0.0;
        for (int a = 0; a < loop.dims; ++a) {
            double d = loop.points[q][static_cast<std::size_t>(a)] -
                       loop.points[p][static_cast<std::size_t>(a)];
            s += d * d;
        }
        loop.initial_spacing[p] = std::sqrt(s);
    }
    return loop;
}

namespace {

std::vector<double> segment_lengths(const MaterialLoop& loop) {
    std::vector<double> seg(loop.points.size());
    for (std::size_t p = 0; p < loop.points.size(); ++p) {
        std::size_t q = (p + 1) % loop.points.size();
        double s = 0.0;
        for (int a = 0; a < loop.dims; ++a) {
            double d = loop.points[q][static_cast<std::size_t>(a)] -
                       loop.points[p][static_cast<std::size_t>(a)];
            s += d * d;
        }
        seg[p] = std::sqrt(s);
    }
    return seg;
}

// Half-spectrum DFT of P periodic samples, for trigonometric
// re-evaluation at arbitrary parameters.
std::vector<Complex> periodic_coefficients(const std::vector<double>& samples) {
    const std::size_t P = samples.size();
    std::vector<Complex> c(P / 2 + 1, Complex(0.0, 0.0));
    for (std::size_t p = 0; p < P; ++p) {
        double ph = -kTwoPi * static_cast<double>(p) / static_cast<double>(P);
        Complex step(std::cos(ph), std::sin(ph));
        Complex e(1.0, 0.0);
        for (std::size_t k = 0; k <= P / 2; ++k) {
            c[k] += samples[p] * e;
            e *= step;
        }
    }
    for (auto& v : c) {
        v /= static_cast<double>(P);
    }
    return c;
}

double eval_periodic_coefficients(const std::vector<Complex>& c, std::size_t P, double theta) {
    double val = c[0].real();
    Complex step(std::cos(theta), std::sin(theta));
    Complex e = step;
    for (std::size_t k = 1; k <= P / 2; ++k) {
        double w = (k < P / 2 || P % 2 != 0) ? 2.0 : 1.0;
        val += w * (c[k] * e).real();
        e *= step;
    }
    return val;
}

// d/dtheta of the interpolant at the sample labels theta_p = 2 pi p / P;
// the Nyquist mode of an even count carries no usable derivative and is
// dropped, as usual for spectral differentiation.
std::vector<double> label_derivative_samples(const std::vector<double>& samples) {
    const std::size_t P = samples.size();
    auto c = periodic_coefficients(samples);
    std::vector<double> out(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        double theta = kTwoPi * static_cast<double>(p) / static_cast<double>(P);
        Complex step(std::cos(theta), std::sin(theta));
        Complex e = step;
        double val = 0.0;
        for (std::size_t k = 1; k <= P / 2; ++k) {
            if (P % 2 == 0 && k == P / 2) {
                break;
            }
            val += 2.0 * (Complex(0.0, static_cast<double>(k)) * c[k] * e).real();
            e *= step;
        }
        out[p] = val;
    }
    return out;
}

}  // namespace

double max_segment_stretch(const MaterialLoop& loop) {
    auto seg = segment_lengths(loop);
    double worst = 0.0;
    for (std::size_t p = 0; p < seg.size(); ++p) {
        double base = loop.initial_spacing[p] > 0.0 ? loop.initial_spacing[p] : 1.0;
        worst = std::max(worst, seg[p] / base);
    }
    return worst;
}

bool resample_loop(MaterialLoop& loop, bool force) {
    if (!force && max_segment_stretch(loop) < loop.resample_threshold) {
        return false;
    }
    const std::size_t P = loop.points.size();
    auto seg = segment_lengths(loop);
    std::vector<double> cum(P + 1, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        cum[p + 1] = cum[p] + seg[p];
    }
    const double total = cum[P];
    if (total <= 0.0) {
        return false;
    }

    // invert arc length piecewise-linearly to parameter values, then
    // evaluate the coordinate series spectrally there
    std::vector<double> thetas(P);
    std::size_t seg_idx = 0;
    for (std::size_t q = 0; q < P; ++q) {
        double target = total * static_cast<double>(q) / static_cast<double>(P);
        while (seg_idx + 1 < P && cum[seg_idx + 1] < target) {
            ++seg_idx;
        }
        double frac = seg[seg_idx] > 0.0 ? (target - cum[seg_idx]) / seg[seg_idx] : 0.0;
        thetas[q] = kTwoPi * (static_cast<double>(seg_idx) + frac) / static_cast<double>(P);
    }

    std::vector<std::array<double, 3>> fresh(P);
    for (int a = 0; a < loop.dims; ++a) {
        std::vector<double> samples(P);
        for (std::size_t p = 0; p < P; ++p) {
            samples[p] = loop.points[p][static_cast<std::size_t>(a)];
        }
        auto coeff = periodic_coefficients(samples);
        for (std::size_t q = 0; q < P; ++q) {
            fresh[q][static_cast<std::size_t>(a)] = eval_periodic_coefficients(coeff, P, thetas[q]);
        }
    }
    loop.points = std::move(fresh);
    loop.initial_spacing = segment_lengths(loop);
    return true;
}

TracerEnsemble make_tracer_ensemble(const PeriodicGrid& grid, int count, std::uint64_t seed) {
    if (count < 1) {
        throw InvalidArgument("tracer ensembles need at least one point");
    }
    TracerEnsemble ens;
    ens.positions.resize(static_cast<std::size_t>(count), {0.0, 0.0, 0.0});
    ens.carried_values.assign(static_cast<std::size_t>(count), 0.0);
    for (int p = 0; p < count; ++p) {
        for (int a = 0; a < grid.dims(); ++a) {
            ens.positions[static_cast<std::size_t>(p)][static_cast<std::size_t>(a)] =
                grid.length(a) *
                philox_uniform(seed, static_cast<std::uint64_t>(p), static_cast<std::uint32_t>(a));
        }
    }
    return ens;
}

namespace {

// integral of sum_a values_a dx_a over the loop.  The vertices are a
// smooth periodic function of the material label, so x'(theta) comes
// from differentiating their Fourier series and the uniform-label
// trapezoid converges spectrally; summing chords instead would tie the
// quadrature to the inscribed polygon and stall at O(P^-2).
double label_quadrature(const MaterialLoop& loop,
                        const std::vector<std::array<double, 3>>& values) {
    const std::size_t P = loop.points.size();
    double acc = 0.0;
    std::vector<double> samples(P);
    for (int a = 0; a < loop.dims; ++a) {
        for (std::size_t p = 0; p < P; ++p) {
            samples[p] = loop.points[p][static_cast<std::size_t>(a)];
        }
        auto deriv = label_derivative_samples(samples);
        for (std::size_t p = 0; p < P; ++p) {
            acc += values[p][static_cast<std::size_t>(a)] * deriv[p];
        }
    }
    return acc * kTwoPi / static_cast<double>(P);
}

double loop_integral(const MaterialLoop& loop, const std::vector<TrigInterpolant>& w) {
    const std::size_t P = loop.points.size();
    std::vector<std::array<double, 3>> values(P, {0.0, 0.0, 0.0});
    for (std::size_t p = 0; p < P; ++p) {
        for (std::size_t c = 0; c < w.size(); ++c) {
            values[p][c] = w[c](loop.points[p]);
        }
    }
    return label_quadrature(loop, values);
}

std::vector<TrigInterpolant> one_form_interpolants(const DifferentialForm& v) {
    if (v.grade() != FormGrade::one_form) {
        throw InvalidArgument("circulation needs a one-form");
    }
    std::vector<TrigInterpolant> w;
    w.reserve(static_cast<std::size_t>(v.components()));
    for (int c = 0; c < v.components(); ++c) {
        w.emplace_back(v[c]);
    }
    return w;
}

}  // namespace

double circulation(const MaterialLoop& loop, const DifferentialForm& v) {
    if (v.dims() != loop.dims) {
        throw InvalidArgument("loop and one-form dimensions differ");
    }
    return loop_integral(loop, one_form_interpolants(v));
}

double circulation(const MaterialLoop& loop, const DifferentialForm& v,
                   const DifferentialForm& density) {
    if (density.grade() != FormGrade::density || density.grid() != v.grid()) {
        throw InvalidArgument("circulation weight must be a density on the same grid");
    }
    auto w = one_form_interpolants(v);
    TrigInterpolant d(density[0]);
    const std::size_t P = loop.points.size();
    std::vector<std::array<double, 3>> values(P, {0.0, 0.0, 0.0});
    for (std::size_t p = 0; p < P; ++p) {
        double dv = d(loop.points[p]);
        for (std::size_t c = 0; c < w.size(); ++c) {
            values[p][c] = w[c](loop.points[p]) / dv;
        }
    }
    return label_quadrature(loop, values);
}

namespace {

// -dt L_u q + sum_i dW_i L_{xi_i} q, dealiased once at the boundary.
DifferentialForm form_increment(const DifferentialForm& q, const FlowSpec& flow,
                                const std::vector<double>& dW, double dt) {
    DifferentialForm incr = lie_derivative(flow.drift, q);
    incr *= -dt;
    for (std::size_t i = 0; i < flow.noise.size(); ++i) {
        if (dW[i] != 0.0) {
            incr.axpy(dW[i], lie_derivative(flow.noise[i], q));
        }
    }
    return dealias(incr);
}

DifferentialForm step_form(const DifferentialForm& q, const FlowSpec& flow,
                           const std::vector<double>& dW, double dt, TransportScheme scheme) {
    if (scheme == TransportScheme::stratonovich) {
        DifferentialForm k1 = form_increment(q, flow, dW, dt);
        DifferentialForm k2 = form_increment(q + k1, flow, dW, dt);
        DifferentialForm out = q;
        out.axpy(0.5, k1);
        out.axpy(0.5, k2);
        return out;
    }
    DifferentialForm out = q + form_increment(q, flow, dW, dt);
    if (scheme == TransportScheme::ito && !flow.noise.empty()) {
        out.axpy(0.5 * dt, dealias(lie_laplacian(flow.noise, q)));
    }
    return out;
}

double form_invariant(const DifferentialForm& q) {
    if (q.grade() == FormGrade::density) {
        return q[0].mean() * q.grid().volume();
    }
    if (q.grade() == FormGrade::one_form && q.dims() == 3) {
        return helicity(q);
    }
    double s = 0.0;
    for (int c = 0; c < q.components(); ++c) {
        double n = norm_l2(q[c]);
        s += n * n;
    }
    return std::sqrt(s);
}

std::vector<double> path_row(const WienerPath& path, std::int64_t n, std::size_t K) {
    std::vector<double> dW(K, 0.0);
    for (std::size_t j = 0; j < K; ++j) {
        dW[j] = path.increment(n, static_cast<int>(j));
    }
    return dW;
}

// One point step: Heun (Stratonovich) or plain Euler-Maruyama (Ito).
// Velocities `u_a` at the current state, `u_b` at the predictor stage
// (pass the same interpolant for steady flows).
void step_points(std::vector<std::array<double, 3>>& pts, const VectorInterpolant& u_a,
                 const VectorInterpolant& u_b, const std::vector<VectorInterpolant>& xis,
                 const std::vector<double>& dW, double dt, int dims, bool heun) {
    for (auto& x : pts) {
        std::array<double, 3> k1{0.0, 0.0, 0.0};
        auto ua = u_a(x);
        std::array<double, 3> noise_a{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < xis.size(); ++i) {
            auto xv = xis[i](x);
            for (int a = 0; a < dims; ++a) {
                noise_a[static_cast<std::size_t>(a)] += dW[i] * xv[static_cast<std::size_t>(a)];
            }
        }
        for (int a = 0; a < dims; ++a) {
            k1[static_cast<std::size_t>(a)] =
                ua[static_cast<std::size_t>(a)] * dt - noise_a[static_cast<std::size_t>(a)];
        }
        if (!heun) {
            for (int a = 0; a < dims; ++a) {
                x[static_cast<std::size_t>(a)] += k1[static_cast<std::size_t>(a)];
            }
            continue;
        }
        std::array<double, 3> xp = x;
        for (int a = 0; a < dims; ++a) {
            xp[static_cast<std::size_t>(a)] += k1[static_cast<std::size_t>(a)];
        }
        auto ub = u_b(xp);
        std::array<double, 3> noise_b{0.0, 0.0, 0.0};
        for (std::size_t i = 0; i < xis.size(); ++i) {
            auto xv = xis[i](xp);
            for (int a = 0; a < dims; ++a) {
                noise_b[static_cast<std::size_t>(a)] += dW[i] * xv[static_cast<std::size_t>(a)];
            }
        }
        for (int a = 0; a < dims; ++a) {
            double k2 = ub[static_cast<std::size_t>(a)] * dt - noise_b[static_cast<std::size_t>(a)];
            x[static_cast<std::size_t>(a)] += 0.5 * (k1[static_cast<std::size_t>(a)] + k2);
        }
    }
}

// (X.grad) X per component, dealiased: the Stratonovich-to-Ito drift of
// the point SDE.
VectorFieldOnGrid self_transport_drift(const VectorFieldOnGrid& X) {
    std::vector<SpectralScalarField> comps;
    for (int j = 0; j < X.dims(); ++j) {
        SpectralScalarField t = multiply(X[0], partial_derivative(X[j], 0));
        for (int m = 1; m < X.dims(); ++m) {
            t += multiply(X[m], partial_derivative(X[j], m));
        }
        dealias_in_place(t);
        comps.push_back(std::move(t));
    }
    return VectorFieldOnGrid(std::move(comps));
}

}  // namespace

FormAdvection advect_form(const DifferentialForm& q0, const FlowSpec& flow,
                          const WienerPath& path, double T, TransportScheme scheme,
                          std::int64_t record_every) {
    validate_flow(flow);
    if (q0.grid() != flow.drift.grid()) {
        throw InvalidArgument("form and flow grids differ");
    }
    if (record_every < 1) {
        throw InvalidArgument("record_every must be >= 1");
    }
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = flow.noise.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    FormAdvection out;
    out.q = dealias(q0);
    out.times.push_back(0.0);
    out.invariant.push_back(form_invariant(out.q));
    for (std::int64_t n = 0; n < steps; ++n) {
        out.q = step_form(out.q, flow, path_row(path, n, K), path.dt, scheme);
        if ((n + 1) % record_every == 0 || n + 1 == steps) {
            out.times.push_back(static_cast<double>(n + 1) * path.dt);
            out.invariant.push_back(form_invariant(out.q));
        }
    }
    return out;
}

LoopAdvection advect_loop(const MaterialLoop& loop, const FlowSpec& flow, const WienerPath& path,
                          double T, TransportScheme scheme) {
    validate_flow(flow);
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = flow.noise.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    VectorInterpolant u(flow.drift);
    std::vector<VectorInterpolant> xis;
    for (const auto& xi : flow.noise) {
        xis.emplace_back(xi);
    }
    LoopAdvection out;
    out.loop = loop;
    const bool heun = scheme == TransportScheme::stratonovich;
    for (std::int64_t n = 0; n < steps; ++n) {
        step_points(out.loop.points, u, u, xis, path_row(path, n, K), path.dt, out.loop.dims,
                    heun);
        if (resample_loop(out.loop)) {
            ++out.resample_count;
        }
    }
    return out;
}

KelvinReport kelvin_check(const DifferentialForm& v0, const FlowSpec& flow,
                          const WienerPath& path, double T, const MaterialLoop& loop,
                          TransportScheme scheme) {
    validate_flow(flow);
    if (v0.grade() != FormGrade::one_form) {
        throw InvalidArgument("kelvin_check transports a one-form");
    }
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = flow.noise.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    VectorInterpolant u(flow.drift);
    std::vector<VectorInterpolant> xis;
    std::vector<VectorFieldOnGrid> covariation_drifts;
    for (const auto& xi : flow.noise) {
        xis.emplace_back(xi);
        covariation_drifts.push_back(self_transport_drift(xi));
    }

    const bool ito_pair = scheme != TransportScheme::stratonovich;
    DifferentialForm v = dealias(v0);
    MaterialLoop c = loop;
    KelvinReport report;

    auto record = [&](double t) {
        double circ = circulation(c, v);
        report.times.push_back(t);
        report.circulations.push_back(circ);
        return circ;
    };
    // drift rate of the mismatched Ito pair: the loop lags the
    // Stratonovich trajectory by 1/2 sum_i (xi_i.grad) xi_i per unit time
    auto predictor_rate = [&]() {
        if (!ito_pair || K == 0) {
            return 0.0;
        }
        DifferentialForm omega = exterior_derivative(v);
        double rate = 0.0;
        for (const auto& a : covariation_drifts) {
            rate -= 0.5 * circulation(c, dealias(interior_product(a, omega)));
        }
        return rate;
    };
    auto double_lie_rate = [&]() {
        if (!ito_pair || K == 0) {
            return 0.0;
        }
        double rate = 0.0;
        for (const auto& xi : flow.noise) {
            rate += 0.5 * circulation(c, dealias(lie_derivative(xi, lie_derivative(xi, v))));
        }
        return rate;
    };

    report.initial_circulation = record(0.0);
    double prev_pred = predictor_rate();
    double prev_dlr = double_lie_rate();
    for (std::int64_t n = 0; n < steps; ++n) {
        auto dW = path_row(path, n, K);
        v = step_form(v, flow, dW, path.dt, scheme);
        step_points(c.points, u, u, xis, dW, path.dt, c.dims, !ito_pair);
        if (resample_loop(c)) {
            ++report.resample_count;
        }
        double circ = record(static_cast<double>(n + 1) * path.dt);
        double rel = std::abs(circ - report.initial_circulation) /
                     std::max(std::abs(report.initial_circulation), 1e-300);
        report.max_rel_drift = std::max(report.max_rel_drift, rel);
        double pred = predictor_rate();
        double dlr = double_lie_rate();
        report.predicted_change += 0.5 * (prev_pred + pred) * path.dt;
        report.double_lie_change += 0.5 * (prev_dlr + dlr) * path.dt;
        prev_pred = pred;
        prev_dlr = dlr;
    }
    report.realized_change = report.circulations.back() - report.initial_circulation;
    return report;
}

HelicityReport helicity_check(const DifferentialForm& v0, const FlowSpec& flow,
                              const WienerPath& path, double T, TransportScheme scheme) {
    validate_flow(flow);
    if (v0.grade() != FormGrade::one_form || v0.dims() != 3) {
        throw InvalidArgument("helicity_check needs a 3-d one-form");
    }
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = flow.noise.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    DifferentialForm v = dealias(v0);
    HelicityReport report;
    report.initial = helicity(v);
    report.times.push_back(0.0);
    report.helicities.push_back(report.initial);

    const bool predict = scheme == TransportScheme::ito_uncorrected && K > 0;
    // uncorrected Ito rate: d Lambda / dt = -integral v ^ Delta_Lie(dv)
    auto rate_now = [&]() {
        if (!predict) {
            return 0.0;
        }
        DifferentialForm omega = exterior_derivative(v);
        DifferentialForm lap = dealias(lie_laplacian(flow.noise, omega));
        double rate = 0.0;
        for (int c2 = 0; c2 < v.components(); ++c2) {
            rate -= inner_l2(v[c2], lap[c2]);
        }
        return rate;
    };

    double prev_rate = rate_now();
    for (std::int64_t n = 0; n < steps; ++n) {
        v = step_form(v, flow, path_row(path, n, K), path.dt, scheme);
        double lam = helicity(v);
        report.times.push_back(static_cast<double>(n + 1) * path.dt);
        report.helicities.push_back(lam);
        double rel = std::abs(lam - report.initial) / std::max(std::abs(report.initial), 1e-300);
        report.max_rel_drift = std::max(report.max_rel_drift, rel);
        double r = rate_now();
        report.predicted_change += 0.5 * (prev_rate + r) * path.dt;
        prev_rate = r;
    }
    report.realized_change = report.helicities.back() - report.initial;
    return report;
}

PVReport pv_along_paths(const SpectralScalarField& mu0, const SQGParams& params,
                        const std::vector<SpectralScalarField>& streams, const WienerPath& path,
                        double T, const TracerEnsemble& tracers, TransportScheme scheme) {
    const PeriodicGrid& grid = mu0.grid();
    if (grid.dims() != 2) {
        throw InvalidArgument("pv_along_paths runs on 2-d grids");
    }
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = streams.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    std::vector<VectorInterpolant> xi_vel;
    std::vector<VectorFieldOnGrid> xi_drifts;
    for (const auto& s : streams) {
        VectorFieldOnGrid v = perp_gradient(s);
        xi_vel.emplace_back(v);
        xi_drifts.push_back(self_transport_drift(v));
    }
    std::vector<VectorInterpolant> drift_interp;
    for (const auto& a : xi_drifts) {
        drift_interp.emplace_back(a);
    }

    SQGState state{dealias(mu0), 0.0};
    auto velocity = [&](const SQGState& s) {
        return VectorInterpolant(perp_gradient(streamfunction(s, params)));
    };

    TrigInterpolant mu_interp(state.mu);
    // The beta term is evaluated on the unwrapped tracer coordinate: the
    // planetary gradient lives on the universal cover, and folding the
    // position back into the box would snap the conserved value by beta
    // times the box length at every crossing.
    auto q_value = [&](const TrigInterpolant& mu, const std::array<double, 3>& x) {
        return mu(x) + params.f0 + params.beta * x[1];
    };

    PVReport report;
    std::vector<std::array<double, 3>> pts = tracers.positions;
    const std::size_t M = pts.size();
    for (const auto& x : pts) {
        report.initial_q.push_back(q_value(mu_interp, x));
    }
    report.predicted_final_q = report.initial_q;

    // per-tracer covariation rate: -1/2 sum_j ((xi_v_j.grad) xi_v_j).grad Q
    auto tracer_rates = [&](const SQGState& s, const std::vector<std::array<double, 3>>& xs) {
        std::vector<double> rates(xs.size(), 0.0);
        if (K == 0) {
            return rates;
        }
        auto grad = gradient(s.mu);
        std::vector<TrigInterpolant> gq;
        for (const auto& g : grad) {
            gq.emplace_back(g);
        }
        for (std::size_t p = 0; p < xs.size(); ++p) {
            double r = 0.0;
            for (std::size_t j = 0; j < K; ++j) {
                auto a = drift_interp[j](xs[p]);
                double adotg = a[0] * gq[0](xs[p]) + a[1] * gq[1](xs[p]);
                if (params.beta != 0.0) {
                    adotg += a[1] * params.beta;
                }
                r -= 0.5 * adotg;
            }
            rates[p] = r;
        }
        return rates;
    };
    // ensemble double-bracket rate 1/2 sum_j [xi_j, [xi_j, Q]] at tracers
    auto naive_rates = [&](const SQGState& s, const std::vector<std::array<double, 3>>& xs) {
        std::vector<double> rates(xs.size(), 0.0);
        for (std::size_t j = 0; j < K; ++j) {
            SpectralScalarField inner = noise_bracket(streams[j], s.mu, params.beta);
            TrigInterpolant dbl(jacobi_bracket(streams[j], inner));
            for (std::size_t p = 0; p < xs.size(); ++p) {
                rates[p] += 0.5 * dbl(xs[p]);
            }
        }
        return rates;
    };

    const bool ito_pair = scheme != TransportScheme::stratonovich;
    std::vector<double> prev_rate = ito_pair ? tracer_rates(state, pts)
                                             : std::vector<double>(M, 0.0);
    double naive_sum = 0.0;
    std::vector<double> prev_naive = ito_pair ? naive_rates(state, pts)
                                              : std::vector<double>(M, 0.0);

    for (std::int64_t n = 0; n < steps; ++n) {
        auto dW = path_row(path, n, K);
        SQGState next;
        switch (scheme) {
            case TransportScheme::stratonovich:
                next = strat_step(state, params, streams, dW, path.dt);
                break;
            case TransportScheme::ito:
                next = ito_step(state, params, streams, dW, path.dt);
                break;
            case TransportScheme::ito_uncorrected:
                next = ito_uncorrected_step(state, params, streams, dW, path.dt);
                break;
        }
        VectorInterpolant u_a = velocity(state);
        VectorInterpolant u_b = ito_pair ? u_a : velocity(next);
        step_points(pts, u_a, u_b, xi_vel, dW, path.dt, 2, !ito_pair);
        state = std::move(next);
        if (ito_pair) {
            auto rates = tracer_rates(state, pts);
            auto nrates = naive_rates(state, pts);
            for (std::size_t p = 0; p < M; ++p) {
                report.predicted_final_q[p] += 0.5 * (prev_rate[p] + rates[p]) * path.dt;
                naive_sum += 0.5 * (prev_naive[p] + nrates[p]) * path.dt / static_cast<double>(M);
            }
            prev_rate = std::move(rates);
            prev_naive = std::move(nrates);
        }
    }

    mu_interp = TrigInterpolant(state.mu);
    for (std::size_t p = 0; p < M; ++p) {
        report.final_q.push_back(q_value(mu_interp, pts[p]));
        double dq = report.final_q[p] - report.initial_q[p];
        report.max_abs_change = std::max(report.max_abs_change, std::abs(dq));
        report.mean_rate += dq / (T * static_cast<double>(M));
        report.predicted_mean_rate +=
            (report.predicted_final_q[p] - report.initial_q[p]) / (T * static_cast<double>(M));
    }
    report.double_bracket_mean_rate = naive_sum / T;
    return report;
}

FluxReport vorticity_flux_check(const DifferentialForm& v0, const FlowSpec& flow,
                                const WienerPath& path, double T, const MaterialLoop& loop) {
    validate_flow(flow);
    if (v0.grade() != FormGrade::one_form || v0.dims() != 3) {
        throw InvalidArgument("vorticity_flux_check needs a 3-d one-form");
    }
    const std::int64_t steps = resolve_steps(path, T);
    const std::size_t K = flow.noise.size();
    if (static_cast<std::size_t>(path.K) < K) {
        throw InvalidArgument("path has fewer components than the noise basis");
    }

    VectorInterpolant u(flow.drift);
    std::vector<VectorInterpolant> xis;
    for (const auto& xi : flow.noise) {
        xis.emplace_back(xi);
    }
    DifferentialForm v = dealias(v0);
    MaterialLoop c = loop;
    FluxReport report;
    report.initial = circulation(c, v);
    report.times.push_back(0.0);
    report.fluxes.push_back(report.initial);
    for (std::int64_t n = 0; n < steps; ++n) {
        auto dW = path_row(path, n, K);
        v = step_form(v, flow, dW, path.dt, TransportScheme::stratonovich);
        step_points(c.points, u, u, xis, dW, path.dt, c.dims, true);
        resample_loop(c);
        double f = circulation(c, v);
        report.times.push_back(static_cast<double>(n + 1) * path.dt);
        report.fluxes.push_back(f);
        report.max_abs_drift = std::max(report.max_abs_drift, std::abs(f - report.initial));
    }
    return report;
}

}  // namespace sgfd
