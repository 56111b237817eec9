#include "sqg.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "field_io.hpp"

namespace sgfd {

namespace {

void require_2d(const PeriodicGrid& grid, const char* what) {
    if (grid.dims() != 2) {
        throw InvalidArgument(std::string(what) + " requires a 2-d grid");
    }
}

// A(mu) dt + sum_i B_i(mu) dW_i with A the deterministic tendency and
// B_i the noise bracket; shared by both stage evaluations.
SpectralScalarField tendency_increment(const SpectralScalarField& mu, const SQGParams& params,
                                       const std::vector<SpectralScalarField>& streams,
                                       const std::vector<double>& dW, double dt) {
    SQGState s{mu, 0.0};
    SpectralScalarField incr = rhs_deterministic(s, params);
    incr *= dt;
    for (std::size_t i = 0; i < streams.size(); ++i) {
        if (dW[i] != 0.0) {
            incr.axpy(dW[i], noise_bracket(streams[i], mu, params.beta));
        }
    }
    return incr;
}

void check_noise_args(const std::vector<SpectralScalarField>& streams,
                      const std::vector<double>& dW, const PeriodicGrid& grid) {
    if (streams.size() != dW.size()) {
        throw InvalidArgument("number of noise increments must match the stream functions");
    }
    for (const auto& s : streams) {
        if (s.grid() != grid) {
            throw InvalidArgument("noise stream functions must live on the state grid");
        }
    }
}

void apply_filter(SpectralScalarField& mu, const SQGParams& params, double dt) {
    if (params.filter_nu == 0.0) {
        return;
    }
    if (params.filter_order < 1) {
        throw InvalidArgument("filter order must be >= 1");
    }
    const PeriodicGrid& grid = mu.grid();
    auto coeffs = transform_forward(mu);
    for_each_mode(grid, [&](std::int64_t idx, const std::array<int, 3>& k) {
        double k2 = 0.0;
        for (int a = 0; a < grid.dims(); ++a) {
            double kp = k[a] * grid.k_scale(a);
            k2 += kp * kp;
        }
        coeffs[static_cast<std::size_t>(idx)] *=
            std::exp(-params.filter_nu * std::pow(k2, params.filter_order) * dt);
    });
    mu = transform_backward(grid, coeffs);
}

SpectralScalarField finish_step(SpectralScalarField mu, const SQGParams& params, double dt) {
    dealias_in_place(mu);
    apply_filter(mu, params, dt);
    return mu;
}

double pointwise_speed_max(const SpectralScalarField& stream) {
    auto g = gradient(stream);
    double m = 0.0;
    for (std::int64_t i = 0; i < stream.grid().total(); ++i) {
        m = std::max(m, std::hypot(g[0][i], g[1][i]));
    }
    return m;
}

}  // namespace

const char* scheme_name(SQGScheme s) {
    switch (s) {
        case SQGScheme::deterministic: return "deterministic";
        case SQGScheme::stratonovich: return "stratonovich";
        case SQGScheme::ito: return "ito";
        case SQGScheme::ito_uncorrected: return "ito_uncorrected";
    }
    return "unknown";
}

SpectralScalarField streamfunction(const SQGState& state, const SQGParams& params) {
    require_2d(state.mu.grid(), "streamfunction");
    return invert_helmholtz(state.mu, params.F);
}

SpectralScalarField jacobi_bracket(const SpectralScalarField& a, const SpectralScalarField& b) {
    if (a.grid() != b.grid()) {
        throw InvalidArgument("jacobi_bracket arguments must share a grid");
    }
    require_2d(a.grid(), "jacobi_bracket");
    SpectralScalarField out = multiply(partial_derivative(a, 0), partial_derivative(b, 1));
    out -= multiply(partial_derivative(a, 1), partial_derivative(b, 0));
    dealias_in_place(out);
    return out;
}

SpectralScalarField rhs_deterministic(const SQGState& state, const SQGParams& params) {
    SpectralScalarField psi = streamfunction(state, params);
    SpectralScalarField out = jacobi_bracket(psi, state.mu);
    out *= -1.0;
    if (params.beta != 0.0) {
        out.axpy(-params.beta, partial_derivative(psi, 0));
    }
    return out;
}

SpectralScalarField noise_bracket(const SpectralScalarField& xi, const SpectralScalarField& mu,
                                  double beta) {
    SpectralScalarField out = jacobi_bracket(xi, mu);
    if (beta != 0.0) {
        out.axpy(beta, partial_derivative(xi, 0));
    }
    return out;
}

SQGState strat_step(const SQGState& state, const SQGParams& params,
                    const std::vector<SpectralScalarField>& streams,
                    const std::vector<double>& dW, double dt) {
    check_noise_args(streams, dW, state.mu.grid());
    SpectralScalarField k1 = tendency_increment(state.mu, params, streams, dW, dt);
    SpectralScalarField predictor = state.mu + k1;
    SpectralScalarField k2 = tendency_increment(predictor, params, streams, dW, dt);

    SpectralScalarField mu = state.mu;
    mu.axpy(0.5, k1);
    mu.axpy(0.5, k2);
    return {finish_step(std::move(mu), params, dt), state.time + dt};
}

SQGState ito_step(const SQGState& state, const SQGParams& params,
                  const std::vector<SpectralScalarField>& streams,
                  const std::vector<double>& dW, double dt) {
    check_noise_args(streams, dW, state.mu.grid());
    SpectralScalarField mu = state.mu;
    mu += tendency_increment(state.mu, params, streams, dW, dt);
    // drift correction: 1/2 sum_j [xi_j, [xi_j, Q]] dt
    for (const auto& xi : streams) {
        SpectralScalarField inner = noise_bracket(xi, state.mu, params.beta);
        mu.axpy(0.5 * dt, jacobi_bracket(xi, inner));
    }
    return {finish_step(std::move(mu), params, dt), state.time + dt};
}

SQGState ito_uncorrected_step(const SQGState& state, const SQGParams& params,
                              const std::vector<SpectralScalarField>& streams,
                              const std::vector<double>& dW, double dt) {
    check_noise_args(streams, dW, state.mu.grid());
    SpectralScalarField mu = state.mu;
    mu += tendency_increment(state.mu, params, streams, dW, dt);
    return {finish_step(std::move(mu), params, dt), state.time + dt};
}

SQGState deterministic_step(const SQGState& state, const SQGParams& params, double dt) {
    return strat_step(state, params, {}, {}, dt);
}

double cfl_advisory(const SQGState& state, const SQGParams& params,
                    const std::vector<SpectralScalarField>& streams, double dt) {
    if (dt <= 0.0) {
        throw InvalidArgument("cfl_advisory needs dt > 0");
    }
    const PeriodicGrid& grid = state.mu.grid();
    double h = std::min(grid.spacing(0), grid.spacing(1));
    double number = pointwise_speed_max(streamfunction(state, params)) * dt / h;
    for (const auto& xi : streams) {
        number += pointwise_speed_max(xi) * std::sqrt(dt) / h;
    }
    return number;
}

double casimir(const SQGState& state, const SQGParams& params, const CasimirSpec& spec) {
    const PeriodicGrid& grid = state.mu.grid();
    require_2d(grid, "casimir");
    if (spec.tabulated()) {
        if (spec.nodes.size() != spec.values.size() || spec.nodes.size() < 2) {
            throw InvalidArgument("tabulated casimir needs matching nodes/values, at least two");
        }
        if (!std::is_sorted(spec.nodes.begin(), spec.nodes.end())) {
            throw InvalidArgument("tabulated casimir nodes must be ascending");
        }
    } else if (spec.power < 0 || spec.power > 4) {
        throw InvalidArgument("casimir power must lie in 0..4");
    }

    SpectralScalarField x2 = params.beta != 0.0 ? coordinate_field(grid, 1)
                                                : SpectralScalarField(grid, 0.0);
    double acc = 0.0;
    for (std::int64_t i = 0; i < grid.total(); ++i) {
        double q = state.mu[i] + params.f0 + params.beta * x2[i];
        double phi;
        if (spec.tabulated()) {
            if (q < spec.nodes.front() || q > spec.nodes.back()) {
                throw InvalidArgument("casimir table does not cover the observed Q range");
            }
            auto hi = std::upper_bound(spec.nodes.begin(), spec.nodes.end(), q);
            if (hi == spec.nodes.end()) {
                --hi;
            }
            if (hi == spec.nodes.begin()) {
                ++hi;
            }
            std::size_t j = static_cast<std::size_t>(hi - spec.nodes.begin());
            double t = (q - spec.nodes[j - 1]) / (spec.nodes[j] - spec.nodes[j - 1]);
            phi = (1.0 - t) * spec.values[j - 1] + t * spec.values[j];
        } else {
            phi = 1.0;
            for (int p = 0; p < spec.power; ++p) {
                phi *= q;
            }
        }
        acc += phi;
    }
    return acc / static_cast<double>(grid.total()) * grid.volume();
}

double energy(const SQGState& state, const SQGParams& params) {
    SpectralScalarField psi = streamfunction(state, params);
    auto g = gradient(psi);
    double e = 0.0;
    for (const auto& c : g) {
        e += inner_l2(c, c);
    }
    e += params.F * inner_l2(psi, psi);
    return 0.5 * e;
}

namespace {

DiagnosticsRow make_row(const SQGState& state, const SQGParams& params) {
    DiagnosticsRow row;
    row.time = state.time;
    row.energy = energy(state, params);
    row.casimir_q1 = casimir(state, params, CasimirSpec{1, {}, {}});
    row.casimir_q2 = casimir(state, params, CasimirSpec{2, {}, {}});
    row.casimir_q3 = casimir(state, params, CasimirSpec{3, {}, {}});
    row.casimir_q4 = casimir(state, params, CasimirSpec{4, {}, {}});
    row.mean_mu = state.mu.mean();

    const PeriodicGrid& grid = state.mu.grid();
    SpectralScalarField x2 = params.beta != 0.0 ? coordinate_field(grid, 1)
                                                : SpectralScalarField(grid, 0.0);
    double mq = 0.0;
    for (std::int64_t i = 0; i < grid.total(); ++i) {
        mq = std::max(mq, std::abs(state.mu[i] + params.f0 + params.beta * x2[i]));
    }
    row.max_q = mq;
    return row;
}

void write_snapshot_file(const SQGRunConfig& config, const SQGState& state, std::int64_t step) {
    char name[64];
    std::snprintf(name, sizeof(name), "mu_%08" PRId64 ".gfsf", step);
    nlohmann::json meta = {{"time", state.time},
                           {"scheme", scheme_name(config.scheme)},
                           {"F", config.params.F},
                           {"beta", config.params.beta},
                           {"f0", config.params.f0}};
    write_field(config.out_dir + "/" + name, state.mu, meta);
}

}  // namespace

SQGRunResult run_sqg(const SQGRunConfig& config) {
    if (config.dt <= 0.0) {
        throw InvalidArgument("run_sqg needs dt > 0");
    }
    if (config.steps < 0) {
        throw InvalidArgument("run_sqg needs steps >= 0");
    }
    if (config.diagnostic_every < 1) {
        throw InvalidArgument("run_sqg needs diagnostic_every >= 1");
    }
    const bool stochastic = config.scheme != SQGScheme::deterministic;
    if (!config.out_dir.empty()) {
        std::filesystem::create_directories(config.out_dir);
    }

    WienerPath path;
    const int K = static_cast<int>(config.noise_streams.size());
    if (stochastic && K > 0 && config.steps > 0) {
        path = sample_increments(config.seed, K, config.dt,
                                 static_cast<std::int64_t>(config.steps));
    }

    SQGRunResult result;
    result.state = {dealias(config.mu0), 0.0};
    result.diagnostics.push_back(make_row(result.state, config.params));
    if (!config.out_dir.empty() && config.snapshot_every > 0) {
        write_snapshot_file(config, result.state, 0);
    }

    std::vector<double> dW(static_cast<std::size_t>(K), 0.0);
    for (std::int64_t n = 0; n < config.steps; ++n) {
        for (int j = 0; j < K; ++j) {
            dW[static_cast<std::size_t>(j)] = stochastic ? path.increment(n, j) : 0.0;
        }
        SQGState next;
        switch (config.scheme) {
            case SQGScheme::deterministic:
                next = deterministic_step(result.state, config.params, config.dt);
                break;
            case SQGScheme::stratonovich:
                next = strat_step(result.state, config.params, config.noise_streams, dW,
                                  config.dt);
                break;
            case SQGScheme::ito:
                next = ito_step(result.state, config.params, config.noise_streams, dW, config.dt);
                break;
            case SQGScheme::ito_uncorrected:
                next = ito_uncorrected_step(result.state, config.params, config.noise_streams, dW,
                                            config.dt);
                break;
        }
        // max_abs drops NaNs under std::max; the norm propagates them
        if (!std::isfinite(norm_l2(next.mu))) {
            result.aborted = true;
            result.last_good_time = result.state.time;
            result.abort_reason = "state became non-finite during step " + std::to_string(n + 1);
            break;
        }
        result.state = std::move(next);
        const bool last = n + 1 == config.steps;
        if ((n + 1) % config.diagnostic_every == 0 || last) {
            result.diagnostics.push_back(make_row(result.state, config.params));
        }
        if (!config.out_dir.empty() && config.snapshot_every > 0 &&
            ((n + 1) % config.snapshot_every == 0 || last)) {
            write_snapshot_file(config, result.state, n + 1);
        }
    }
    if (!result.aborted) {
        result.last_good_time = result.state.time;
    }
    if (!config.out_dir.empty()) {
        write_diagnostics_csv(config.out_dir + "/diagnostics.csv", result.diagnostics);
    }
    return result;
}

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) {
        throw IoError("cannot open " + path + " for writing");
    }
    std::fprintf(f, "time,energy,casimir_q1,casimir_q2,casimir_q3,casimir_q4,mean_mu,max_q\n");
    for (const auto& r : rows) {
        std::fprintf(f, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.time, r.energy,
                     r.casimir_q1, r.casimir_q2, r.casimir_q3, r.casimir_q4, r.mean_mu, r.max_q);
    }
    std::fclose(f);
}

}  // namespace sgfd
