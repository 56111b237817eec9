#include "noise.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "philox.hpp"

namespace sgfd {

WienerPath WienerPath::coarsen(int factor) const {
    if (factor < 1) throw InvalidArgument("coarsen: factor must be >= 1");
    if (N % factor != 0)
        throw InvalidArgument("coarsen: step count " + std::to_string(N) +
                              " not divisible by " + std::to_string(factor));
    WienerPath out;
    out.seed = seed;
    out.K = K;
    out.dt = dt * factor;
    out.N = N / factor;
    out.increments.assign(static_cast<std::size_t>(out.N) * static_cast<std::size_t>(K), 0.0);
    for (std::int64_t n = 0; n < out.N; ++n) {
        for (int j = 0; j < K; ++j) {
            double s = 0.0;
            for (int m = 0; m < factor; ++m)
                s += increment(n * factor + m, j);
            out.increments[static_cast<std::size_t>(n) * static_cast<std::size_t>(K) +
                           static_cast<std::size_t>(j)] = s;
        }
    }
    return out;
}

WienerPath sample_increments(std::uint64_t seed, int K, double dt, std::int64_t N) {
    if (K < 1) throw InvalidArgument("sample_increments: K must be >= 1");
    if (dt <= 0.0) throw InvalidArgument("sample_increments: dt must be positive");
    if (N < 1) throw InvalidArgument("sample_increments: N must be >= 1");
    WienerPath p;
    p.seed = seed;
    p.K = K;
    p.dt = dt;
    p.N = N;
    const double root = std::sqrt(dt);
    p.increments.resize(static_cast<std::size_t>(N) * static_cast<std::size_t>(K));
    std::size_t at = 0;
    for (std::int64_t n = 0; n < N; ++n) {
        for (int j = 0; j < K; ++j) {
            p.increments[at++] =
                root * philox_normal(seed, static_cast<std::uint64_t>(n),
                                     static_cast<std::uint32_t>(j));
        }
    }
    return p;
}

std::vector<double> estimate_covariation(const WienerPath& path) {
    const int K = path.K;
    std::vector<double> c(static_cast<std::size_t>(K) * static_cast<std::size_t>(K), 0.0);
    for (std::int64_t n = 0; n < path.N; ++n) {
        for (int i = 0; i < K; ++i) {
            double wi = path.increment(n, i);
            for (int j = 0; j < K; ++j)
                c[static_cast<std::size_t>(i) * static_cast<std::size_t>(K) +
                  static_cast<std::size_t>(j)] += wi * path.increment(n, j);
        }
    }
    return c;
}

void write_path_csv(const std::string& path, const WienerPath& w) {
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + path);
    std::fprintf(f, "step");
    for (int j = 1; j <= w.K; ++j) std::fprintf(f, ",dW%d", j);
    std::fprintf(f, "\n");
    for (std::int64_t n = 0; n < w.N; ++n) {
        std::fprintf(f, "%lld", static_cast<long long>(n));
        for (int j = 0; j < w.K; ++j) std::fprintf(f, ",%.17g", w.increment(n, j));
        std::fprintf(f, "\n");
    }
    if (std::fclose(f) != 0) throw IoError("write failed: " + path);
}

const PeriodicGrid& NoiseBasis::grid() const {
    if (mode == NoiseMode::vector_fields) {
        if (fields.empty()) throw InvalidArgument("noise basis: no fields");
        return fields[0].grid();
    }
    if (streams.empty()) throw InvalidArgument("noise basis: no stream functions");
    return streams[0].grid();
}

VectorFieldOnGrid perp_gradient(const SpectralScalarField& xi) {
    if (xi.grid().dims() != 2)
        throw InvalidArgument("perp_gradient: stream functions need a 2D grid");
    std::vector<SpectralScalarField> comps;
    comps.push_back(-1.0 * partial_derivative(xi, 1));
    comps.push_back(partial_derivative(xi, 0));
    return VectorFieldOnGrid(std::move(comps));
}

NoiseBasis qg_velocity_fields(const std::vector<SpectralScalarField>& streams,
                              std::vector<double> weights) {
    if (streams.empty()) throw InvalidArgument("qg_velocity_fields: no stream functions");
    NoiseBasis b;
    b.mode = NoiseMode::vector_fields;
    for (const auto& s : streams) b.fields.push_back(perp_gradient(s));
    if (weights.empty()) weights.assign(streams.size(), 1.0);
    if (weights.size() != streams.size())
        throw InvalidArgument("qg_velocity_fields: weight count mismatch");
    b.weights = std::move(weights);
    return b;
}

BasisReport validate_basis(const NoiseBasis& basis) {
    BasisReport r;
    int K = basis.count();
    if (K == 0) {
        r.pass = false;
        r.failures.push_back("empty basis");
        return r;
    }
    const PeriodicGrid& g = basis.grid();
    if (static_cast<int>(basis.weights.size()) != K) {
        r.pass = false;
        r.failures.push_back("weight count does not match field count");
    }
    for (std::size_t i = 0; i < basis.weights.size(); ++i) {
        if (basis.weights[i] < 0.0) {
            r.pass = false;
            r.failures.push_back("negative weight at index " + std::to_string(i));
        }
        if (i > 0 && basis.weights[i] > basis.weights[i - 1]) {
            r.pass = false;
            r.failures.push_back("weights not sorted descending at index " + std::to_string(i));
        }
    }
    if (basis.mode == NoiseMode::vector_fields) {
        for (int i = 0; i < K; ++i) {
            const VectorFieldOnGrid& f = basis.fields[static_cast<std::size_t>(i)];
            if (f.grid() != g) {
                r.pass = false;
                r.failures.push_back("field " + std::to_string(i) + " on a different grid");
                r.divergence_residuals.push_back(-1.0);
                continue;
            }
            double scale = norm_l2(f) + 1e-300;
            double resid = norm_l2(divergence(f)) / scale;
            r.divergence_residuals.push_back(resid);
            if (resid > 1e-10) {
                r.pass = false;
                r.failures.push_back("field " + std::to_string(i) +
                                     " divergence residual " + std::to_string(resid));
            }
        }
    } else {
        for (int i = 0; i < K; ++i) {
            if (basis.streams[static_cast<std::size_t>(i)].grid() != g) {
                r.pass = false;
                r.failures.push_back("stream " + std::to_string(i) + " on a different grid");
            }
        }
    }
    return r;
}

}  // namespace sgfd
