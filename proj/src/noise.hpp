#pragma once

// Seeded Brownian increment paths, quadratic-covariation estimation,
// and the noise basis {xi_i} in vector or stream-function form.

#include <cstdint>
#include <string>
#include <vector>

#include "forms.hpp"
#include "grid.hpp"

namespace sgfd {

// Immutable after construction; shared by the field and particle
// integrators so both see the identical realization.
struct WienerPath {
    std::uint64_t seed = 0;
    int K = 0;
    double dt = 0.0;
    std::int64_t N = 0;
    std::vector<double> increments;  // N x K, row-major, units sqrt(time)

    double increment(std::int64_t step, int comp) const {
        return increments[static_cast<std::size_t>(step) * static_cast<std::size_t>(K) +
                          static_cast<std::size_t>(comp)];
    }
    double horizon() const { return dt * static_cast<double>(N); }

    // Sums consecutive groups of `factor` increments: the same Brownian
    // path seen at step factor*dt.  N must be divisible by factor.
    WienerPath coarsen(int factor) const;
};

// Entry (step, comp) is sqrt(dt) * Phi^{-1}(counter-based uniform), so
// the path is a pure function of its arguments.
WienerPath sample_increments(std::uint64_t seed, int K, double dt, std::int64_t N);

// K x K matrix sum_n dW_i(n) dW_j(n), row-major; approaches T * I at
// the Monte Carlo rate 4*T*sqrt(2/N).
std::vector<double> estimate_covariation(const WienerPath& path);

// CSV with header: step, dW1..dWK.
void write_path_csv(const std::string& path, const WienerPath& w);

enum class NoiseMode { vector_fields, qg_streamfunction };

struct NoiseBasis {
    NoiseMode mode = NoiseMode::vector_fields;
    std::vector<VectorFieldOnGrid> fields;       // vector mode
    std::vector<SpectralScalarField> streams;    // qg mode
    std::vector<double> weights;                 // descending, >= 0

    int count() const {
        return static_cast<int>(mode == NoiseMode::vector_fields ? fields.size()
                                                                 : streams.size());
    }
    const PeriodicGrid& grid() const;
};

// Perpendicular gradient (-d2 xi, d1 xi): the stream function's
// divergence-free velocity.
VectorFieldOnGrid perp_gradient(const SpectralScalarField& xi);

// Converts stream functions to a vector-mode basis; weights default to 1.
NoiseBasis qg_velocity_fields(const std::vector<SpectralScalarField>& streams,
                              std::vector<double> weights = {});

struct BasisReport {
    bool pass = true;
    std::vector<double> divergence_residuals;  // per field, vector mode
    std::vector<std::string> failures;
};

// Divergence residuals (vector mode), weight ordering and sign, grid
// consistency; failures are reported, never thrown.
BasisReport validate_basis(const NoiseBasis& basis);

}  // namespace sgfd
