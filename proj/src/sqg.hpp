#pragma once

// Quasigeostrophic dynamics for mu = Q - f on the doubly periodic
// beta-plane: deterministic advection, Stratonovich (Heun) and Ito
// (Euler-Maruyama with the double-bracket drift) stepping with a
// stream-function noise basis, plus the Hamiltonian and Casimir
// diagnostics.
//
// Conventions: psi = (Laplacian - F)^{-1} mu, Q = mu + f0 + beta*x2;
// brackets against Q use [a, Q] = [a, mu] + beta * d1 a, since x2 is
// not a periodic field.  Noise enters as
//   d mu = -[psi, Q] dt + sum_i [xi_i, Q] o dW_i,
// which transports mu along the velocity perp_grad(psi) dt -
// sum_i perp_grad(xi_i) o dW_i.

#include <cstdint>
#include <string>
#include <vector>

#include "grid.hpp"
#include "noise.hpp"

namespace sgfd {

struct SQGParams {
    double F = 0.0;     // rotational Froude number
    double beta = 0.0;  // planetary vorticity gradient
    double f0 = 0.0;    // constant Coriolis part
    // optional spectral filter exp(-nu |k|^(2*order) dt) applied after
    // each step; off when nu == 0
    double filter_nu = 0.0;
    int filter_order = 1;
};

struct SQGState {
    SpectralScalarField mu;
    double time = 0.0;
};

enum class SQGScheme { deterministic, stratonovich, ito, ito_uncorrected };

const char* scheme_name(SQGScheme s);

SpectralScalarField streamfunction(const SQGState& state, const SQGParams& params);

// d1 a * d2 b - d2 a * d1 b, dealiased.
SpectralScalarField jacobi_bracket(const SpectralScalarField& a, const SpectralScalarField& b);

// -[psi, mu] - beta d1 psi.
SpectralScalarField rhs_deterministic(const SQGState& state, const SQGParams& params);

// [xi, Q] = [xi, mu] + beta d1 xi.
SpectralScalarField noise_bracket(const SpectralScalarField& xi, const SpectralScalarField& mu,
                                  double beta);

// One step; dW must have one increment per stream function (unused for
// the deterministic scheme).  States come back dealiased.
SQGState strat_step(const SQGState& state, const SQGParams& params,
                    const std::vector<SpectralScalarField>& streams,
                    const std::vector<double>& dW, double dt);
SQGState ito_step(const SQGState& state, const SQGParams& params,
                  const std::vector<SpectralScalarField>& streams,
                  const std::vector<double>& dW, double dt);
SQGState ito_uncorrected_step(const SQGState& state, const SQGParams& params,
                              const std::vector<SpectralScalarField>& streams,
                              const std::vector<double>& dW, double dt);
SQGState deterministic_step(const SQGState& state, const SQGParams& params, double dt);

// (max|grad psi| dt + sum_i max|grad xi_i| sqrt(dt)) / min spacing;
// advisory only, never enforced.
double cfl_advisory(const SQGState& state, const SQGParams& params,
                    const std::vector<SpectralScalarField>& streams, double dt);

// integral Phi(Q); Phi is a power (<= 4) or a tabulated function
// interpolated linearly.
struct CasimirSpec {
    int power = 2;
    std::vector<double> nodes;   // ascending Q samples (tabulated mode)
    std::vector<double> values;  // Phi at the nodes

    bool tabulated() const { return !nodes.empty(); }
};
double casimir(const SQGState& state, const SQGParams& params, const CasimirSpec& spec);

// H = 1/2 integral(|grad psi|^2 + F psi^2).
double energy(const SQGState& state, const SQGParams& params);

struct DiagnosticsRow {
    double time = 0.0;
    double energy = 0.0;
    double casimir_q1 = 0.0;
    double casimir_q2 = 0.0;
    double casimir_q3 = 0.0;
    double casimir_q4 = 0.0;
    double mean_mu = 0.0;
    double max_q = 0.0;
};

struct SQGRunConfig {
    SQGParams params;
    SQGScheme scheme = SQGScheme::deterministic;
    SpectralScalarField mu0;
    double dt = 1e-3;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    std::vector<SpectralScalarField> noise_streams;  // weights folded in
    std::int64_t diagnostic_every = 1;
    std::int64_t snapshot_every = 0;  // 0 = no snapshots
    std::string out_dir;              // empty = no file output
};

struct SQGRunResult {
    SQGState state;
    std::vector<DiagnosticsRow> diagnostics;
    bool aborted = false;
    double last_good_time = 0.0;
    std::string abort_reason;
};

// Fixed-dt loop, deterministic given (config, seed); aborts on a
// non-finite state and reports the last good time.
SQGRunResult run_sqg(const SQGRunConfig& config);

void write_diagnostics_csv(const std::string& path, const std::vector<DiagnosticsRow>& rows);

}  // namespace sgfd
