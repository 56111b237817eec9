#pragma once

// Strict JSON run configurations for the command entry points.  Every
// document is validated before anything executes: required keys are
// checked, types and ranges are enforced, and unknown keys are rejected
// at every nesting level with the offending key path in the error text.

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pod.hpp"
#include "sqg.hpp"
#include "transport.hpp"

namespace sgfd {

// Schema or document errors; mapped to the usage exit code by the CLI.
struct ConfigError : InvalidArgument {
    using InvalidArgument::InvalidArgument;
};

// Parses text into a JSON document, wrapping syntax errors in ConfigError.
nlohmann::json parse_json_document(const std::string& text);

// {"size": [n1, n2(, n3)], "lengths": [L1, ...]?}
PeriodicGrid parse_grid(const nlohmann::json& spec, const std::string& path);

// Scalar field specs:
//   {"type": "zero"}
//   {"type": "modes", "components": [{"k": [..], "amplitude": a, "phase": p?}, ..]}
//   {"type": "random", "seed": s, "kmax": m, "amplitude": a?}
//   {"type": "file", "path": "..."}
// Mode wavenumbers must sit inside the dealiased band; file grids must
// match the configured grid exactly.
SpectralScalarField build_field(const nlohmann::json& spec, const PeriodicGrid& grid,
                                const std::string& path);

// Vector field specs:
//   {"type": "zero"}
//   {"type": "constant", "value": [..]}
//   {"type": "stream", "field": <scalar spec>}          (2D, divergence-free)
//   {"type": "random", "seed": s, "kmax": m, "amplitude": a?, "divergence_free": b?}
//   {"type": "components", "fields": [<scalar spec> per axis]}
VectorFieldOnGrid build_vector_field(const nlohmann::json& spec, const PeriodicGrid& grid,
                                     const std::string& path);

// Form specs: {"grade": "scalar|one_form|two_form|density", then one of
//   "type": "random", "seed": s, "kmax": m, "amplitude": a?
//   "type": "components", "fields": [<scalar spec> per component]}
DifferentialForm build_form(const nlohmann::json& spec, const PeriodicGrid& grid,
                            const std::string& path);

struct SqgDocument {
    SQGRunConfig run;
    std::string log_level = "info";  // quiet | info | debug
};

// Full run-sqg document: grid, F/beta/f0, dt, steps, scheme, seed,
// initial condition, noise (inline stream functions or a POD basis
// directory), snapshot/diagnostic cadence, filter settings, out_dir.
SqgDocument parse_sqg_config(const std::string& json_text);
SqgDocument parse_sqg_config(const nlohmann::json& doc);

struct TransportRunConfig {
    std::string experiment;  // form | kelvin | helicity | flux | pv
    TransportScheme scheme = TransportScheme::stratonovich;
    PeriodicGrid grid;
    double dt = 0.0;
    std::int64_t steps = 0;
    std::uint64_t seed = 0;
    std::int64_t record_every = 1;
    std::string out_dir;
    std::string log_level = "info";

    // kinematic experiments (form, kelvin, helicity, flux)
    FlowSpec flow;
    DifferentialForm form;
    MaterialLoop loop;  // kelvin and flux only

    // pv experiment
    SQGParams params;
    SpectralScalarField mu0;
    std::vector<SpectralScalarField> streams;
    int tracer_count = 0;
    std::uint64_t tracer_seed = 0;

    double horizon() const { return dt * static_cast<double>(steps); }
};

TransportRunConfig parse_transport_config(const std::string& json_text);
TransportRunConfig parse_transport_config(const nlohmann::json& doc);

struct PodRunConfig {
    std::string snapshot_dir;
    int K = 1;
    PodOptions options;
    std::string out_dir;
    std::string log_level = "info";
};

PodRunConfig parse_pod_config(const std::string& json_text);
PodRunConfig parse_pod_config(const nlohmann::json& doc);

// Reads a basis written by write_basis: the leading K weighted stream
// functions for SQG noise, xi_i = sqrt(lambda_i^2) * inv_laplacian(curl
// of mode i).  Modes must be 2D and divergence-free to 1e-8.
std::vector<SpectralScalarField> load_basis_streams(const std::string& dir, int K,
                                                    const PeriodicGrid& grid,
                                                    const std::string& path);

}  // namespace sgfd
