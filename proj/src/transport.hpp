#pragma once

// Kinematic transport under prescribed stochastic flows: advection of
// differential forms, material loops and tracer points driven by one
// shared Brownian path, plus the circulation / helicity / vorticity-flux
// / potential-vorticity checks built on them.
//
// Point SDE convention: dx = u dt - sum_i xi_i o dW_i (minus sign on the
// noise), matching the form advection dq = -L_u q dt + sum_i L_{xi_i} q
// o dW_i.  Stratonovich experiments integrate with Heun, Ito experiments
// with Euler-Maruyama; the `ito` form scheme adds the half double-Lie
// drift, `ito_uncorrected` omits it, and Ito point paths never carry a
// drift correction.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "forms.hpp"
#include "noise.hpp"
#include "sqg.hpp"

namespace sgfd {

enum class TransportScheme { stratonovich, ito, ito_uncorrected };

// Evaluates a band-limited field anywhere by summing its retained
// Fourier modes; exact (to round-off) for dealiased data.
class TrigInterpolant {
  public:
    TrigInterpolant() = default;
    explicit TrigInterpolant(const SpectralScalarField& f, double rel_threshold = 1e-14);

    double operator()(const std::array<double, 3>& x) const;
    int dims() const { return dims_; }

  private:
    struct Mode {
        std::array<int, 3> k;
        Complex coeff;  // includes the half-spectrum doubling weight
    };
    int dims_ = 0;
    std::array<double, 3> k_scale_{1.0, 1.0, 1.0};
    std::array<int, 3> band_{0, 0, 0};
    std::vector<Mode> modes_;
};

struct VectorInterpolant {
    std::vector<TrigInterpolant> comps;

    VectorInterpolant() = default;
    explicit VectorInterpolant(const VectorFieldOnGrid& u);
    std::array<double, 3> operator()(const std::array<double, 3>& x) const;
    int dims() const { return static_cast<int>(comps.size()); }
};

// Steady drift plus noise vector fields, all on one grid.
struct FlowSpec {
    VectorFieldOnGrid drift;
    std::vector<VectorFieldOnGrid> noise;
    bool incompressible = true;
};

// Resolves a validated basis (weights folded in) behind a drift field.
FlowSpec make_flow(const VectorFieldOnGrid& drift, const NoiseBasis& basis,
                   bool incompressible = true);

// Throws InvalidArgument on grid mismatch or divergence residuals above
// 1e-10 when the incompressible flag is set.
void validate_flow(const FlowSpec& flow);

// Closed polyline in unwrapped coordinates (first vertex connects to the
// last); loops that wind around the torus are not supported.
struct MaterialLoop {
    std::vector<std::array<double, 3>> points;
    int dims = 2;
    double resample_threshold = 2.0;
    std::vector<double> initial_spacing;  // segment lengths at creation
};

// Circle of P vertices (P >= 16) in the plane of `axes`.
MaterialLoop make_circle_loop(const PeriodicGrid& grid, const std::array<double, 3>& center,
                              double radius, int vertices, std::array<int, 2> axes = {0, 1});

double max_segment_stretch(const MaterialLoop& loop);

// Arc-length reparameterization through trigonometric interpolation of
// the vertex coordinates; returns true when triggered by the threshold.
bool resample_loop(MaterialLoop& loop, bool force = false);

struct TracerEnsemble {
    std::vector<std::array<double, 3>> positions;
    std::vector<double> carried_values;
};

TracerEnsemble make_tracer_ensemble(const PeriodicGrid& grid, int count, std::uint64_t seed);

// Line integral of sum_j v_j dx_j around the loop: v is evaluated
// spectrally at the vertices and the tangent comes from differentiating
// the vertex coordinates in the material label, so the quadrature
// converges spectrally in the vertex count.  The density-weighted
// overload integrates v/D.
double circulation(const MaterialLoop& loop, const DifferentialForm& v);
double circulation(const MaterialLoop& loop, const DifferentialForm& v,
                   const DifferentialForm& density);

struct FormAdvection {
    DifferentialForm q;
    std::vector<double> times;
    // mass for densities, helicity for 3-d one-forms, L2 norm otherwise
    std::vector<double> invariant;
};

// Integrates dq + L_{dx_t} q = 0 for T = steps * path.dt; T must land on
// a whole number of increments within the path horizon.
FormAdvection advect_form(const DifferentialForm& q0, const FlowSpec& flow,
                          const WienerPath& path, double T, TransportScheme scheme,
                          std::int64_t record_every = 1);

struct LoopAdvection {
    MaterialLoop loop;
    int resample_count = 0;
};

LoopAdvection advect_loop(const MaterialLoop& loop, const FlowSpec& flow, const WienerPath& path,
                          double T, TransportScheme scheme);

struct KelvinReport {
    std::vector<double> times;
    std::vector<double> circulations;
    double initial_circulation = 0.0;
    double max_rel_drift = 0.0;
    double realized_change = 0.0;
    // time quadrature of -1/2 sum_i oint i_{(xi_i.grad) xi_i} dv over the
    // co-moving loop: the covariation drift of the Ito loop/field pair
    double predicted_change = 0.0;
    // loop quadrature of 1/2 sum_i oint L_{xi_i} L_{xi_i} v for reference
    double double_lie_change = 0.0;
    int resample_count = 0;
};

// Co-evolves the one-form and the loop with one Brownian path and
// reports the circulation series.  Stratonovich: drift converges to
// zero under refinement.  Ito variants: loop points take plain
// Euler-Maruyama while the field takes the corrected (`ito`) or plain
// (`ito_uncorrected`) update; the corrected pair's O(1) circulation
// change tracks the covariation prediction, and the corrected-minus-
// uncorrected difference on one path isolates the double-Lie quadrature.
KelvinReport kelvin_check(const DifferentialForm& v0, const FlowSpec& flow,
                          const WienerPath& path, double T, const MaterialLoop& loop,
                          TransportScheme scheme);

struct HelicityReport {
    std::vector<double> times;
    std::vector<double> helicities;
    double initial = 0.0;
    double max_rel_drift = 0.0;
    double realized_change = 0.0;
    // time quadrature of -integral v ^ (sum_i L_{xi_i} L_{xi_i} dv): the
    // pathwise rate of the uncorrected Ito evolution
    double predicted_change = 0.0;
};

// 3-d only.  Stratonovich and corrected Ito preserve helicity under
// refinement; the uncorrected Ito run drifts at the predicted rate.
HelicityReport helicity_check(const DifferentialForm& v0, const FlowSpec& flow,
                              const WienerPath& path, double T, TransportScheme scheme);

struct PVReport {
    std::vector<double> initial_q;
    std::vector<double> final_q;
    std::vector<double> predicted_final_q;  // covariation drift quadrature
    double max_abs_change = 0.0;
    double mean_rate = 0.0;
    double predicted_mean_rate = 0.0;
    // ensemble-naive rate: 1/2 sum_j [xi_j, [xi_j, Q]] sampled at tracers
    double double_bracket_mean_rate = 0.0;
};

// Field by the matching SQG stepper, tracers by the matching point
// scheme, one path for both.  Stratonovich conserves Q along paths under
// refinement; Ito tracers in the corrected field drift at the pathwise
// rate -1/2 sum_j ((xi_v_j.grad) xi_v_j).grad Q.
PVReport pv_along_paths(const SpectralScalarField& mu0, const SQGParams& params,
                        const std::vector<SpectralScalarField>& streams, const WienerPath& path,
                        double T, const TracerEnsemble& tracers, TransportScheme scheme);

struct FluxReport {
    std::vector<double> times;
    std::vector<double> fluxes;
    double initial = 0.0;
    double max_abs_drift = 0.0;
};

// Stokes reduction: the flux of dv through the advected surface is the
// circulation of v around its advected boundary.  Stratonovich only.
FluxReport vorticity_flux_check(const DifferentialForm& v0, const FlowSpec& flow,
                                const WienerPath& path, double T, const MaterialLoop& loop);

}  // namespace sgfd
