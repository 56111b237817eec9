#pragma once

// Differential forms on flat periodic 2-/3-tori, with the operator
// algebra for stochastic advection: exterior derivative, interior
// product, Lie derivative (Cartan and closed vector-calculus routes),
// L2 duals and the transpose action, the diamond pairing, the grade
// lowering dual derivative delta_xi = i_xi d i_xi, and the
// second-order operator Delta_Lie = sum_j L_{xi_j} L_{xi_j}.
//
// Representation: components are real scalar fields.
//   scalar   b                   1 component
//   one_form A . dx              d components
//   two_form B . dS (3D)         3 components; 2D pseudoscalar, 1
//   density  D d^dx              1 component
// Operations compute pointwise products raw; time steppers apply the
// 2/3 projection at stage boundaries, not inside contraction chains
// (intermediate truncation would break i_X i_X = 0 and the dual-route
// identities that are tested to near round-off).

#include <cstdint>
#include <vector>

#include "grid.hpp"

namespace sgfd {

enum class FormGrade { scalar, one_form, two_form, density };

const char* grade_name(FormGrade g);
int component_count(FormGrade g, int dims);

class VectorFieldOnGrid {
  public:
    VectorFieldOnGrid() = default;
    explicit VectorFieldOnGrid(const PeriodicGrid& grid);
    explicit VectorFieldOnGrid(std::vector<SpectralScalarField> comps);

    const PeriodicGrid& grid() const { return comps_.at(0).grid(); }
    int dims() const { return static_cast<int>(comps_.size()); }
    SpectralScalarField& operator[](int c) { return comps_[static_cast<std::size_t>(c)]; }
    const SpectralScalarField& operator[](int c) const {
        return comps_[static_cast<std::size_t>(c)];
    }

  private:
    std::vector<SpectralScalarField> comps_;
};

class DifferentialForm {
  public:
    DifferentialForm() = default;
    DifferentialForm(FormGrade grade, const PeriodicGrid& grid);
    DifferentialForm(FormGrade grade, std::vector<SpectralScalarField> comps);

    FormGrade grade() const { return grade_; }
    const PeriodicGrid& grid() const { return comps_.at(0).grid(); }
    int dims() const { return comps_.at(0).grid().dims(); }
    int components() const { return static_cast<int>(comps_.size()); }
    SpectralScalarField& operator[](int c) { return comps_[static_cast<std::size_t>(c)]; }
    const SpectralScalarField& operator[](int c) const {
        return comps_[static_cast<std::size_t>(c)];
    }

    DifferentialForm& operator+=(const DifferentialForm& o);
    DifferentialForm& operator-=(const DifferentialForm& o);
    DifferentialForm& operator*=(double s);
    DifferentialForm& axpy(double a, const DifferentialForm& o);

  private:
    FormGrade grade_ = FormGrade::scalar;
    std::vector<SpectralScalarField> comps_;
};

DifferentialForm operator+(DifferentialForm a, const DifferentialForm& b);
DifferentialForm operator-(DifferentialForm a, const DifferentialForm& b);
DifferentialForm operator*(double s, DifferentialForm a);

// Dual of a grade under the componentwise L2 pairing <p,q>; carries the
// same component count as its primal grade and its own transport law.
class DualForm {
  public:
    DualForm() = default;
    DualForm(FormGrade primal, const PeriodicGrid& grid);
    DualForm(FormGrade primal, std::vector<SpectralScalarField> comps);

    FormGrade primal_grade() const { return primal_; }
    const PeriodicGrid& grid() const { return comps_.at(0).grid(); }
    int components() const { return static_cast<int>(comps_.size()); }
    SpectralScalarField& operator[](int c) { return comps_[static_cast<std::size_t>(c)]; }
    const SpectralScalarField& operator[](int c) const {
        return comps_[static_cast<std::size_t>(c)];
    }

  private:
    FormGrade primal_ = FormGrade::scalar;
    std::vector<SpectralScalarField> comps_;
};

// 1-form density m = M.dx (x) dV: the momentum-valued output of diamond,
// paired with vector fields componentwise.
struct MomentumField {
    std::vector<SpectralScalarField> comps;

    const PeriodicGrid& grid() const { return comps.at(0).grid(); }
    int dims() const { return static_cast<int>(comps.size()); }
};

// ---- exterior calculus ----

// Grade raises by one; top grades (density, 2D two_form) are rejected.
DifferentialForm exterior_derivative(const DifferentialForm& q);

// i_X q, grade lowers by one; scalars are rejected.
DifferentialForm interior_product(const VectorFieldOnGrid& X, const DifferentialForm& q);

// Cartan route: d i_X q + i_X d q (terms that vanish by grade dropped).
DifferentialForm lie_derivative(const VectorFieldOnGrid& X, const DifferentialForm& q);

// Independent closed vector-calculus route:
//   scalar    X.grad b
//   one_form  (X.grad)A_j + A_i d_j X_i
//   two_form  (X.grad)B - (B.grad)X + B div X   (2D: X.grad b + b div X)
//   density   X.grad D + D div X
DifferentialForm lie_derivative_closed(const VectorFieldOnGrid& X, const DifferentialForm& q);

// Transpose of L_X against the componentwise pairing:
// <lie_derivative_transpose(X,p), q> = <p, lie_derivative(X,q)>.
DualForm lie_derivative_transpose(const VectorFieldOnGrid& X, const DualForm& p);

// Transport law of dual objects (so the transpose is its negative).
DualForm lie_derivative(const VectorFieldOnGrid& X, const DualForm& p);

// 1-form density law: (X.grad)M + M_j grad X^j + M div X.
MomentumField lie_derivative(const VectorFieldOnGrid& X, const MomentumField& m);

// diamond: <p (*) q, Y> = <p, -L_Y q> for every vector field Y.
MomentumField diamond(const DualForm& p, const DifferentialForm& q);

// delta_xi q = i_xi d(i_xi q); grade lowers by one; 0-forms map to the
// zero scalar by convention.
DifferentialForm lie_dual(const VectorFieldOnGrid& xi, const DifferentialForm& q);

// Delta_Lie q = sum_j L_{xi_j} L_{xi_j} q (raw; callers dealias).
DifferentialForm lie_laplacian(const std::vector<VectorFieldOnGrid>& basis,
                               const DifferentialForm& q);

// int v . curl v over the 3-torus; v must be a 3D one_form.
double helicity(const DifferentialForm& v);

// Relative residual of (L^T_X p)(*)q - p(*)(L_X q) + L_X(p(*)q) paired
// against `probes` random vector fields (alternating solenoidal and
// unconstrained), seeded deterministically.
double check_lemma22(const DualForm& p, const DifferentialForm& q, const VectorFieldOnGrid& X,
                     int probes = 6, std::uint64_t seed = 2202);

// ---- pairings and norms ----

double pairing(const DualForm& p, const DifferentialForm& q);
double pairing(const MomentumField& m, const VectorFieldOnGrid& X);
double norm_l2(const DifferentialForm& q);
double norm_l2(const VectorFieldOnGrid& X);
double norm_l2(const MomentumField& m);
double max_abs(const DifferentialForm& q);

// ---- vector-field utilities ----

SpectralScalarField divergence(const VectorFieldOnGrid& X);
double max_divergence(const VectorFieldOnGrid& X);
VectorFieldOnGrid leray_project(const VectorFieldOnGrid& X);
VectorFieldOnGrid curl(const VectorFieldOnGrid& X);  // 3D
// sum_i X_i d_i f, products raw.
SpectralScalarField advect_scalar(const VectorFieldOnGrid& X, const SpectralScalarField& f);
// (X.grad)X, the covariation drift of point paths.
VectorFieldOnGrid self_advection(const VectorFieldOnGrid& X);

VectorFieldOnGrid dealias(const VectorFieldOnGrid& X);
DifferentialForm dealias(const DifferentialForm& q);

// Deterministic band-limited random data for property tests and suites.
VectorFieldOnGrid random_vector_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax,
                                      bool divergence_free);
DifferentialForm random_form(FormGrade grade, const PeriodicGrid& grid, std::uint64_t seed,
                             int kmax);
DualForm random_dual_form(FormGrade primal, const PeriodicGrid& grid, std::uint64_t seed,
                          int kmax);

// Snapshot per component at <prefix>.c<j>.gfsf; the sidecar records the
// grade and component index so read_form can reassemble.
void write_form(const std::string& prefix, const DifferentialForm& q);
DifferentialForm read_form(const std::string& prefix);

}  // namespace sgfd
