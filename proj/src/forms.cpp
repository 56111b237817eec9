#include "forms.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "field_io.hpp"

namespace sgfd {

namespace {

void require_same_grid(const PeriodicGrid& a, const PeriodicGrid& b, const char* where) {
    if (a != b) throw InvalidArgument(std::string(where) + ": fields live on different grids");
}

std::uint64_t comp_seed(std::uint64_t seed, int c) {
    return seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(c + 1));
}

// sum_i X_i d_i f, products raw.
SpectralScalarField directional(const VectorFieldOnGrid& X, const SpectralScalarField& f) {
    SpectralScalarField out(f.grid());
    for (int i = 0; i < X.dims(); ++i) {
        SpectralScalarField df = partial_derivative(f, i);
        const SpectralScalarField& xi = X[i];
        for (std::int64_t n = 0; n < out.size(); ++n) out[n] += xi[n] * df[n];
    }
    return out;
}

}  // namespace

const char* grade_name(FormGrade g) {
    switch (g) {
        case FormGrade::scalar: return "scalar";
        case FormGrade::one_form: return "one_form";
        case FormGrade::two_form: return "two_form";
        case FormGrade::density: return "density";
    }
    return "?";
}

int component_count(FormGrade g, int dims) {
    switch (g) {
        case FormGrade::scalar: return 1;
        case FormGrade::one_form: return dims;
        case FormGrade::two_form: return dims == 3 ? 3 : 1;
        case FormGrade::density: return 1;
    }
    return 0;
}

VectorFieldOnGrid::VectorFieldOnGrid(const PeriodicGrid& grid) {
    comps_.assign(static_cast<std::size_t>(grid.dims()), SpectralScalarField(grid));
}

VectorFieldOnGrid::VectorFieldOnGrid(std::vector<SpectralScalarField> comps)
    : comps_(std::move(comps)) {
    if (comps_.empty()) throw InvalidArgument("vector field: no components");
    const PeriodicGrid& g = comps_[0].grid();
    if (static_cast<int>(comps_.size()) != g.dims())
        throw InvalidArgument("vector field: component count does not match grid rank");
    for (const auto& c : comps_) require_same_grid(c.grid(), g, "vector field");
}

DifferentialForm::DifferentialForm(FormGrade grade, const PeriodicGrid& grid) : grade_(grade) {
    comps_.assign(static_cast<std::size_t>(component_count(grade, grid.dims())),
                  SpectralScalarField(grid));
}

DifferentialForm::DifferentialForm(FormGrade grade, std::vector<SpectralScalarField> comps)
    : grade_(grade), comps_(std::move(comps)) {
    if (comps_.empty()) throw InvalidArgument("form: no components");
    const PeriodicGrid& g = comps_[0].grid();
    int want = component_count(grade, g.dims());
    if (static_cast<int>(comps_.size()) != want)
        throw InvalidArgument(std::string("form: ") + grade_name(grade) + " needs " +
                              std::to_string(want) + " components, got " +
                              std::to_string(comps_.size()));
    for (const auto& c : comps_) require_same_grid(c.grid(), g, "form");
}

DifferentialForm& DifferentialForm::operator+=(const DifferentialForm& o) {
    if (grade_ != o.grade_) throw InvalidArgument("form +=: grade mismatch");
    for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] += o.comps_[c];
    return *this;
}

DifferentialForm& DifferentialForm::operator-=(const DifferentialForm& o) {
    if (grade_ != o.grade_) throw InvalidArgument("form -=: grade mismatch");
    for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c] -= o.comps_[c];
    return *this;
}

DifferentialForm& DifferentialForm::operator*=(double s) {
    for (auto& c : comps_) c *= s;
    return *this;
}

DifferentialForm& DifferentialForm::axpy(double a, const DifferentialForm& o) {
    if (grade_ != o.grade_) throw InvalidArgument("form axpy: grade mismatch");
    for (std::size_t c = 0; c < comps_.size(); ++c) comps_[c].axpy(a, o.comps_[c]);
    return *this;
}

DifferentialForm operator+(DifferentialForm a, const DifferentialForm& b) { return a += b; }
DifferentialForm operator-(DifferentialForm a, const DifferentialForm& b) { return a -= b; }
DifferentialForm operator*(double s, DifferentialForm a) { return a *= s; }

DualForm::DualForm(FormGrade primal, const PeriodicGrid& grid) : primal_(primal) {
    comps_.assign(static_cast<std::size_t>(component_count(primal, grid.dims())),
                  SpectralScalarField(grid));
}

DualForm::DualForm(FormGrade primal, std::vector<SpectralScalarField> comps)
    : primal_(primal), comps_(std::move(comps)) {
    if (comps_.empty()) throw InvalidArgument("dual form: no components");
    const PeriodicGrid& g = comps_[0].grid();
    int want = component_count(primal, g.dims());
    if (static_cast<int>(comps_.size()) != want)
        throw InvalidArgument("dual form: component count does not match primal grade");
    for (const auto& c : comps_) require_same_grid(c.grid(), g, "dual form");
}

DifferentialForm exterior_derivative(const DifferentialForm& q) {
    const PeriodicGrid& g = q.grid();
    int d = g.dims();
    switch (q.grade()) {
        case FormGrade::scalar:
            return DifferentialForm(FormGrade::one_form, gradient(q[0]));
        case FormGrade::one_form: {
            if (d == 2) {
                std::vector<SpectralScalarField> w{partial_derivative(q[1], 0) -
                                                   partial_derivative(q[0], 1)};
                return DifferentialForm(FormGrade::two_form, std::move(w));
            }
            std::vector<SpectralScalarField> w;
            w.push_back(partial_derivative(q[2], 1) - partial_derivative(q[1], 2));
            w.push_back(partial_derivative(q[0], 2) - partial_derivative(q[2], 0));
            w.push_back(partial_derivative(q[1], 0) - partial_derivative(q[0], 1));
            return DifferentialForm(FormGrade::two_form, std::move(w));
        }
        case FormGrade::two_form: {
            if (d == 2)
                throw InvalidArgument("exterior_derivative: 2D two_form is top grade");
            SpectralScalarField div(g);
            for (int i = 0; i < 3; ++i) div += partial_derivative(q[i], i);
            return DifferentialForm(FormGrade::density, std::vector<SpectralScalarField>{div});
        }
        case FormGrade::density:
            throw InvalidArgument("exterior_derivative: density is top grade");
    }
    throw InvalidArgument("exterior_derivative: bad grade");
}

DifferentialForm interior_product(const VectorFieldOnGrid& X, const DifferentialForm& q) {
    require_same_grid(X.grid(), q.grid(), "interior_product");
    const PeriodicGrid& g = q.grid();
    int d = g.dims();
    switch (q.grade()) {
        case FormGrade::scalar:
            throw InvalidArgument("interior_product: undefined on scalars");
        case FormGrade::one_form: {
            SpectralScalarField s(g);
            for (int i = 0; i < d; ++i) {
                for (std::int64_t n = 0; n < s.size(); ++n) s[n] += X[i][n] * q[i][n];
            }
            return DifferentialForm(FormGrade::scalar, std::vector<SpectralScalarField>{s});
        }
        case FormGrade::two_form: {
            if (d == 2) {
                SpectralScalarField a(g), b(g);
                for (std::int64_t n = 0; n < a.size(); ++n) {
                    a[n] = -q[0][n] * X[1][n];
                    b[n] = q[0][n] * X[0][n];
                }
                return DifferentialForm(FormGrade::one_form,
                                        std::vector<SpectralScalarField>{a, b});
            }
            // i_X(B.dS) = (B x X).dx
            std::vector<SpectralScalarField> w(3, SpectralScalarField(g));
            for (std::int64_t n = 0; n < w[0].size(); ++n) {
                w[0][n] = q[1][n] * X[2][n] - q[2][n] * X[1][n];
                w[1][n] = q[2][n] * X[0][n] - q[0][n] * X[2][n];
                w[2][n] = q[0][n] * X[1][n] - q[1][n] * X[0][n];
            }
            return DifferentialForm(FormGrade::one_form, std::move(w));
        }
        case FormGrade::density: {
            if (d == 2) {
                SpectralScalarField a(g), b(g);
                for (std::int64_t n = 0; n < a.size(); ++n) {
                    a[n] = -q[0][n] * X[1][n];
                    b[n] = q[0][n] * X[0][n];
                }
                return DifferentialForm(FormGrade::one_form,
                                        std::vector<SpectralScalarField>{a, b});
            }
            // i_X(D d^3x) = (D X).dS
            std::vector<SpectralScalarField> w(3, SpectralScalarField(g));
            for (int i = 0; i < 3; ++i) {
                for (std::int64_t n = 0; n < w[0].size(); ++n) w[i][n] = q[0][n] * X[i][n];
            }
            return DifferentialForm(FormGrade::two_form, std::move(w));
        }
    }
    throw InvalidArgument("interior_product: bad grade");
}

DifferentialForm lie_derivative(const VectorFieldOnGrid& X, const DifferentialForm& q) {
    require_same_grid(X.grid(), q.grid(), "lie_derivative");
    int d = q.dims();
    switch (q.grade()) {
        case FormGrade::scalar: {
            // i_X db
            SpectralScalarField s = directional(X, q[0]);
            return DifferentialForm(FormGrade::scalar, std::vector<SpectralScalarField>{s});
        }
        case FormGrade::one_form: {
            DifferentialForm t = exterior_derivative(interior_product(X, q));
            t += interior_product(X, exterior_derivative(q));
            return t;
        }
        case FormGrade::two_form: {
            DifferentialForm t = exterior_derivative(interior_product(X, q));
            if (d == 3) t += interior_product(X, exterior_derivative(q));
            return t;
        }
        case FormGrade::density: {
            // top grade: d i_X only; reassemble under the density label.
            DifferentialForm t = exterior_derivative(interior_product(X, q));
            std::vector<SpectralScalarField> w{t[0]};
            return DifferentialForm(FormGrade::density, std::move(w));
        }
    }
    throw InvalidArgument("lie_derivative: bad grade");
}

DifferentialForm lie_derivative_closed(const VectorFieldOnGrid& X, const DifferentialForm& q) {
    require_same_grid(X.grid(), q.grid(), "lie_derivative_closed");
    const PeriodicGrid& g = q.grid();
    int d = q.dims();
    SpectralScalarField divX = divergence(X);
    switch (q.grade()) {
        case FormGrade::scalar:
            return DifferentialForm(FormGrade::scalar,
                                    std::vector<SpectralScalarField>{directional(X, q[0])});
        case FormGrade::one_form: {
            std::vector<SpectralScalarField> w;
            w.reserve(static_cast<std::size_t>(d));
            std::vector<std::vector<SpectralScalarField>> dX;
            for (int i = 0; i < d; ++i) dX.push_back(gradient(X[i]));
            for (int j = 0; j < d; ++j) {
                SpectralScalarField t = directional(X, q[j]);
                for (int i = 0; i < d; ++i) {
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] += q[i][n] * dX[i][j][n];
                }
                w.push_back(std::move(t));
            }
            return DifferentialForm(FormGrade::one_form, std::move(w));
        }
        case FormGrade::two_form: {
            if (d == 2) {
                SpectralScalarField t = directional(X, q[0]);
                for (std::int64_t n = 0; n < t.size(); ++n) t[n] += q[0][n] * divX[n];
                return DifferentialForm(FormGrade::two_form,
                                        std::vector<SpectralScalarField>{t});
            }
            std::vector<SpectralScalarField> w;
            for (int j = 0; j < 3; ++j) {
                SpectralScalarField t = directional(X, q[j]);
                SpectralScalarField bgx(g);
                for (int i = 0; i < 3; ++i) {
                    SpectralScalarField dXj = partial_derivative(X[j], i);
                    for (std::int64_t n = 0; n < bgx.size(); ++n) bgx[n] += q[i][n] * dXj[n];
                }
                for (std::int64_t n = 0; n < t.size(); ++n)
                    t[n] += -bgx[n] + q[j][n] * divX[n];
                w.push_back(std::move(t));
            }
            return DifferentialForm(FormGrade::two_form, std::move(w));
        }
        case FormGrade::density: {
            SpectralScalarField t = directional(X, q[0]);
            for (std::int64_t n = 0; n < t.size(); ++n) t[n] += q[0][n] * divX[n];
            return DifferentialForm(FormGrade::density, std::vector<SpectralScalarField>{t});
        }
    }
    throw InvalidArgument("lie_derivative_closed: bad grade");
}

DualForm lie_derivative(const VectorFieldOnGrid& X, const DualForm& p) {
    require_same_grid(X.grid(), p.grid(), "lie_derivative(dual)");
    const PeriodicGrid& g = p.grid();
    int d = g.dims();
    SpectralScalarField divX = divergence(X);
    switch (p.primal_grade()) {
        case FormGrade::scalar: {
            // density weight: X.grad p + p div X
            SpectralScalarField t = directional(X, p[0]);
            for (std::int64_t n = 0; n < t.size(); ++n) t[n] += p[0][n] * divX[n];
            return DualForm(FormGrade::scalar, std::vector<SpectralScalarField>{t});
        }
        case FormGrade::one_form: {
            // vector density: (X.grad)m - (m.grad)X + m div X
            std::vector<SpectralScalarField> w;
            for (int j = 0; j < d; ++j) {
                SpectralScalarField t = directional(X, p[j]);
                SpectralScalarField mgx(g);
                for (int i = 0; i < d; ++i) {
                    SpectralScalarField dXj = partial_derivative(X[j], i);
                    for (std::int64_t n = 0; n < mgx.size(); ++n) mgx[n] += p[i][n] * dXj[n];
                }
                for (std::int64_t n = 0; n < t.size(); ++n)
                    t[n] += -mgx[n] + p[j][n] * divX[n];
                w.push_back(std::move(t));
            }
            return DualForm(FormGrade::one_form, std::move(w));
        }
        case FormGrade::two_form: {
            if (d == 2) {
                // scalar law
                return DualForm(FormGrade::two_form,
                                std::vector<SpectralScalarField>{directional(X, p[0])});
            }
            // covariant law: (X.grad)P_j + P_i d_j X_i
            std::vector<std::vector<SpectralScalarField>> dX;
            for (int i = 0; i < 3; ++i) dX.push_back(gradient(X[i]));
            std::vector<SpectralScalarField> w;
            for (int j = 0; j < 3; ++j) {
                SpectralScalarField t = directional(X, p[j]);
                for (int i = 0; i < 3; ++i) {
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] += p[i][n] * dX[i][j][n];
                }
                w.push_back(std::move(t));
            }
            return DualForm(FormGrade::two_form, std::move(w));
        }
        case FormGrade::density:
            return DualForm(FormGrade::density,
                            std::vector<SpectralScalarField>{directional(X, p[0])});
    }
    throw InvalidArgument("lie_derivative(dual): bad grade");
}

DualForm lie_derivative_transpose(const VectorFieldOnGrid& X, const DualForm& p) {
    DualForm t = lie_derivative(X, p);
    for (int c = 0; c < t.components(); ++c) t[c] *= -1.0;
    return t;
}

MomentumField lie_derivative(const VectorFieldOnGrid& X, const MomentumField& m) {
    require_same_grid(X.grid(), m.grid(), "lie_derivative(momentum)");
    const PeriodicGrid& g = m.grid();
    int d = g.dims();
    SpectralScalarField divX = divergence(X);
    std::vector<std::vector<SpectralScalarField>> dX;
    for (int i = 0; i < d; ++i) dX.push_back(gradient(X[i]));
    MomentumField out;
    for (int k = 0; k < d; ++k) {
        SpectralScalarField t = directional(X, m.comps[static_cast<std::size_t>(k)]);
        for (int j = 0; j < d; ++j) {
            const SpectralScalarField& mj = m.comps[static_cast<std::size_t>(j)];
            for (std::int64_t n = 0; n < t.size(); ++n) t[n] += mj[n] * dX[j][k][n];
        }
        const SpectralScalarField& mk = m.comps[static_cast<std::size_t>(k)];
        for (std::int64_t n = 0; n < t.size(); ++n) t[n] += mk[n] * divX[n];
        out.comps.push_back(std::move(t));
    }
    return out;
}

MomentumField diamond(const DualForm& p, const DifferentialForm& q) {
    require_same_grid(p.grid(), q.grid(), "diamond");
    if (p.primal_grade() != q.grade())
        throw InvalidArgument("diamond: dual grade does not match form grade");
    const PeriodicGrid& g = q.grid();
    int d = g.dims();
    MomentumField out;
    switch (q.grade()) {
        case FormGrade::scalar: {
            // -p grad b
            for (int j = 0; j < d; ++j) {
                SpectralScalarField db = partial_derivative(q[0], j);
                SpectralScalarField t(g);
                for (std::int64_t n = 0; n < t.size(); ++n) t[n] = -p[0][n] * db[n];
                out.comps.push_back(std::move(t));
            }
            return out;
        }
        case FormGrade::one_form: {
            // -m_k d_j A_k + (m.grad) A_j + A_j div m
            SpectralScalarField divm(g);
            for (int i = 0; i < d; ++i) divm += partial_derivative(p[i], i);
            for (int j = 0; j < d; ++j) {
                SpectralScalarField t(g);
                for (int k = 0; k < d; ++k) {
                    SpectralScalarField dA = partial_derivative(q[k], j);
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] -= p[k][n] * dA[n];
                }
                for (int i = 0; i < d; ++i) {
                    SpectralScalarField dA = partial_derivative(q[j], i);
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] += p[i][n] * dA[n];
                }
                for (std::int64_t n = 0; n < t.size(); ++n) t[n] += q[j][n] * divm[n];
                out.comps.push_back(std::move(t));
            }
            return out;
        }
        case FormGrade::two_form: {
            if (d == 2) {
                // b grad p
                for (int j = 0; j < 2; ++j) {
                    SpectralScalarField dp = partial_derivative(p[0], j);
                    SpectralScalarField t(g);
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] = q[0][n] * dp[n];
                    out.comps.push_back(std::move(t));
                }
                return out;
            }
            // B_k d_j P_k - (B.grad) P_j - P_j div B
            SpectralScalarField divB(g);
            for (int i = 0; i < 3; ++i) divB += partial_derivative(q[i], i);
            for (int j = 0; j < 3; ++j) {
                SpectralScalarField t(g);
                for (int k = 0; k < 3; ++k) {
                    SpectralScalarField dP = partial_derivative(p[k], j);
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] += q[k][n] * dP[n];
                }
                for (int i = 0; i < 3; ++i) {
                    SpectralScalarField dP = partial_derivative(p[j], i);
                    for (std::int64_t n = 0; n < t.size(); ++n) t[n] -= q[i][n] * dP[n];
                }
                for (std::int64_t n = 0; n < t.size(); ++n) t[n] -= p[j][n] * divB[n];
                out.comps.push_back(std::move(t));
            }
            return out;
        }
        case FormGrade::density: {
            // D grad p
            for (int j = 0; j < d; ++j) {
                SpectralScalarField dp = partial_derivative(p[0], j);
                SpectralScalarField t(g);
                for (std::int64_t n = 0; n < t.size(); ++n) t[n] = q[0][n] * dp[n];
                out.comps.push_back(std::move(t));
            }
            return out;
        }
    }
    throw InvalidArgument("diamond: bad grade");
}

DifferentialForm lie_dual(const VectorFieldOnGrid& xi, const DifferentialForm& q) {
    require_same_grid(xi.grid(), q.grid(), "lie_dual");
    if (q.grade() == FormGrade::scalar)
        return DifferentialForm(FormGrade::scalar, q.grid());
    return interior_product(xi, exterior_derivative(interior_product(xi, q)));
}

DifferentialForm lie_laplacian(const std::vector<VectorFieldOnGrid>& basis,
                               const DifferentialForm& q) {
    if (basis.empty()) throw InvalidArgument("lie_laplacian: empty basis");
    DifferentialForm acc(q.grade(), q.grid());
    for (const auto& xi : basis) acc += lie_derivative(xi, lie_derivative(xi, q));
    return acc;
}

double helicity(const DifferentialForm& v) {
    if (v.grade() != FormGrade::one_form || v.dims() != 3)
        throw InvalidArgument("helicity: needs a 3D one_form");
    DifferentialForm w = exterior_derivative(v);
    double h = 0.0;
    for (int i = 0; i < 3; ++i) h += inner_l2(v[i], w[i]);
    return h;
}

double check_lemma22(const DualForm& p, const DifferentialForm& q, const VectorFieldOnGrid& X,
                     int probes, std::uint64_t seed) {
    MomentumField t1 = diamond(lie_derivative_transpose(X, p), q);
    MomentumField t2 = diamond(p, lie_derivative(X, q));
    MomentumField t3 = lie_derivative(X, diamond(p, q));
    MomentumField resid;
    for (int c = 0; c < static_cast<int>(t1.comps.size()); ++c) {
        SpectralScalarField r = t1.comps[static_cast<std::size_t>(c)];
        r -= t2.comps[static_cast<std::size_t>(c)];
        r += t3.comps[static_cast<std::size_t>(c)];
        resid.comps.push_back(std::move(r));
    }
    double scale = norm_l2(t1) + norm_l2(t2) + norm_l2(t3);
    if (scale < 1e-300) scale = 1.0;
    double worst = norm_l2(resid) / scale;
    int kmax = std::max(2, q.grid().size(0) / 8);
    for (int t = 0; t < probes; ++t) {
        VectorFieldOnGrid eta =
            random_vector_field(q.grid(), comp_seed(seed, t), kmax, t % 2 == 0);
        double num = std::abs(pairing(resid, eta));
        double den = std::abs(pairing(t1, eta)) + std::abs(pairing(t2, eta)) +
                     std::abs(pairing(t3, eta));
        if (den < 1e-300) den = 1.0;
        worst = std::max(worst, num / den);
    }
    return worst;
}

double pairing(const DualForm& p, const DifferentialForm& q) {
    require_same_grid(p.grid(), q.grid(), "pairing");
    if (p.primal_grade() != q.grade())
        throw InvalidArgument("pairing: dual grade does not match form grade");
    double s = 0.0;
    for (int c = 0; c < p.components(); ++c) s += inner_l2(p[c], q[c]);
    return s;
}

double pairing(const MomentumField& m, const VectorFieldOnGrid& X) {
    require_same_grid(m.grid(), X.grid(), "pairing");
    double s = 0.0;
    for (int c = 0; c < m.dims(); ++c) s += inner_l2(m.comps[static_cast<std::size_t>(c)], X[c]);
    return s;
}

double norm_l2(const DifferentialForm& q) {
    double s = 0.0;
    for (int c = 0; c < q.components(); ++c) s += inner_l2(q[c], q[c]);
    return std::sqrt(s);
}

double norm_l2(const VectorFieldOnGrid& X) {
    double s = 0.0;
    for (int c = 0; c < X.dims(); ++c) s += inner_l2(X[c], X[c]);
    return std::sqrt(s);
}

double norm_l2(const MomentumField& m) {
    double s = 0.0;
    for (const auto& c : m.comps) s += inner_l2(c, c);
    return std::sqrt(s);
}

double max_abs(const DifferentialForm& q) {
    double s = 0.0;
    for (int c = 0; c < q.components(); ++c) s = std::max(s, q[c].max_abs());
    return s;
}

SpectralScalarField divergence(const VectorFieldOnGrid& X) {
    SpectralScalarField d(X.grid());
    for (int i = 0; i < X.dims(); ++i) d += partial_derivative(X[i], i);
    return d;
}

double max_divergence(const VectorFieldOnGrid& X) { return divergence(X).max_abs(); }

VectorFieldOnGrid leray_project(const VectorFieldOnGrid& X) {
    const PeriodicGrid& g = X.grid();
    int d = g.dims();
    std::vector<std::vector<Complex>> hat;
    for (int i = 0; i < d; ++i) hat.push_back(transform_forward(X[i]));
    for_each_mode(g, [&](std::int64_t idx, const std::array<int, 3>& k) {
        double kk = 0.0;
        std::array<double, 3> kp{0.0, 0.0, 0.0};
        for (int i = 0; i < d; ++i) {
            kp[static_cast<std::size_t>(i)] = k[static_cast<std::size_t>(i)] * g.k_scale(i);
            kk += kp[static_cast<std::size_t>(i)] * kp[static_cast<std::size_t>(i)];
        }
        if (kk == 0.0) return;
        Complex dot(0.0, 0.0);
        for (int i = 0; i < d; ++i)
            dot += kp[static_cast<std::size_t>(i)] * hat[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx)];
        for (int i = 0; i < d; ++i)
            hat[static_cast<std::size_t>(i)][static_cast<std::size_t>(idx)] -=
                kp[static_cast<std::size_t>(i)] * dot / kk;
    });
    std::vector<SpectralScalarField> comps;
    for (int i = 0; i < d; ++i) comps.push_back(transform_backward(g, hat[static_cast<std::size_t>(i)]));
    return VectorFieldOnGrid(std::move(comps));
}

VectorFieldOnGrid curl(const VectorFieldOnGrid& X) {
    if (X.dims() != 3) throw InvalidArgument("curl: needs a 3D vector field");
    std::vector<SpectralScalarField> w;
    w.push_back(partial_derivative(X[2], 1) - partial_derivative(X[1], 2));
    w.push_back(partial_derivative(X[0], 2) - partial_derivative(X[2], 0));
    w.push_back(partial_derivative(X[1], 0) - partial_derivative(X[0], 1));
    return VectorFieldOnGrid(std::move(w));
}

SpectralScalarField advect_scalar(const VectorFieldOnGrid& X, const SpectralScalarField& f) {
    require_same_grid(X.grid(), f.grid(), "advect_scalar");
    return directional(X, f);
}

VectorFieldOnGrid self_advection(const VectorFieldOnGrid& X) {
    std::vector<SpectralScalarField> w;
    for (int j = 0; j < X.dims(); ++j) w.push_back(directional(X, X[j]));
    return VectorFieldOnGrid(std::move(w));
}

VectorFieldOnGrid dealias(const VectorFieldOnGrid& X) {
    std::vector<SpectralScalarField> w;
    for (int i = 0; i < X.dims(); ++i) w.push_back(dealias(X[i]));
    return VectorFieldOnGrid(std::move(w));
}

DifferentialForm dealias(const DifferentialForm& q) {
    std::vector<SpectralScalarField> w;
    for (int c = 0; c < q.components(); ++c) w.push_back(dealias(q[c]));
    return DifferentialForm(q.grade(), std::move(w));
}

VectorFieldOnGrid random_vector_field(const PeriodicGrid& grid, std::uint64_t seed, int kmax,
                                      bool divergence_free) {
    std::vector<SpectralScalarField> comps;
    for (int i = 0; i < grid.dims(); ++i)
        comps.push_back(random_field(grid, comp_seed(seed, i), kmax));
    VectorFieldOnGrid X(std::move(comps));
    if (divergence_free) X = leray_project(X);
    return X;
}

DifferentialForm random_form(FormGrade grade, const PeriodicGrid& grid, std::uint64_t seed,
                             int kmax) {
    int count = component_count(grade, grid.dims());
    std::vector<SpectralScalarField> comps;
    for (int c = 0; c < count; ++c)
        comps.push_back(random_field(grid, comp_seed(seed, c + 17), kmax));
    return DifferentialForm(grade, std::move(comps));
}

DualForm random_dual_form(FormGrade primal, const PeriodicGrid& grid, std::uint64_t seed,
                          int kmax) {
    int count = component_count(primal, grid.dims());
    std::vector<SpectralScalarField> comps;
    for (int c = 0; c < count; ++c)
        comps.push_back(random_field(grid, comp_seed(seed, c + 41), kmax));
    return DualForm(primal, std::move(comps));
}

namespace {

std::string component_path(const std::string& prefix, int c) {
    return prefix + ".c" + std::to_string(c) + ".gfsf";
}

FormGrade grade_from_name(const std::string& name) {
    if (name == "scalar") return FormGrade::scalar;
    if (name == "one_form") return FormGrade::one_form;
    if (name == "two_form") return FormGrade::two_form;
    if (name == "density") return FormGrade::density;
    throw IoError("unknown form grade '" + name + "' in sidecar");
}

}  // namespace

void write_form(const std::string& prefix, const DifferentialForm& q) {
    for (int c = 0; c < q.components(); ++c) {
        nlohmann::json meta;
        meta["grade"] = grade_name(q.grade());
        meta["component"] = c;
        meta["components"] = q.components();
        write_field(component_path(prefix, c), q[c], meta);
    }
}

DifferentialForm read_form(const std::string& prefix) {
    nlohmann::json meta = read_sidecar(component_path(prefix, 0));
    if (!meta.contains("grade"))
        throw IoError("form sidecar missing grade: " + component_path(prefix, 0));
    FormGrade grade = grade_from_name(meta["grade"].get<std::string>());
    int count = meta.value("components", 1);
    std::vector<SpectralScalarField> comps;
    for (int c = 0; c < count; ++c) comps.push_back(read_field(component_path(prefix, c)));
    return DifferentialForm(grade, std::move(comps));
}

}  // namespace sgfd
