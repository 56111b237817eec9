#include "verify.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <string>
#include <thread>
#include <vector>

#include <unistd.h>

#include "config.hpp"
#include "field_io.hpp"
#include "forms.hpp"
#include "noise.hpp"
#include "pod.hpp"
#include "sqg.hpp"
#include "transport.hpp"
#include "verify_defaults.hpp"

namespace sgfd {

namespace {

using nlohmann::json;

constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------- plumbing

PeriodicGrid grid_from(const json& arr) {
    std::vector<int> shape;
    for (const auto& v : arr) shape.push_back(v.get<int>());
    return PeriodicGrid(shape);
}

void check_le(VerifyReport& rep, const std::string& suite, const std::string& property,
              double measured, double bound, const std::string& context) {
    VerifyCheck c;
    c.suite = suite;
    c.property = property;
    c.residual = measured;
    c.tolerance = bound;
    c.pass = measured <= bound;
    c.detail = "require measured <= tolerance; " + context;
    rep.checks.push_back(std::move(c));
}

void check_ge(VerifyReport& rep, const std::string& suite, const std::string& property,
              double measured, double bound, const std::string& context) {
    VerifyCheck c;
    c.suite = suite;
    c.property = property;
    c.residual = measured;
    c.tolerance = bound;
    c.pass = measured >= bound;
    c.detail = "require measured >= tolerance; " + context;
    rep.checks.push_back(std::move(c));
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_table(const std::string& dir, const std::string& name, const std::string& header,
                 const std::vector<std::string>& rows) {
    if (dir.empty()) return;
    std::ofstream out(std::filesystem::path(dir) / name);
    if (!out) throw IoError("cannot write " + name + " under " + dir);
    out << header << "\n";
    for (const auto& r : rows) out << r << "\n";
}

// Least-squares slope of log(err) against log(dt).
double fit_log_slope(const std::vector<double>& dts, const std::vector<double>& errs) {
    const std::size_t n = dts.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += std::log(dts[i]);
        my += std::log(std::max(errs[i], 1e-300));
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double dx = std::log(dts[i]) - mx;
        sxy += dx * (std::log(std::max(errs[i], 1e-300)) - my);
        sxx += dx * dx;
    }
    return sxy / sxx;
}

// Runs body(0..n-1) on a small pool; exceptions surface after all joined.
template <typename Body>
void parallel_for(std::size_t n, bool serial, Body&& body) {
    if (serial || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const unsigned hw = std::max(2u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(n, hw);
    std::atomic<std::size_t> next{0};
    std::vector<std::future<void>> futs;
    futs.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        futs.push_back(std::async(std::launch::async, [&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) body(i);
        }));
    }
    std::exception_ptr first;
    for (auto& f : futs) {
        try {
            f.get();
        } catch (...) {
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------- fixtures

SpectralScalarField field2(const PeriodicGrid& g, double (*fn)(double, double)) {
    return make_field(g, [fn](const std::array<double, 3>& x) { return fn(x[0], x[1]); });
}

VectorFieldOnGrid constant_vector(const PeriodicGrid& g, const std::vector<double>& vals) {
    std::vector<SpectralScalarField> comps;
    for (int a = 0; a < g.dims(); ++a) {
        comps.emplace_back(g, vals[static_cast<std::size_t>(a)]);
    }
    return VectorFieldOnGrid(std::move(comps));
}

VectorFieldOnGrid scaled(const VectorFieldOnGrid& X, double s) {
    std::vector<SpectralScalarField> comps;
    for (int c = 0; c < X.dims(); ++c) comps.push_back(s * X[c]);
    return VectorFieldOnGrid(std::move(comps));
}

DifferentialForm one_form_of(const VectorFieldOnGrid& u) {
    std::vector<SpectralScalarField> comps;
    for (int c = 0; c < u.dims(); ++c) comps.push_back(u[c]);
    return DifferentialForm(FormGrade::one_form, std::move(comps));
}

// u = (A sin x2 + C cos x1, B sin x0 + A cos x2, C sin x1 + B cos x0):
// divergence-free with curl u = u, helicity (A^2+B^2+C^2)(2 pi)^3.
VectorFieldOnGrid beltrami_field(const PeriodicGrid& g, double A, double B, double C) {
    std::vector<SpectralScalarField> comps;
    comps.push_back(make_field(g, [=](const std::array<double, 3>& x) {
        return A * std::sin(x[2]) + C * std::cos(x[1]);
    }));
    comps.push_back(make_field(g, [=](const std::array<double, 3>& x) {
        return B * std::sin(x[0]) + A * std::cos(x[2]);
    }));
    comps.push_back(make_field(g, [=](const std::array<double, 3>& x) {
        return C * std::sin(x[1]) + B * std::cos(x[0]);
    }));
    return VectorFieldOnGrid(std::move(comps));
}

FlowSpec noise_only(const PeriodicGrid& g, std::vector<VectorFieldOnGrid> xis) {
    FlowSpec flow;
    flow.drift = VectorFieldOnGrid(g);
    flow.noise = std::move(xis);
    return flow;
}

std::vector<double> path_row(const WienerPath& path, std::int64_t n, int K) {
    std::vector<double> dW(static_cast<std::size_t>(K));
    for (int j = 0; j < K; ++j) dW[static_cast<std::size_t>(j)] = path.increment(n, j);
    return dW;
}

double rel_diff(const DifferentialForm& a, const DifferentialForm& b) {
    double scale = std::max(norm_l2(a), norm_l2(b));
    if (scale < 1e-300) return 0.0;
    double num = 0.0;
    for (int c = 0; c < a.components(); ++c) {
        SpectralScalarField r = a[c] - b[c];
        num += inner_l2(r, r);
    }
    return std::sqrt(num) / scale;
}

double vec_inner(const VectorFieldOnGrid& a, const VectorFieldOnGrid& b) {
    double s = 0.0;
    for (int c = 0; c < a.dims(); ++c) s += inner_l2(a[c], b[c]);
    return s;
}

// --------------------------------------------------------------- operators

void run_operators(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    (void)serial;
    const std::string suite = "operators";
    const PeriodicGrid g2 = grid_from(s.at("grid2d"));
    const PeriodicGrid g3 = grid_from(s.at("grid3d"));
    const int trials = s.at("trials").get<int>();
    const double tol = s.at("residual_tol").get<double>();
    const double nil = s.at("nilpotency_tol").get<double>();
    const std::array<FormGrade, 4> grades{FormGrade::scalar, FormGrade::one_form,
                                          FormGrade::two_form, FormGrade::density};

    double worst_dd = 0.0, worst_cartan = 0.0, worst_adj = 0.0, worst_dia = 0.0,
           worst_lem = 0.0, worst_comm = 0.0;
    std::vector<std::string> rows;
    for (int t = 0; t < trials; ++t) {
        const bool is2d = t % 2 == 0;
        const PeriodicGrid& g = is2d ? g2 : g3;
        const int kmax = (is2d ? s.at("kmax2d") : s.at("kmax3d")).get<int>();
        const FormGrade grade = grades[static_cast<std::size_t>(t % 4)];
        const std::uint64_t seed = 52000 + 97 * static_cast<std::uint64_t>(t);

        VectorFieldOnGrid X = random_vector_field(g, seed, kmax, t % 3 == 0);
        DifferentialForm q = random_form(grade, g, seed + 1, kmax);
        DualForm p = random_dual_form(grade, g, seed + 2, kmax);
        DifferentialForm b = random_form(FormGrade::scalar, g, seed + 3, kmax);

        double dd = norm_l2(exterior_derivative(exterior_derivative(b))) /
                    (norm_l2(laplacian(b[0])) + 1e-300);
        if (g.dims() == 3) {
            DifferentialForm A = random_form(FormGrade::one_form, g, seed + 4, kmax);
            double sA = 0.0;
            for (int c = 0; c < 3; ++c) {
                SpectralScalarField l = laplacian(A[c]);
                sA += inner_l2(l, l);
            }
            dd = std::max(dd, norm_l2(exterior_derivative(exterior_derivative(A))) /
                                  (std::sqrt(sA) + 1e-300));
        }

        double cartan = rel_diff(lie_derivative(X, q), lie_derivative_closed(X, q));

        double lhs = pairing(lie_derivative_transpose(X, p), q);
        double rhs = pairing(p, lie_derivative(X, q));
        double adj = std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + norm_l2(q) + 1.0);

        MomentumField m = diamond(p, q);
        double dia = 0.0;
        for (int pr = 0; pr < 2; ++pr) {
            VectorFieldOnGrid Y =
                random_vector_field(g, seed + 10 + static_cast<std::uint64_t>(pr), kmax, pr == 0);
            double l2 = pairing(m, Y);
            double r2 = -pairing(p, lie_derivative(Y, q));
            dia = std::max(dia, std::abs(l2 - r2) / (norm_l2(m) * norm_l2(Y) + 1e-300));
        }

        double lem = check_lemma22(p, q, X, 3, seed + 20);

        std::vector<VectorFieldOnGrid> basis{X, random_vector_field(g, seed + 30, kmax, true)};
        double comm = rel_diff(exterior_derivative(lie_laplacian(basis, b)),
                               lie_laplacian(basis, exterior_derivative(b)));
        if (g.dims() == 3) {
            DifferentialForm A2 = random_form(FormGrade::one_form, g, seed + 31, kmax);
            comm = std::max(comm, rel_diff(exterior_derivative(lie_laplacian(basis, A2)),
                                           lie_laplacian(basis, exterior_derivative(A2))));
        }

        worst_dd = std::max(worst_dd, dd);
        worst_cartan = std::max(worst_cartan, cartan);
        worst_adj = std::max(worst_adj, adj);
        worst_dia = std::max(worst_dia, dia);
        worst_lem = std::max(worst_lem, lem);
        worst_comm = std::max(worst_comm, comm);
        rows.push_back(std::to_string(t) + "," + std::to_string(g.dims()) + "," +
                       std::to_string(t % 4) + "," + fmt(dd) + "," + fmt(cartan) + "," +
                       fmt(adj) + "," + fmt(dia) + "," + fmt(lem) + "," + fmt(comm));
    }
    write_table(dir, "operators_trials.csv",
                "trial,dims,grade,nilpotency,cartan_vs_closed,adjointness,diamond,pairing,"
                "lie_laplacian_d",
                rows);

    const std::string over = "max over " + std::to_string(trials) + " random trials";
    check_le(rep, suite, "exterior_nilpotency", worst_dd, nil, over);
    check_le(rep, suite, "lie_cartan_vs_closed", worst_cartan, tol, over);
    check_le(rep, suite, "transpose_adjointness", worst_adj, tol, over);
    check_le(rep, suite, "diamond_duality", worst_dia, tol, over);
    check_le(rep, suite, "pairing_identity", worst_lem, tol, over);
    check_le(rep, suite, "lie_laplacian_commutes_d", worst_comm, tol, over);

    double worst_metric = 0.0;
    for (const PeriodicGrid& g : {g2, g3}) {
        std::vector<VectorFieldOnGrid> frame;
        for (int i = 0; i < g.dims(); ++i) {
            std::vector<double> v(static_cast<std::size_t>(g.dims()), 0.0);
            v[static_cast<std::size_t>(i)] = 1.0;
            frame.push_back(constant_vector(g, v));
        }
        const int kmax = (g.dims() == 2 ? s.at("kmax2d") : s.at("kmax3d")).get<int>();
        DifferentialForm f =
            random_form(FormGrade::scalar, g, 53000 + static_cast<std::uint64_t>(g.dims()), kmax);
        DifferentialForm lie = lie_laplacian(frame, f);
        SpectralScalarField lap = laplacian(f[0]);
        worst_metric =
            std::max(worst_metric, norm_l2(lie[0] - lap) / (norm_l2(lap) + 1e-300));
    }
    check_le(rep, suite, "metric_laplacian_reduction", worst_metric,
             s.at("metric_laplacian_rel_tol").get<double>(),
             "constant coordinate frame on scalars, 2-d and 3-d");

    const json& cv = s.at("covariation");
    WienerPath path = sample_increments(cv.at("seed").get<std::uint64_t>(), cv.at("K").get<int>(),
                                        cv.at("dt").get<double>(), cv.at("N").get<std::int64_t>());
    const int K = path.K;
    const double T = path.horizon();
    std::vector<double> c = estimate_covariation(path);
    const double band = cv.at("stat_factor").get<double>() * T *
                        std::sqrt(2.0 / static_cast<double>(path.N));
    double worst_cov = 0.0;
    std::vector<std::string> cov_rows;
    for (int i = 0; i < K; ++i) {
        for (int j = 0; j < K; ++j) {
            double want = i == j ? T : 0.0;
            double got = c[static_cast<std::size_t>(i * K + j)];
            worst_cov = std::max(worst_cov, std::abs(got - want));
            cov_rows.push_back(std::to_string(i) + "," + std::to_string(j) + "," + fmt(got) +
                               "," + fmt(want));
        }
    }
    write_table(dir, "covariation.csv", "i,j,estimate,expected", cov_rows);
    check_le(rep, suite, "covariation_identity", worst_cov, band,
             "max |C_ij - delta_ij T|, statistical band 4 T sqrt(2/N)");

    // Frozen output of the documented generator at these settings; any
    // change to the increment stream is a breaking change.
    static const std::array<double, 9> kPinned{
        0.99976197947118306,    -0.0002401158056779703, 0.0028973364915953377,
        -0.0002401158056779703, 1.0005052049197616,     -0.0019016801102310133,
        0.0028973364915953377,  -0.0019016801102310133, 1.0032685332657085};
    double regress = 0.0;
    for (std::size_t i = 0; i < kPinned.size(); ++i) {
        regress = std::max(regress, std::abs(c[i] - kPinned[i]));
    }
    check_le(rep, suite, "covariation_regression", regress,
             cv.at("regression_tol").get<double>(), "byte-exact pin of the seeded estimate");
}

// --------------------------------------------------------------- strat-ito

void run_strat_ito(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    const std::string suite = "strat-ito";
    const PeriodicGrid g = grid_from(s.at("grid"));
    const int K = s.at("K").get<int>();
    const double T = s.at("T").get<double>();
    const std::uint64_t seed = s.at("seed").get<std::uint64_t>();
    SQGParams params;
    params.F = s.at("F").get<double>();
    params.beta = s.at("beta").get<double>();
    const double amp = s.at("noise_amplitude").get<double>();

    SpectralScalarField mu0 = dealias(random_field(g, seed, 5));
    std::vector<SpectralScalarField> streams;
    for (int j = 0; j < K; ++j) {
        double a = amp * (j == 0 ? 1.0 : 0.75);
        streams.push_back(a * dealias(random_field(g, seed + 1 + static_cast<std::uint64_t>(j), 3)));
    }

    std::vector<double> dts;
    for (const auto& v : s.at("dts")) dts.push_back(v.get<double>());
    const double dt_fine = dts.back();
    const std::int64_t n_fine = std::llround(T / dt_fine);
    WienerPath fine = sample_increments(seed, K, dt_fine, n_fine);

    std::vector<double> err_cor(dts.size()), err_unc(dts.size());
    parallel_for(dts.size(), serial, [&](std::size_t i) {
        const double dt = dts[i];
        const std::int64_t factor = std::llround(dt / dt_fine);
        if (std::abs(static_cast<double>(factor) * dt_fine - dt) > 1e-12 * dt) {
            throw ConfigError("strat_ito dts must be integer multiples of the finest dt");
        }
        WienerPath path = fine.coarsen(factor);
        SQGState strat{mu0, 0.0}, ito{mu0, 0.0}, unc{mu0, 0.0};
        for (std::int64_t n = 0; n < path.N; ++n) {
            std::vector<double> dW = path_row(path, n, K);
            strat = strat_step(strat, params, streams, dW, path.dt);
            ito = ito_step(ito, params, streams, dW, path.dt);
            unc = ito_uncorrected_step(unc, params, streams, dW, path.dt);
        }
        const double scale = norm_l2(strat.mu);
        err_cor[i] = norm_l2(strat.mu - ito.mu) / scale;
        err_unc[i] = norm_l2(strat.mu - unc.mu) / scale;
    });

    std::vector<std::string> rows;
    for (std::size_t i = 0; i < dts.size(); ++i) {
        rows.push_back(fmt(dts[i]) + "," + fmt(err_cor[i]) + "," + fmt(err_unc[i]));
    }
    write_table(dir, "strat_ito_convergence.csv", "dt,err_corrected,err_uncorrected", rows);

    check_ge(rep, suite, "corrected_strong_slope", fit_log_slope(dts, err_cor),
             s.at("corrected_slope_min").get<double>(),
             "log-log slope of |heun - corrected_em| over the dt ladder");
    check_le(rep, suite, "uncorrected_slope", fit_log_slope(dts, err_unc),
             s.at("uncorrected_slope_max").get<double>(),
             "log-log slope of |heun - plain_em|: the gap must not converge");
    check_ge(rep, suite, "uncorrected_gap", err_unc.back(),
             s.at("uncorrected_gap_min_rel").get<double>(),
             "relative gap of the uncorrected run at the finest dt");
}

// ---------------------------------------------------------------- casimirs

void run_casimirs(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    const std::string suite = "casimirs";
    const PeriodicGrid g = grid_from(s.at("grid"));
    const double T = s.at("T").get<double>();
    const double dt_coarse = s.at("dt_coarse").get<double>();
    const int K = s.at("K").get<int>();
    SQGParams params;
    params.F = s.at("F").get<double>();
    const double a_mu = s.at("mu0_amplitude").get<double>();
    const double amp = s.at("noise_amplitude").get<double>();

    // zero-mean profile with a genuinely nonzero cubic invariant
    SpectralScalarField mu0 = make_field(g, [a_mu](const std::array<double, 3>& x) {
        return a_mu * (std::cos(x[0]) + std::cos(x[1]) + std::cos(x[0] + x[1]));
    });
    mu0 += 0.3 * a_mu * dealias(random_field(g, 2027, 4));
    mu0 = dealias(mu0);
    std::vector<SpectralScalarField> streams = {amp * dealias(random_field(g, 7001, 3)),
                                                0.75 * amp * dealias(random_field(g, 7002, 3))};

    const CasimirSpec c2{2, {}, {}};
    const CasimirSpec c3{3, {}, {}};
    std::vector<std::uint64_t> seeds;
    for (const auto& v : s.at("seeds")) seeds.push_back(v.get<std::uint64_t>());

    struct DriftPair {
        double q2 = 0.0, q3 = 0.0, mean = 0.0;
    };
    auto drift_of = [&](const WienerPath& path) {
        SQGState st{mu0, 0.0};
        const double q2_0 = casimir(st, params, c2);
        const double q3_0 = casimir(st, params, c3);
        DriftPair out;
        for (std::int64_t n = 0; n < path.N; ++n) {
            st = strat_step(st, params, streams, path_row(path, n, K), path.dt);
            out.q2 = std::max(out.q2, std::abs(casimir(st, params, c2) - q2_0));
            out.q3 = std::max(out.q3, std::abs(casimir(st, params, c3) - q3_0));
            out.mean = std::max(out.mean, std::abs(st.mu.mean()));
        }
        return out;
    };

    std::vector<DriftPair> coarse(seeds.size()), fine(seeds.size());
    parallel_for(seeds.size(), serial, [&](std::size_t i) {
        WienerPath fp =
            sample_increments(seeds[i], K, dt_coarse / 2.0, std::llround(2.0 * T / dt_coarse));
        coarse[i] = drift_of(fp.coarsen(2));
        fine[i] = drift_of(fp);
    });

    // The cubic drift carries a mean-zero random-walk component on top of
    // the coherent truncation error, so single-path halving ratios are
    // noisy; the seed-averaged drift concentrates and halves cleanly.
    double sum2f = 0.0, sum2c = 0.0, sum3f = 0.0, sum3c = 0.0;
    double abs2 = 0.0, abs3 = 0.0, worst_mean = 0.0;
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        sum2f += fine[i].q2;
        sum2c += coarse[i].q2;
        sum3f += fine[i].q3;
        sum3c += coarse[i].q3;
        abs2 = std::max(abs2, fine[i].q2);
        abs3 = std::max(abs3, fine[i].q3);
        worst_mean = std::max({worst_mean, fine[i].mean, coarse[i].mean});
        rows.push_back(std::to_string(seeds[i]) + "," + fmt(dt_coarse) + "," +
                       fmt(coarse[i].q2) + "," + fmt(coarse[i].q3));
        rows.push_back(std::to_string(seeds[i]) + "," + fmt(dt_coarse / 2.0) + "," +
                       fmt(fine[i].q2) + "," + fmt(fine[i].q3));
    }
    write_table(dir, "casimir_drift.csv", "seed,dt,drift_q2,drift_q3", rows);

    const double ratio_max = s.at("ratio_max").get<double>();
    const double abs_max = s.at("abs_drift_max").get<double>();
    check_le(rep, suite, "q2_drift_ratio", sum2f / sum2c, ratio_max,
             "fine/coarse ratio of the seed-averaged pathwise drift");
    check_le(rep, suite, "q3_drift_ratio", sum3f / sum3c, ratio_max,
             "fine/coarse ratio of the seed-averaged pathwise drift");
    check_le(rep, suite, "q2_abs_drift_fine", abs2, abs_max, "absolute drift at the finest dt");
    check_le(rep, suite, "q3_abs_drift_fine", abs3, abs_max, "absolute drift at the finest dt");
    check_le(rep, suite, "mean_preservation", worst_mean, s.at("mean_mu_tol").get<double>(),
             "max |mean(mu)| along every stochastic run");

    // deterministic reference at higher resolution
    {
        const json& d = s.at("deterministic");
        const PeriodicGrid gd = grid_from(d.at("grid"));
        const double dt = d.at("dt").get<double>();
        const double Td = d.at("T").get<double>();
        SpectralScalarField md = dealias(random_field(gd, 909, 6));
        SQGParams pd;
        pd.F = params.F;

        auto integrate = [&](double step) {
            SQGState st{md, 0.0};
            const std::int64_t n = std::llround(Td / step);
            double h0 = energy(st, pd);
            double q20 = casimir(st, pd, c2);
            double q30 = casimir(st, pd, c3);
            double dh = 0.0, dq2 = 0.0, dq3 = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                st = deterministic_step(st, pd, step);
                dh = std::max(dh, std::abs(energy(st, pd) - h0) / std::abs(h0));
                dq2 = std::max(dq2, std::abs(casimir(st, pd, c2) - q20) / std::abs(q20));
                dq3 = std::max(dq3, std::abs(casimir(st, pd, c3) - q30) / std::abs(q30));
            }
            return std::tuple<SpectralScalarField, double, double, double>{st.mu, dh, dq2, dq3};
        };

        std::array<SpectralScalarField, 3> finals{SpectralScalarField(gd),
                                                  SpectralScalarField(gd),
                                                  SpectralScalarField(gd)};
        double dh = 0.0, dq2 = 0.0, dq3 = 0.0;
        parallel_for(3, serial, [&](std::size_t i) {
            const double step = dt / static_cast<double>(1 << (i == 2 ? 3 : i));
            auto [mu, a, b, c] = integrate(step);
            finals[i] = mu;
            if (i == 0) {
                dh = a;
                dq2 = b;
                dq3 = c;
            }
        });
        const double tolr = d.at("rel_drift_max").get<double>();
        check_le(rep, suite, "det_energy_drift", dh, tolr, "relative, coarse dt");
        check_le(rep, suite, "det_q2_drift", dq2, tolr, "relative, coarse dt");
        check_le(rep, suite, "det_q3_drift", dq3, tolr, "relative, coarse dt");
        const double e1 = norm_l2(finals[0] - finals[2]);
        const double e2 = norm_l2(finals[1] - finals[2]);
        check_ge(rep, suite, "det_order_ratio", e1 / e2, d.at("order_ratio_min").get<double>(),
                 "state error ratio dt vs dt/2 against a dt/8 reference");
        write_table(dir, "casimir_deterministic.csv", "dt,energy_drift,q2_drift,q3_drift",
                    {fmt(dt) + "," + fmt(dh) + "," + fmt(dq2) + "," + fmt(dq3)});
    }

    // linear wave dispersion regression
    {
        const json& r = s.at("rossby");
        const PeriodicGrid gr = grid_from(r.at("grid"));
        const double eps = r.at("eps").get<double>();
        const double dt = r.at("dt").get<double>();
        const double Tr = r.at("T").get<double>();
        SpectralScalarField w0 = make_field(gr, [eps](const std::array<double, 3>& x) {
            return eps * std::cos(x[0] + x[1]);
        });
        SpectralScalarField ck = make_field(gr, [](const std::array<double, 3>& x) {
            return std::cos(x[0] + x[1]);
        });
        SpectralScalarField sk = make_field(gr, [](const std::array<double, 3>& x) {
            return std::sin(x[0] + x[1]);
        });
        double worst_freq = 0.0, worst_amp = 0.0;
        std::vector<std::string> rrows;
        for (const auto& fv : r.at("F_values")) {
            SQGParams pr;
            pr.beta = r.at("beta").get<double>();
            pr.F = fv.get<double>();
            SQGState st{w0, 0.0};
            const std::int64_t n = std::llround(Tr / dt);
            for (std::int64_t i = 0; i < n; ++i) st = deterministic_step(st, pr, dt);
            const double a = inner_l2(st.mu, ck);
            const double b = inner_l2(st.mu, sk);
            const double want = -pr.beta * 1.0 / (2.0 + pr.F);
            const double got = std::atan2(b, a) / Tr;
            worst_freq = std::max(worst_freq, std::abs(got - want) / std::abs(want));
            const double half_area = 0.5 * kTwoPi * kTwoPi;
            worst_amp = std::max(worst_amp, std::abs(std::hypot(a, b) / half_area - eps) / eps);
            rrows.push_back(fmt(pr.F) + "," + fmt(got) + "," + fmt(want));
        }
        write_table(dir, "rossby.csv", "F,omega_measured,omega_expected", rrows);
        check_le(rep, suite, "rossby_frequency", worst_freq,
                 r.at("rel_freq_err_max").get<double>(),
                 "phase-slope frequency of the (1,1) mode against -beta k1/(|k|^2+F)");
        check_le(rep, suite, "rossby_amplitude", worst_amp,
                 r.at("amplitude_rel_tol").get<double>(),
                 "the traveling wave keeps its projected amplitude");
    }
}

// ------------------------------------------------------------------ kelvin

void run_kelvin(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    const std::string suite = "kelvin";
    const PeriodicGrid g = grid_from(s.at("grid"));
    const int P = s.at("vertices").get<int>();
    const double T = s.at("T").get<double>();
    const double dt_ref = s.at("dt_ref").get<double>();
    const std::uint64_t seed = s.at("seed").get<std::uint64_t>();
    const double xiscale = s.at("noise_scale").get<double>();

    DifferentialForm v0 = one_form_of(VectorFieldOnGrid(
        {field2(g, [](double, double y) { return -std::sin(y); }),
         field2(g, [](double x, double) { return 0.3 * std::sin(x); })}));
    MaterialLoop loop = make_circle_loop(g, {kPi + 0.3, kPi - 0.2, 0.0}, 0.7, P);
    VectorFieldOnGrid xi1 = perp_gradient(make_field(g, [=](const std::array<double, 3>& x) {
        return xiscale * (0.35 * std::sin(x[0]) * std::sin(x[1]) +
                          0.2 * std::cos(2.0 * x[0]) * std::sin(x[1]));
    }));
    VectorFieldOnGrid xi2 = perp_gradient(make_field(g, [=](const std::array<double, 3>& x) {
        return xiscale * 0.25 * std::cos(x[0]) * std::sin(2.0 * x[1]);
    }));
    FlowSpec flow = noise_only(g, {xi1, xi2});

    std::vector<double> strat_dts;
    for (const auto& v : s.at("strat_dts")) strat_dts.push_back(v.get<double>());
    WienerPath fine = sample_increments(seed, 2, dt_ref, std::llround(T / dt_ref));

    std::vector<double> strat_drift(strat_dts.size());
    KelvinReport det, cxs, cxi, cor, unc;
    std::vector<std::function<void()>> legs;

    legs.emplace_back([&]() {
        // steady shear holds the circulation while forcing resamples
        FlowSpec shear;
        shear.drift = VectorFieldOnGrid(
            {field2(g, [](double, double y) { return 2.0 * std::sin(y); }),
             SpectralScalarField(g)});
        const double dt = s.at("det_dt").get<double>();
        const double Td = s.at("det_T").get<double>();
        WienerPath dummy = sample_increments(1, 1, dt, std::llround(Td / dt));
        det = kelvin_check(v0, shear, dummy, Td, loop, TransportScheme::stratonovich);
    });
    legs.emplace_back([&]() {
        // translation-invariant pair: exact for both integrators
        DifferentialForm va = one_form_of(VectorFieldOnGrid(
            {field2(g, [](double, double y) { return -std::sin(y); }), SpectralScalarField(g)}));
        FlowSpec cflow = noise_only(g, {constant_vector(g, {0.8, 0.0})});
        WienerPath cpath = sample_increments(2, 1, 1e-3, 50);
        cxs = kelvin_check(va, cflow, cpath, 0.05, loop, TransportScheme::stratonovich);
        cxi = kelvin_check(va, cflow, cpath, 0.05, loop, TransportScheme::ito);
    });
    for (std::size_t i = 0; i < strat_dts.size(); ++i) {
        legs.emplace_back([&, i]() {
            const std::int64_t f = std::llround(strat_dts[i] / dt_ref);
            WienerPath path = f == 1 ? fine : fine.coarsen(f);
            strat_drift[i] =
                kelvin_check(v0, flow, path, T, loop, TransportScheme::stratonovich)
                    .max_rel_drift;
        });
    }
    legs.emplace_back(
        [&]() { cor = kelvin_check(v0, flow, fine, T, loop, TransportScheme::ito); });
    legs.emplace_back(
        [&]() { unc = kelvin_check(v0, flow, fine, T, loop, TransportScheme::ito_uncorrected); });
    parallel_for(legs.size(), serial, [&](std::size_t i) { legs[i](); });

    check_le(rep, suite, "det_shear_drift", det.max_rel_drift,
             s.at("deterministic_drift_max").get<double>(),
             "smooth shear, includes arc-length resampling events");
    check_ge(rep, suite, "det_shear_resamples", static_cast<double>(det.resample_count),
             s.at("det_min_resamples").get<double>(),
             "the shear leg must actually exercise resampling");
    check_le(rep, suite, "constant_xi_drift", std::max(cxs.max_rel_drift, cxi.max_rel_drift),
             s.at("constant_xi_drift_max").get<double>(),
             "rigid translation: both schemes exact");
    check_le(rep, suite, "strat_drift_ref", strat_drift.back(),
             s.at("strat_drift_max").get<double>(), "pathwise drift at the reference dt");
    check_ge(rep, suite, "strat_slope", fit_log_slope(strat_dts, strat_drift),
             s.at("strat_slope_min").get<double>(), "drift order across the dt ladder");

    const double rel_change = std::abs(cor.realized_change) /
                              std::max(std::abs(cor.initial_circulation), 1e-300);
    check_ge(rep, suite, "ito_rel_change", rel_change,
             s.at("ito_min_rel_change").get<double>(),
             "the mismatched pair must move the loop integral by O(1)");
    check_le(rep, suite, "ito_covariation_match",
             std::abs(cor.realized_change - cor.predicted_change),
             s.at("ito_match_rel_tol").get<double>() * std::abs(cor.predicted_change),
             "realized change against the covariation-drift quadrature");
    check_le(rep, suite, "ito_double_lie_decomposition",
             std::abs((cor.realized_change - unc.realized_change) - cor.double_lie_change),
             s.at("decomposition_rel_tol").get<double>() * std::abs(cor.double_lie_change),
             "corrected minus uncorrected field run against the double-Lie quadrature");

    std::vector<std::string> conv;
    for (std::size_t i = 0; i < strat_dts.size(); ++i) {
        conv.push_back(fmt(strat_dts[i]) + "," + fmt(strat_drift[i]));
    }
    write_table(dir, "kelvin_convergence.csv", "dt,strat_drift", conv);
    std::vector<std::string> series;
    for (std::size_t n = 0; n < cor.times.size(); ++n) {
        series.push_back(fmt(cor.times[n]) + "," + fmt(cor.circulations[n]) + "," +
                         fmt(unc.circulations[n]));
    }
    write_table(dir, "kelvin_circulations.csv", "time,circulation_ito,circulation_uncorrected",
                series);
}

// ---------------------------------------------------------------- helicity

void run_helicity(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    const std::string suite = "helicity";
    const PeriodicGrid g = grid_from(s.at("grid"));
    const double T = s.at("T").get<double>();
    const double dt_ref = s.at("dt_ref").get<double>();
    const double dt_ito = s.at("dt_ito").get<double>();
    const std::uint64_t seed = s.at("seed").get<std::uint64_t>();

    DifferentialForm abc = one_form_of(beltrami_field(g, 1.0, 1.0, 1.0));
    FlowSpec flow;
    flow.drift = scaled(random_vector_field(g, 4, 2, true), 0.25);
    flow.noise = {scaled(random_vector_field(g, 9, 2, true), 0.45)};

    HelicityReport strat_c, strat_f, unc, cor, grad;
    std::array<HelicityReport, 3> flat_runs;
    std::vector<std::function<void()>> legs;

    legs.emplace_back([&]() {
        WienerPath fine =
            sample_increments(seed, 1, dt_ref / 2.0, std::llround(2.0 * T / dt_ref));
        strat_f = helicity_check(abc, flow, fine, T, TransportScheme::stratonovich);
        strat_c = helicity_check(abc, flow, fine.coarsen(2), T, TransportScheme::stratonovich);
    });
    legs.emplace_back([&]() {
        // x0-independent field pushed along x0: rigid translation
        DifferentialForm flat = one_form_of(beltrami_field(g, 1.0, 0.0, 1.0));
        FlowSpec cflow = noise_only(g, {constant_vector(g, {0.9, 0.0, 0.0})});
        WienerPath path = sample_increments(seed + 1, 1, 1e-3, 50);
        const std::array<TransportScheme, 3> schemes{TransportScheme::stratonovich,
                                                     TransportScheme::ito,
                                                     TransportScheme::ito_uncorrected};
        for (std::size_t i = 0; i < schemes.size(); ++i) {
            flat_runs[i] = helicity_check(flat, cflow, path, 0.05, schemes[i]);
        }
    });
    legs.emplace_back([&]() {
        DifferentialForm closed = exterior_derivative(
            DifferentialForm(FormGrade::scalar, {make_field(g, [](const std::array<double, 3>& x) {
                                 return std::sin(x[0]) + std::cos(x[1]) * std::sin(x[2]);
                             })}));
        WienerPath path = sample_increments(seed + 2, 1, 1e-3, 10);
        grad = helicity_check(closed, flow, path, 0.01, TransportScheme::stratonovich);
    });
    legs.emplace_back([&]() {
        WienerPath path = sample_increments(seed, 1, dt_ito, std::llround(T / dt_ito));
        unc = helicity_check(abc, flow, path, T, TransportScheme::ito_uncorrected);
        cor = helicity_check(abc, flow, path, T, TransportScheme::ito);
    });
    parallel_for(legs.size(), serial, [&](std::size_t i) { legs[i](); });

    check_le(rep, suite, "strat_drift", strat_c.max_rel_drift,
             s.at("strat_rel_drift_max").get<double>(), "relative drift at the reference dt");
    check_le(rep, suite, "strat_refinement", strat_f.max_rel_drift,
             std::max(s.at("refinement_factor_max").get<double>() * strat_c.max_rel_drift,
                      s.at("refinement_floor").get<double>()),
             "halving dt shrinks the drift or both sit at the round-off floor");
    double flat_worst = 0.0;
    for (const auto& r : flat_runs) flat_worst = std::max(flat_worst, r.max_rel_drift);
    check_le(rep, suite, "constant_xi_drift", flat_worst,
             s.at("constant_xi_rel_drift_max").get<double>(),
             "rigid translation: every scheme exact");
    double grad_worst = 0.0;
    for (double h : grad.helicities) grad_worst = std::max(grad_worst, std::abs(h));
    check_le(rep, suite, "gradient_flat", grad_worst, s.at("gradient_tol").get<double>(),
             "an exact one-form carries no helicity along the run");

    check_ge(rep, suite, "ito_signal",
             std::abs(unc.predicted_change) / std::abs(unc.initial), 1e-6,
             "the uncorrected run's predicted deviation must be resolvable");
    check_le(rep, suite, "ito_quadrature_match",
             std::abs(unc.realized_change - unc.predicted_change),
             s.at("ito_match_rel_tol").get<double>() * std::abs(unc.predicted_change),
             "raw deviation against the double-Lie pairing quadrature");
    check_le(rep, suite, "ito_decomposition",
             std::abs((unc.realized_change - cor.realized_change) - unc.predicted_change),
             s.at("decomposition_rel_tol").get<double>() * std::abs(unc.predicted_change),
             "uncorrected minus corrected on one path cancels the shared fluctuation");

    std::vector<std::string> srows;
    for (std::size_t n = 0; n < strat_c.times.size(); ++n) {
        srows.push_back(fmt(strat_c.times[n]) + "," + fmt(strat_c.helicities[n]));
    }
    write_table(dir, "helicity_strat.csv", "time,helicity", srows);
    std::vector<std::string> irows;
    for (std::size_t n = 0; n < unc.times.size(); ++n) {
        irows.push_back(fmt(unc.times[n]) + "," + fmt(unc.helicities[n]) + "," +
                        fmt(cor.helicities[n]));
    }
    write_table(dir, "helicity_ito.csv", "time,helicity_uncorrected,helicity_corrected", irows);
}

// ---------------------------------------------------------------- pv-paths

void run_pv_paths(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    const std::string suite = "pv-paths";
    const PeriodicGrid g = grid_from(s.at("grid"));
    TracerEnsemble tracers =
        make_tracer_ensemble(g, s.at("tracers").get<int>(), s.at("tracer_seed").get<std::uint64_t>());
    SQGParams params;
    params.F = s.at("F").get<double>();
    params.beta = s.at("beta").get<double>();
    params.f0 = s.at("f0").get<double>();
    SpectralScalarField mu0 = s.at("mu0_amplitude").get<double>() * random_field(g, 42, 4);
    SpectralScalarField s1 = make_field(g, [](const std::array<double, 3>& x) {
        return 0.5 * std::sin(x[0]) * std::sin(x[1]);
    });
    SpectralScalarField s2 = make_field(g, [](const std::array<double, 3>& x) {
        return 0.35 * std::cos(2.0 * x[0]) * std::cos(x[1]);
    });

    // deterministic transport: carried values stay on characteristics
    {
        const json& d = s.at("deterministic");
        WienerPath path = sample_increments(11, 1, d.at("dt").get<double>(),
                                            std::llround(d.at("T").get<double>() /
                                                         d.at("dt").get<double>()));
        PVReport det = pv_along_paths(mu0, params, {}, path, d.at("T").get<double>(), tracers,
                                      TransportScheme::stratonovich);
        check_le(rep, suite, "deterministic_dq", det.max_abs_change,
                 d.at("dq_max").get<double>(), "no noise: tracers ride the exact flow");
    }

    // pathwise convergence of the consistent pair
    {
        const json& c = s.at("strat");
        const double dtf = c.at("dt_fine").get<double>();
        const double Tc = c.at("T").get<double>();
        WienerPath fine = sample_increments(c.at("seed").get<std::uint64_t>(), 1, dtf,
                                            std::llround(Tc / dtf));
        std::array<double, 2> drift{};
        parallel_for(2, serial, [&](std::size_t i) {
            WienerPath path = i == 0 ? fine.coarsen(2) : fine;
            drift[i] = pv_along_paths(mu0, params, {s1}, path, Tc, tracers,
                                      TransportScheme::stratonovich)
                           .max_abs_change;
        });
        check_le(rep, suite, "strat_ratio", drift[1] / drift[0],
                 c.at("ratio_max").get<double>(), "max |dQ| at dt/2 over max |dQ| at dt");
    }

    // ensemble drift of the mismatched pair, against both quadratures
    {
        const json& e = s.at("ito");
        const double dt = e.at("dt").get<double>();
        const double Te = e.at("T").get<double>();
        const int R = e.at("realizations").get<int>();
        const std::uint64_t base = e.at("base_seed").get<std::uint64_t>();
        const std::uint64_t stride = e.at("seed_stride").get<std::uint64_t>();

        // The plain-EM pair drifts by the point-motion covariation plus
        // the field-side double-bracket; the corrected pair cancels the
        // field part, so the run difference isolates the bracket alone.
        std::vector<double> realized(static_cast<std::size_t>(R)),
            exact(static_cast<std::size_t>(R)), diff(static_cast<std::size_t>(R)),
            bracket(static_cast<std::size_t>(R));
        parallel_for(static_cast<std::size_t>(R), serial, [&](std::size_t r) {
            WienerPath path = sample_increments(base + stride * r, 2, dt, std::llround(Te / dt));
            PVReport cor =
                pv_along_paths(mu0, params, {s1, s2}, path, Te, tracers, TransportScheme::ito);
            PVReport unc = pv_along_paths(mu0, params, {s1, s2}, path, Te, tracers,
                                          TransportScheme::ito_uncorrected);
            const double inv = 1.0 / static_cast<double>(cor.initial_q.size());
            double mc = 0.0, mp = 0.0, mu = 0.0;
            for (std::size_t p = 0; p < cor.initial_q.size(); ++p) {
                mc += (cor.final_q[p] - cor.initial_q[p]) * inv;
                mp += (unc.predicted_final_q[p] - unc.initial_q[p]) * inv;
                mu += (unc.final_q[p] - unc.initial_q[p]) * inv;
            }
            realized[r] = mu;
            exact[r] = mp - unc.double_bracket_mean_rate * Te;
            diff[r] = mc - mu;
            bracket[r] = cor.double_bracket_mean_rate * Te;
        });

        auto mean_se = [R](const std::vector<double>& a, const std::vector<double>& b) {
            double m = 0.0;
            for (int r = 0; r < R; ++r) m += (a[static_cast<std::size_t>(r)] -
                                              b[static_cast<std::size_t>(r)]) /
                                             R;
            double var = 0.0;
            for (int r = 0; r < R; ++r) {
                double d = a[static_cast<std::size_t>(r)] - b[static_cast<std::size_t>(r)] - m;
                var += d * d / (R - 1);
            }
            return std::pair<double, double>{m, std::sqrt(var / R)};
        };
        auto [gapA, seA] = mean_se(realized, exact);
        auto [gapB, seB] = mean_se(diff, bracket);
        double sigA = 0.0, sigB = 0.0;
        for (int r = 0; r < R; ++r) {
            sigA += std::abs(exact[static_cast<std::size_t>(r)]) / R;
            sigB += std::abs(bracket[static_cast<std::size_t>(r)]) / R;
        }

        const double k = e.at("mc_sigma_factor").get<double>();
        const double res = e.at("resolution_factor").get<double>();
        check_ge(rep, suite, "ito_bracket_signal", sigB, e.at("signal_min").get<double>(),
                 "mean double-bracket quadrature over the ensemble");
        check_le(rep, suite, "ito_drift_resolution", seA, res * sigA,
                 "the predicted drift must rise above Monte Carlo noise");
        check_le(rep, suite, "ito_drift_match", std::abs(gapA), k * seA,
                 "uncorrected ensemble drift against the point plus field quadratures");
        check_le(rep, suite, "ito_bracket_resolution", seB, res * sigB,
                 "the double-bracket quadrature must rise above Monte Carlo noise");
        check_le(rep, suite, "ito_bracket_match", std::abs(gapB), k * seB,
                 "corrected-minus-uncorrected drift against the double-bracket quadrature");

        std::vector<std::string> rows;
        for (int r = 0; r < R; ++r) {
            const auto i = static_cast<std::size_t>(r);
            rows.push_back(std::to_string(r) + "," + fmt(realized[i]) + "," + fmt(exact[i]) +
                           "," + fmt(diff[i]) + "," + fmt(bracket[i]));
        }
        write_table(dir, "pv_realizations.csv",
                    "realization,uncorrected_mean_dq,predicted_mean_dq,pair_difference_dq,"
                    "double_bracket_dq",
                    rows);
    }
}

// --------------------------------------------------------------------- pod

void run_pod(const json& s, const std::string& dir, bool serial, VerifyReport& rep) {
    (void)serial;
    const std::string suite = "pod";
    const PeriodicGrid g = grid_from(s.at("grid"));
    const int M = s.at("snapshots").get<int>();
    std::vector<double> energies;
    for (const auto& v : s.at("energies")) energies.push_back(v.get<double>());

    auto normalized = [&](VectorFieldOnGrid u) {
        return scaled(u, 1.0 / std::sqrt(vec_inner(u, u)));
    };
    VectorFieldOnGrid phi1 = normalized(perp_gradient(
        make_field(g, [](const std::array<double, 3>& x) { return std::sin(x[0]); })));
    VectorFieldOnGrid phi2 = normalized(perp_gradient(
        make_field(g, [](const std::array<double, 3>& x) { return std::cos(x[1]); })));

    std::filesystem::path snap_dir =
        dir.empty() ? std::filesystem::temp_directory_path() /
                          ("sgfd_verify_pod_snaps." + std::to_string(::getpid()))
                    : std::filesystem::path(dir) / "pod_snapshots";
    std::filesystem::remove_all(snap_dir);
    std::filesystem::create_directories(snap_dir);
    for (int m = 0; m < M; ++m) {
        const double theta = 2.0 * kPi * static_cast<double>(m) / static_cast<double>(M);
        const double ca = std::sqrt(2.0 * energies[0]) * std::cos(theta);
        const double cb = std::sqrt(2.0 * energies[1]) * std::sin(theta);
        std::vector<SpectralScalarField> comps;
        for (int c = 0; c < g.dims(); ++c) {
            SpectralScalarField f = ca * phi1[c];
            f.axpy(cb, phi2[c]);
            comps.push_back(std::move(f));
        }
        char name[32];
        std::snprintf(name, sizeof name, "snap_%02d", m);
        write_snapshot((snap_dir / name).string(), VectorFieldOnGrid(std::move(comps)));
    }

    SnapshotSet set = read_snapshot_dir(snap_dir.string());
    PODBasis basis = compute_pod(set, 2, {});

    double eig_err = 0.0;
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < energies.size(); ++i) {
        eig_err = std::max(eig_err, std::abs(basis.eigenvalues[i] - energies[i]) / energies[i]);
        rows.push_back(std::to_string(i) + "," + fmt(basis.eigenvalues[i]) + "," +
                       fmt(energies[i]));
    }
    write_table(dir, "pod_eigenvalues.csv", "index,lambda_sq_measured,lambda_sq_expected", rows);
    check_le(rep, suite, "eigenvalues", eig_err, s.at("eigenvalue_tol").get<double>(),
             "relative error of the recovered snapshot energies");

    const std::array<const VectorFieldOnGrid*, 2> want{&phi1, &phi2};
    double mode_err = 0.0;
    for (std::size_t i = 0; i < want.size(); ++i) {
        double best = 1e300;
        for (double sign : {1.0, -1.0}) {
            double acc = 0.0;
            for (int c = 0; c < g.dims(); ++c) {
                SpectralScalarField d = basis.modes[i][c] - sign * (*want[i])[c];
                acc += inner_l2(d, d);
            }
            best = std::min(best, std::sqrt(acc));
        }
        mode_err = std::max(mode_err, best);
    }
    check_le(rep, suite, "modes", mode_err, s.at("mode_tol").get<double>(),
             "unit-norm modes match the planted pair up to sign");

    double ortho = 0.0;
    for (std::size_t i = 0; i < basis.modes.size(); ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            const double want_ij = i == j ? 1.0 : 0.0;
            ortho = std::max(ortho,
                             std::abs(vec_inner(basis.modes[i], basis.modes[j]) - want_ij));
        }
    }
    check_le(rep, suite, "orthonormality", ortho, s.at("orthonormality_tol").get<double>(),
             "pairwise inner products of the recovered modes");

    double resid = 0.0;
    for (std::size_t i = 0; i < basis.modes.size(); ++i) {
        VectorFieldOnGrid acc(g);
        for (const auto& u : set.snapshots) {
            const double w = vec_inner(u, basis.modes[i]) / static_cast<double>(M);
            for (int c = 0; c < g.dims(); ++c) acc[c].axpy(w, u[c]);
        }
        double num = 0.0;
        for (int c = 0; c < g.dims(); ++c) {
            SpectralScalarField d = acc[c] - basis.eigenvalues[i] * basis.modes[i][c];
            num += inner_l2(d, d);
        }
        resid = std::max(resid, std::sqrt(num));
    }
    check_le(rep, suite, "correlation_residual", resid,
             s.at("residual_rel_tol").get<double>() * energies[0] * energies[0],
             "||C m - lambda^2 m|| against the leading energy squared");

    check_le(rep, suite, "rank", basis.degenerate ? 1.0 : 0.0, 0.0,
             "both requested modes must carry energy");

    if (dir.empty()) std::filesystem::remove_all(snap_dir);
}

std::string defaults_key(const std::string& suite) {
    if (suite == "strat-ito") return "strat_ito";
    if (suite == "pv-paths") return "pv_paths";
    return suite;
}

void merge_overrides(json& base, const json& over, const std::string& path) {
    if (!over.is_object()) {
        throw ConfigError("verify overrides must be an object at '" + path + "'");
    }
    for (const auto& [key, val] : over.items()) {
        auto it = base.find(key);
        if (it == base.end()) {
            throw ConfigError("unknown verify override key '" + path + key + "'");
        }
        if (it->is_object()) {
            merge_overrides(*it, val, path + key + ".");
        } else if (it->is_array() && val.is_array()) {
            *it = val;
        } else if (it->is_number() && val.is_number()) {
            *it = val;
        } else {
            throw ConfigError("verify override type mismatch at '" + path + key + "'");
        }
    }
}

}  // namespace

bool VerifyReport::pass() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return true;
}

std::vector<VerifyCheck> VerifyReport::failures() const {
    std::vector<VerifyCheck> out;
    for (const auto& c : checks) {
        if (!c.pass) out.push_back(c);
    }
    return out;
}

const std::vector<std::string>& verify_suites() {
    static const std::vector<std::string> names{"operators", "strat-ito", "casimirs", "kelvin",
                                                "helicity", "pv-paths",  "pod"};
    return names;
}

json verify_defaults() { return json::parse(kVerifyDefaultsJson); }

VerifyReport run_verify(const std::string& suite, const json& overrides,
                        const std::string& out_dir, bool serial) {
    json cfg = verify_defaults();
    if (!overrides.is_null() && !(overrides.is_object() && overrides.empty())) {
        merge_overrides(cfg, overrides, "");
    }

    std::vector<std::string> todo;
    if (suite == "all") {
        todo = verify_suites();
    } else if (std::find(verify_suites().begin(), verify_suites().end(), suite) !=
               verify_suites().end()) {
        todo = {suite};
    } else {
        std::string known = "all";
        for (const auto& n : verify_suites()) known += ", " + n;
        throw ConfigError("unknown verify suite '" + suite + "' (expected one of: " + known +
                          ")");
    }

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

    VerifyReport rep;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& name : todo) {
        const json& s = cfg.at(defaults_key(name));
        if (name == "operators") run_operators(s, out_dir, serial, rep);
        else if (name == "strat-ito") run_strat_ito(s, out_dir, serial, rep);
        else if (name == "casimirs") run_casimirs(s, out_dir, serial, rep);
        else if (name == "kelvin") run_kelvin(s, out_dir, serial, rep);
        else if (name == "helicity") run_helicity(s, out_dir, serial, rep);
        else if (name == "pv-paths") run_pv_paths(s, out_dir, serial, rep);
        else run_pod(s, out_dir, serial, rep);
    }
    rep.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (!out_dir.empty()) {
        std::vector<std::string> rows;
        json jchecks = json::array();
        for (const auto& c : rep.checks) {
            rows.push_back(c.suite + "," + c.property + "," + fmt(c.residual) + "," +
                           fmt(c.tolerance) + "," + (c.pass ? "1" : "0"));
            jchecks.push_back({{"suite", c.suite},
                               {"property", c.property},
                               {"residual", c.residual},
                               {"tolerance", c.tolerance},
                               {"pass", c.pass},
                               {"detail", c.detail}});
        }
        write_table(out_dir, "checks.csv", "suite,property,residual,tolerance,pass", rows);
        json summary{{"suite", suite},
                     {"pass", rep.pass()},
                     {"elapsed_seconds", rep.elapsed_seconds},
                     {"checks", jchecks}};
        std::ofstream out(std::filesystem::path(out_dir) / "summary.json");
        if (!out) throw IoError("cannot write summary.json under " + out_dir);
        out << summary.dump(2) << "\n";
    }
    return rep;
}

}  // namespace sgfd
