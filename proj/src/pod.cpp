#include "pod.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "field_io.hpp"

namespace sgfd {

const PeriodicGrid& SnapshotSet::grid() const {
    if (snapshots.empty()) throw InvalidArgument("snapshot set is empty");
    return snapshots[0].grid();
}

namespace {

double field_inner(const VectorFieldOnGrid& a, const VectorFieldOnGrid& b) {
    double s = 0.0;
    for (int c = 0; c < a.dims(); ++c) s += inner_l2(a[c], b[c]);
    return s;
}

VectorFieldOnGrid zero_like(const PeriodicGrid& g) { return VectorFieldOnGrid(g); }

}  // namespace

PODBasis compute_pod(const SnapshotSet& data, int K, const PodOptions& opts) {
    const int M = data.count();
    if (M < 1) throw InvalidArgument("compute_pod: need at least one snapshot");
    if (K < 1 || K > M)
        throw InvalidArgument("compute_pod: K must lie in [1, " + std::to_string(M) + "]");
    const PeriodicGrid& g = data.grid();
    for (const auto& u : data.snapshots) {
        if (u.grid() != g) throw InvalidArgument("compute_pod: snapshots on different grids");
    }

    std::vector<VectorFieldOnGrid> snaps = data.snapshots;
    if (opts.center) {
        VectorFieldOnGrid mean(g);
        for (const auto& u : snaps)
            for (int c = 0; c < g.dims(); ++c) mean[c] += u[c];
        for (int c = 0; c < g.dims(); ++c) mean[c] *= 1.0 / M;
        for (auto& u : snaps)
            for (int c = 0; c < g.dims(); ++c) u[c] -= mean[c];
    }

    Eigen::MatrixXd gram(M, M);
    for (int m = 0; m < M; ++m) {
        for (int n = m; n < M; ++n) {
            double v = field_inner(snaps[static_cast<std::size_t>(m)],
                                   snaps[static_cast<std::size_t>(n)]) /
                       static_cast<double>(M);
            gram(m, n) = v;
            gram(n, m) = v;
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericalError("compute_pod: eigensolve failed");
    // Eigen returns ascending order; we want descending.
    Eigen::VectorXd vals = eig.eigenvalues();
    Eigen::MatrixXd vecs = eig.eigenvectors();

    PODBasis basis;
    const double lead = std::max(vals(M - 1), 0.0);
    const double floor_val = std::max(lead * 1e-13, 1e-300);
    for (int i = 0; i < K; ++i) {
        int src = M - 1 - i;
        double lam2 = std::max(vals(src), 0.0);
        basis.eigenvalues.push_back(lam2);
        if (lam2 <= floor_val) {
            basis.modes.push_back(zero_like(g));
            basis.degenerate = true;
            continue;
        }
        ++basis.rank;
        VectorFieldOnGrid mode(g);
        const double scale = 1.0 / std::sqrt(lam2 * M);
        for (int m = 0; m < M; ++m) {
            double w = vecs(m, src) * scale;
            if (w == 0.0) continue;
            for (int c = 0; c < g.dims(); ++c)
                mode[c].axpy(w, snaps[static_cast<std::size_t>(m)][c]);
        }
        if (opts.divergence_free) {
            mode = leray_project(mode);
            double nrm = norm_l2(mode);
            if (nrm > 1e-300) {
                for (int c = 0; c < g.dims(); ++c) mode[c] *= 1.0 / nrm;
            } else {
                basis.degenerate = true;
            }
        }
        basis.modes.push_back(std::move(mode));
    }
    return basis;
}

NoiseBasis scale_modes(const PODBasis& basis) {
    NoiseBasis out;
    out.mode = NoiseMode::vector_fields;
    for (std::size_t i = 0; i < basis.modes.size(); ++i) {
        const VectorFieldOnGrid& m = basis.modes[i];
        double peak = 0.0;
        for (int c = 0; c < m.dims(); ++c) peak = std::max(peak, m[c].max_abs());
        double sign = 1.0;
        const double threshold = peak * 1e-10;
        bool found = false;
        for (int c = 0; c < m.dims() && !found; ++c) {
            for (std::int64_t n = 0; n < m[c].size() && !found; ++n) {
                if (std::abs(m[c][n]) > threshold && threshold > 0.0) {
                    sign = m[c][n] > 0.0 ? 1.0 : -1.0;
                    found = true;
                }
            }
        }
        double lambda = std::sqrt(std::max(basis.eigenvalues[i], 0.0));
        VectorFieldOnGrid f(m.grid());
        for (int c = 0; c < m.dims(); ++c) {
            f[c] = m[c];
            f[c] *= sign * lambda;
        }
        out.fields.push_back(std::move(f));
        out.weights.push_back(lambda);
    }
    return out;
}

SnapshotSet read_snapshot_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
    std::set<std::string> prefixes;
    const std::string tail = ".c0.gfsf";
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.size() > tail.size() &&
            name.compare(name.size() - tail.size(), tail.size(), tail) == 0) {
            prefixes.insert(name.substr(0, name.size() - tail.size()));
        }
    }
    if (prefixes.empty()) throw IoError("no snapshot files (*.c0.gfsf) in " + dir);
    SnapshotSet out;
    for (const std::string& p : prefixes) {
        std::string base = (fs::path(dir) / p).string();
        std::vector<SpectralScalarField> comps;
        comps.push_back(read_field(base + ".c0.gfsf"));
        int d = comps[0].grid().dims();
        for (int c = 1; c < d; ++c)
            comps.push_back(read_field(base + ".c" + std::to_string(c) + ".gfsf"));
        out.snapshots.emplace_back(std::move(comps));
    }
    return out;
}

void write_snapshot(const std::string& prefix, const VectorFieldOnGrid& u) {
    for (int c = 0; c < u.dims(); ++c) {
        nlohmann::json meta;
        meta["kind"] = "velocity";
        meta["component"] = c;
        meta["components"] = u.dims();
        write_field(prefix + ".c" + std::to_string(c) + ".gfsf", u[c], meta);
    }
}

void write_basis(const std::string& dir, const PODBasis& basis) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < basis.modes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "mode_%02zu", i);
        write_snapshot((fs::path(dir) / name).string(), basis.modes[i]);
    }
    std::string csv = (fs::path(dir) / "eigenvalues.csv").string();
    std::FILE* f = std::fopen(csv.c_str(), "w");
    if (!f) throw IoError("cannot open for writing: " + csv);
    std::fprintf(f, "index,lambda_sq\n");
    for (std::size_t i = 0; i < basis.eigenvalues.size(); ++i)
        std::fprintf(f, "%zu,%.17g\n", i, basis.eigenvalues[i]);
    if (std::fclose(f) != 0) throw IoError("write failed: " + csv);
}

}  // namespace sgfd
