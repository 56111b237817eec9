#pragma once

// Noise-basis extraction from velocity snapshots: the snapshot-space
// Gram eigenproblem (method of snapshots), mode lifting, and scaling to
// a weighted basis.

#include <cstdint>
#include <string>
#include <vector>

#include "forms.hpp"
#include "noise.hpp"

namespace sgfd {

struct SnapshotSet {
    std::vector<VectorFieldOnGrid> snapshots;

    int count() const { return static_cast<int>(snapshots.size()); }
    const PeriodicGrid& grid() const;
};

struct PodOptions {
    bool center = false;            // subtract the snapshot mean first
    bool divergence_free = false;   // solenoidal projection of the modes
};

struct PODBasis {
    std::vector<double> eigenvalues;        // lambda_i^2, descending
    std::vector<VectorFieldOnGrid> modes;   // unit L2 norm
    bool degenerate = false;                // some requested modes carry no energy
    int rank = 0;                           // numerically nonzero eigenvalues
};

// Solves (1/M) G a = lambda^2 a with G_mn = <u_m, u_n> and lifts the
// eigenvectors to unit-norm grid modes.  Requested modes beyond the
// numerical rank come back as zero fields with `degenerate` set.
PODBasis compute_pod(const SnapshotSet& data, int K, const PodOptions& opts = {});

// lambda_i * xi_i with weights lambda_i, sign fixed so the first
// significant sample of each mode is positive.
NoiseBasis scale_modes(const PODBasis& basis);

// Snapshots live as <dir>/<name>.c<j>.gfsf groups, one group per
// snapshot, ordered by name.
SnapshotSet read_snapshot_dir(const std::string& dir);
void write_snapshot(const std::string& prefix, const VectorFieldOnGrid& u);

// Modes as mode_<i>.c<j>.gfsf plus eigenvalues.csv (index, lambda^2).
void write_basis(const std::string& dir, const PODBasis& basis);

}  // namespace sgfd
