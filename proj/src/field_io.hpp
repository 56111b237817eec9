#pragma once

// Snapshot files: magic "GFSF", u32 version, u32 dims, u32 sizes per
// axis, then the row-major float64 payload, all little-endian.  A JSON
// sidecar (<path>.json) carries grid lengths and run metadata.

#include <string>

#include <nlohmann/json.hpp>

#include "grid.hpp"

namespace sgfd {

inline constexpr std::uint32_t kSnapshotVersion = 1;

void write_field(const std::string& path, const SpectralScalarField& f,
                 const nlohmann::json& meta = nlohmann::json::object());

SpectralScalarField read_field(const std::string& path);

// Sidecar contents, or an empty object when no sidecar exists.
nlohmann::json read_sidecar(const std::string& path);

}  // namespace sgfd
