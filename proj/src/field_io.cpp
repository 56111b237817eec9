#include "field_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace sgfd {

namespace {

static_assert(std::endian::native == std::endian::little,
              "snapshot payload is little-endian; byte swapping not implemented");

void put_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t get_u32(std::ifstream& in, const std::string& path, std::int64_t offset) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in)
        throw IoError(path + ": truncated header at byte " + std::to_string(offset));
    return v;
}

}  // namespace

void write_field(const std::string& path, const SpectralScalarField& f, const nlohmann::json& meta) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path + ": cannot open for writing");
    const PeriodicGrid& g = f.grid();
    out.write("GFSF", 4);
    put_u32(out, kSnapshotVersion);
    put_u32(out, static_cast<std::uint32_t>(g.dims()));
    for (int a = 0; a < g.dims(); ++a) put_u32(out, static_cast<std::uint32_t>(g.size(a)));
    out.write(reinterpret_cast<const char*>(f.data()),
              static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(g.total())));
    if (!out) throw IoError(path + ": write failed");
    out.close();

    nlohmann::json side = meta;
    side["format"] = "GFSF";
    side["version"] = kSnapshotVersion;
    std::vector<double> lengths;
    for (int a = 0; a < g.dims(); ++a) lengths.push_back(g.length(a));
    side["lengths"] = lengths;
    std::ofstream js(path + ".json", std::ios::trunc);
    if (!js) throw IoError(path + ".json: cannot open for writing");
    js << side.dump(2) << "\n";
}

SpectralScalarField read_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError(path + ": cannot open");
    char magic[4] = {0, 0, 0, 0};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "GFSF", 4) != 0)
        throw IoError(path + ": bad magic at byte 0");
    std::uint32_t version = get_u32(in, path, 4);
    if (version != kSnapshotVersion)
        throw IoError(path + ": unsupported version " + std::to_string(version) + " at byte 4");
    std::uint32_t dims = get_u32(in, path, 8);
    if (dims != 2 && dims != 3)
        throw IoError(path + ": bad rank " + std::to_string(dims) + " at byte 8");
    std::vector<int> shape;
    std::int64_t offset = 12;
    for (std::uint32_t a = 0; a < dims; ++a) {
        std::uint32_t n = get_u32(in, path, offset);
        if (n < 8 || n > (1u << 20))
            throw IoError(path + ": bad axis size " + std::to_string(n) + " at byte " +
                          std::to_string(offset));
        shape.push_back(static_cast<int>(n));
        offset += 4;
    }

    std::vector<double> lengths;
    nlohmann::json side = read_sidecar(path);
    if (side.contains("lengths")) lengths = side["lengths"].get<std::vector<double>>();

    PeriodicGrid grid(shape, lengths);
    std::vector<double> values(static_cast<std::size_t>(grid.total()));
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(sizeof(double) * values.size()));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(double) * values.size()))
        throw IoError(path + ": truncated payload at byte " +
                      std::to_string(offset + in.gcount()));
    return SpectralScalarField(grid, std::move(values));
}

nlohmann::json read_sidecar(const std::string& path) {
    std::ifstream js(path + ".json");
    if (!js) return nlohmann::json::object();
    nlohmann::json side;
    try {
        js >> side;
    } catch (const nlohmann::json::exception& e) {
        throw IoError(path + ".json: invalid sidecar: " + e.what());
    }
    return side;
}

}  // namespace sgfd
