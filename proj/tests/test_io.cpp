/// @file test_io.cpp
/// @brief Snapshot format: byte-exact round trips, sidecar metadata,
///        corruption diagnostics with byte offsets.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>

#include "field_io.hpp"
#include "grid.hpp"

using namespace sgfd;

namespace {

struct TmpFile {
    std::string path;
    explicit TmpFile(const std::string& name) : path("/tmp/sgfd_io_" + name) {}
    ~TmpFile() {
        std::remove(path.c_str());
        std::remove((path + ".json").c_str());
    }
};

}  // namespace

TEST_CASE("snapshot round trip is byte exact") {
    TmpFile tmp("roundtrip.gfsf");
    PeriodicGrid g({16, 24});
    auto f = random_field(g, 77, 5);
    write_field(tmp.path, f);
    auto back = read_field(tmp.path);
    REQUIRE(back.grid() == g);
    CHECK(std::memcmp(back.data(), f.data(), sizeof(double) * static_cast<size_t>(g.total())) == 0);
}

TEST_CASE("sidecar carries lengths and metadata") {
    TmpFile tmp("sidecar.gfsf");
    PeriodicGrid g({16, 16, 8}, {2 * kTwoPi, kTwoPi, kTwoPi});
    auto f = random_field(g, 5, 3);
    nlohmann::json meta;
    meta["time"] = 1.5;
    meta["component"] = "u1";
    write_field(tmp.path, f, meta);

    auto side = read_sidecar(tmp.path);
    CHECK(side["time"] == 1.5);
    CHECK(side["component"] == "u1");
    CHECK(side["format"] == "GFSF");

    auto back = read_field(tmp.path);
    REQUIRE(back.grid().dims() == 3);
    CHECK(back.grid().length(0) == doctest::Approx(2 * kTwoPi));
    CHECK(back.grid().length(1) == doctest::Approx(kTwoPi));
}

TEST_CASE("corrupted magic is rejected naming byte 0") {
    TmpFile tmp("magic.gfsf");
    PeriodicGrid g({8, 8});
    write_field(tmp.path, SpectralScalarField(g, 1.0));
    {
        std::fstream fix(tmp.path, std::ios::in | std::ios::out | std::ios::binary);
        fix.seekp(0);
        fix.write("XXXX", 4);
    }
    try {
        read_field(tmp.path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("byte 0") != std::string::npos);
    }
}

TEST_CASE("truncated payload is rejected with an offset") {
    TmpFile tmp("trunc.gfsf");
    PeriodicGrid g({8, 8});
    write_field(tmp.path, SpectralScalarField(g, 2.0));
    {
        std::ifstream in(tmp.path, std::ios::binary);
        std::string all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        std::ofstream out(tmp.path, std::ios::binary | std::ios::trunc);
        out.write(all.data(), static_cast<std::streamsize>(all.size() - 16));
    }
    try {
        read_field(tmp.path);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("truncated") != std::string::npos);
    }
}

TEST_CASE("unsupported version is rejected") {
    TmpFile tmp("version.gfsf");
    PeriodicGrid g({8, 8});
    write_field(tmp.path, SpectralScalarField(g, 0.5));
    {
        std::fstream fix(tmp.path, std::ios::in | std::ios::out | std::ios::binary);
        fix.seekp(4);
        std::uint32_t bad = 999;
        fix.write(reinterpret_cast<const char*>(&bad), 4);
    }
    CHECK_THROWS_AS(read_field(tmp.path), IoError);
}

TEST_CASE("missing file reports cleanly") {
    CHECK_THROWS_AS(read_field("/tmp/sgfd_does_not_exist.gfsf"), IoError);
}
