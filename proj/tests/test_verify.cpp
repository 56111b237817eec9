/// @file test_verify.cpp
/// @brief Verification runner: suite dispatch, defaults document and
///        override merging, artifact writing, and reproducibility of
///        the serial mode.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "config.hpp"
#include "verify.hpp"

using namespace sgfd;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("defaults document lists every suite with a version stamp") {
    auto doc = verify_defaults();
    CHECK(doc.at("version").get<int>() >= 1);
    CHECK(verify_suites().size() == 7);
    CHECK(std::find(verify_suites().begin(), verify_suites().end(), "all") ==
          verify_suites().end());
    for (const auto& name : verify_suites()) {
        std::string key = name;
        std::replace(key.begin(), key.end(), '-', '_');
        CHECK(doc.contains(key));
    }
}

TEST_CASE("unknown suites and malformed overrides are configuration errors") {
    CHECK_THROWS_AS(run_verify("spectra", {}, "", true), ConfigError);
    CHECK_THROWS_WITH_AS(run_verify("spectra", {}, "", true),
                         doctest::Contains("spectra"), ConfigError);

    nlohmann::json bad_key = {{"pod", {{"snapshot_count", 4}}}};
    CHECK_THROWS_WITH_AS(run_verify("pod", bad_key, "", true),
                         doctest::Contains("pod.snapshot_count"), ConfigError);

    nlohmann::json bad_type = {{"pod", {{"snapshots", "eight"}}}};
    CHECK_THROWS_AS(run_verify("pod", bad_type, "", true), ConfigError);

    nlohmann::json not_object = 7;
    CHECK_THROWS_AS(run_verify("pod", not_object, "", true), ConfigError);
}

TEST_CASE("pod suite passes and writes its artifacts") {
    fs::path dir = fresh_dir("sgfd_test_verify_pod");
    auto rep = run_verify("pod", {}, dir.string(), true);
    CHECK(rep.pass());
    CHECK(rep.failures().empty());
    CHECK(rep.checks.size() == 5);
    for (const auto& c : rep.checks) {
        CHECK(c.suite == "pod");
        CHECK(std::isfinite(c.residual));
    }
    CHECK(fs::exists(dir / "pod_eigenvalues.csv"));
    CHECK(fs::exists(dir / "checks.csv"));
    CHECK(fs::exists(dir / "summary.json"));
    CHECK(fs::exists(dir / "pod_snapshots"));

    auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary.at("pass").get<bool>());
    CHECK(summary.at("suite").get<std::string>() == "pod");
    CHECK(summary.at("checks").size() == rep.checks.size());
    fs::remove_all(dir);
}

TEST_CASE("overrides merge onto the defaults and reach the suite") {
    // a deliberately impossible tolerance must flip the check to failing
    nlohmann::json tighten = {{"pod", {{"eigenvalue_tol", 1e-30}}}};
    auto rep = run_verify("pod", tighten, "", true);
    CHECK(!rep.pass());
    auto fails = rep.failures();
    REQUIRE(fails.size() == 1);
    CHECK(fails[0].property == "eigenvalues");
    CHECK(fails[0].tolerance == 1e-30);
}

TEST_CASE("operators suite runs trimmed through overrides") {
    nlohmann::json trim = {{"operators", {{"trials", 6}}}};
    auto rep = run_verify("operators", trim, "", true);
    CHECK(rep.pass());
    std::vector<std::string> props;
    for (const auto& c : rep.checks) props.push_back(c.property);
    for (const char* want : {"exterior_nilpotency", "diamond_duality", "covariation_identity",
                             "covariation_regression", "metric_laplacian_reduction"}) {
        CHECK(std::find(props.begin(), props.end(), want) != props.end());
    }
}

TEST_CASE("serial runs write byte-identical reports") {
    fs::path a = fresh_dir("sgfd_test_verify_rep_a");
    fs::path b = fresh_dir("sgfd_test_verify_rep_b");
    nlohmann::json trim = {{"operators", {{"trials", 4}}}};
    run_verify("operators", trim, a.string(), true);
    run_verify("operators", trim, b.string(), true);
    CHECK(slurp(a / "checks.csv") == slurp(b / "checks.csv"));
    CHECK(slurp(a / "operators_trials.csv") == slurp(b / "operators_trials.csv"));
    CHECK(slurp(a / "covariation.csv") == slurp(b / "covariation.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("empty output directory suppresses artifact writing") {
    auto rep = run_verify("pod", {}, "", true);
    CHECK(rep.pass());
    CHECK(rep.elapsed_seconds >= 0.0);
}
