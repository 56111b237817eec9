#pragma once

// Self-checking suites over the library's conservation laws, convergence
// rates, and regression pins.  Every tolerance comes from one versioned
// defaults document (see config/verify_defaults.json), overridable per
// run; each check records the measured residual next to its bound so a
// failure names both.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sgfd {

struct VerifyCheck {
    std::string suite;
    std::string property;
    double residual = 0.0;   // measured value
    double tolerance = 0.0;  // bound it is held against
    bool pass = false;
    std::string detail;      // comparison direction and context
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    double elapsed_seconds = 0.0;

    bool pass() const;
    std::vector<VerifyCheck> failures() const;
};

// Suites accepted by run_verify, not including "all".
const std::vector<std::string>& verify_suites();

// The built-in defaults document (parsed copy of the versioned file).
nlohmann::json verify_defaults();

// Runs one named suite, or every suite for "all".  `overrides` merges
// onto the defaults and must only touch keys that already exist there.
// Writes per-suite CSV series plus checks.csv and summary.json under
// `out_dir` (skipped when empty).  `serial` disables the thread pool so
// ensemble reductions are bit-reproducible run to run; results are
// identical either way.  Throws ConfigError for unknown suites or
// malformed overrides.
VerifyReport run_verify(const std::string& suite, const nlohmann::json& overrides,
                        const std::string& out_dir, bool serial);

}  // namespace sgfd
