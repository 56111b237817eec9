#include "config.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "field_io.hpp"

namespace sgfd {

namespace {

// Wraps one JSON object: typed getters record the keys they touch and
// finish() rejects everything left over, so schemas stay closed.
class ObjectView {
  public:
    ObjectView(const nlohmann::json& node, std::string path)
        : node_(&node), path_(std::move(path)) {
        if (!node_->is_object()) {
            throw ConfigError(path_ + " must be a JSON object");
        }
    }

    const std::string& where() const { return path_; }
    std::string child(const char* key) const { return path_ + "." + key; }

    bool has(const char* key) const { return node_->contains(key); }

    const nlohmann::json& require(const char* key) {
        seen_.insert(key);
        auto it = node_->find(key);
        if (it == node_->end()) {
            throw ConfigError(path_ + " is missing required key '" + std::string(key) + "'");
        }
        return *it;
    }

    const nlohmann::json* optional(const char* key) {
        seen_.insert(key);
        auto it = node_->find(key);
        return it == node_->end() ? nullptr : &*it;
    }

    double number(const char* key) { return as_number(require(key), child(key)); }
    double number_or(const char* key, double fallback) {
        const nlohmann::json* v = optional(key);
        return v ? as_number(*v, child(key)) : fallback;
    }

    std::int64_t integer(const char* key) { return as_integer(require(key), child(key)); }
    std::int64_t integer_or(const char* key, std::int64_t fallback) {
        const nlohmann::json* v = optional(key);
        return v ? as_integer(*v, child(key)) : fallback;
    }

    std::uint64_t uinteger(const char* key) { return as_uinteger(require(key), child(key)); }
    std::uint64_t uinteger_or(const char* key, std::uint64_t fallback) {
        const nlohmann::json* v = optional(key);
        return v ? as_uinteger(*v, child(key)) : fallback;
    }

    std::string text(const char* key) { return as_text(require(key), child(key)); }
    std::string text_or(const char* key, const std::string& fallback) {
        const nlohmann::json* v = optional(key);
        return v ? as_text(*v, child(key)) : fallback;
    }

    bool flag_or(const char* key, bool fallback) {
        const nlohmann::json* v = optional(key);
        if (v == nullptr) {
            return fallback;
        }
        if (!v->is_boolean()) {
            throw ConfigError(child(key) + " must be a boolean");
        }
        return v->get<bool>();
    }

    void finish() const {
        for (auto it = node_->begin(); it != node_->end(); ++it) {
            if (seen_.find(it.key()) == seen_.end()) {
                throw ConfigError(path_ + " has unknown key '" + it.key() + "'");
            }
        }
    }

    static double as_number(const nlohmann::json& v, const std::string& at) {
        if (!v.is_number()) {
            throw ConfigError(at + " must be a number");
        }
        return v.get<double>();
    }
    static std::int64_t as_integer(const nlohmann::json& v, const std::string& at) {
        if (!v.is_number_integer()) {
            throw ConfigError(at + " must be an integer");
        }
        return v.get<std::int64_t>();
    }
    static std::uint64_t as_uinteger(const nlohmann::json& v, const std::string& at) {
        if (v.is_number_unsigned()) {
            return v.get<std::uint64_t>();
        }
        if (v.is_number_integer() && v.get<std::int64_t>() >= 0) {
            return static_cast<std::uint64_t>(v.get<std::int64_t>());
        }
        throw ConfigError(at + " must be a non-negative integer");
    }
    static std::string as_text(const nlohmann::json& v, const std::string& at) {
        if (!v.is_string()) {
            throw ConfigError(at + " must be a string");
        }
        return v.get<std::string>();
    }

  private:
    const nlohmann::json* node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::vector<double> number_array(const nlohmann::json& v, const std::string& at,
                                 std::size_t want = 0) {
    if (!v.is_array()) {
        throw ConfigError(at + " must be an array of numbers");
    }
    std::vector<double> out;
    for (const auto& e : v) {
        out.push_back(ObjectView::as_number(e, at));
    }
    if (want != 0 && out.size() != want) {
        throw ConfigError(at + " must have " + std::to_string(want) + " entries, got " +
                          std::to_string(out.size()));
    }
    return out;
}

std::vector<std::int64_t> integer_array(const nlohmann::json& v, const std::string& at,
                                        std::size_t want = 0) {
    if (!v.is_array()) {
        throw ConfigError(at + " must be an array of integers");
    }
    std::vector<std::int64_t> out;
    for (const auto& e : v) {
        out.push_back(ObjectView::as_integer(e, at));
    }
    if (want != 0 && out.size() != want) {
        throw ConfigError(at + " must have " + std::to_string(want) + " entries, got " +
                          std::to_string(out.size()));
    }
    return out;
}

void check_band(const std::array<int, 3>& k, const PeriodicGrid& grid, const std::string& at) {
    for (int a = 0; a < grid.dims(); ++a) {
        if (std::abs(k[static_cast<std::size_t>(a)]) > grid.dealias_cutoff(a)) {
            throw ConfigError(at + ": wavenumber component " + std::to_string(k[a]) +
                              " lies outside the dealiased band (|k| <= " +
                              std::to_string(grid.dealias_cutoff(a)) + " on axis " +
                              std::to_string(a) + ")");
        }
    }
}

int checked_kmax(ObjectView& v, const PeriodicGrid& grid) {
    std::int64_t kmax = v.integer("kmax");
    int cutoff = grid.dealias_cutoff(0);
    for (int a = 1; a < grid.dims(); ++a) {
        cutoff = std::min(cutoff, grid.dealias_cutoff(a));
    }
    if (kmax < 1 || kmax > cutoff) {
        throw ConfigError(v.child("kmax") + " must lie in [1, " + std::to_string(cutoff) + "]");
    }
    return static_cast<int>(kmax);
}

std::string parse_log_level(ObjectView& v) {
    std::string level = v.text_or("log_level", "info");
    if (level != "quiet" && level != "info" && level != "debug") {
        throw ConfigError(v.child("log_level") + " must be one of quiet, info, debug");
    }
    return level;
}

SQGScheme parse_sqg_scheme(const std::string& name, const std::string& at) {
    if (name == "deterministic") return SQGScheme::deterministic;
    if (name == "stratonovich") return SQGScheme::stratonovich;
    if (name == "ito") return SQGScheme::ito;
    if (name == "ito_uncorrected") return SQGScheme::ito_uncorrected;
    throw ConfigError(at + " must be one of deterministic, stratonovich, ito, ito_uncorrected");
}

TransportScheme parse_transport_scheme(const std::string& name, const std::string& at) {
    if (name == "stratonovich") return TransportScheme::stratonovich;
    if (name == "ito") return TransportScheme::ito;
    if (name == "ito_uncorrected") return TransportScheme::ito_uncorrected;
    throw ConfigError(at + " must be one of stratonovich, ito, ito_uncorrected");
}

FormGrade parse_grade(const std::string& name, const std::string& at) {
    if (name == "scalar") return FormGrade::scalar;
    if (name == "one_form") return FormGrade::one_form;
    if (name == "two_form") return FormGrade::two_form;
    if (name == "density") return FormGrade::density;
    throw ConfigError(at + " must be one of scalar, one_form, two_form, density");
}

// Stream functions for SQG noise: inline scalar specs or a POD basis
// directory holding velocity modes.
std::vector<SpectralScalarField> parse_noise_streams(const nlohmann::json& spec,
                                                     const PeriodicGrid& grid,
                                                     const std::string& path) {
    ObjectView v(spec, path);
    std::string type = v.text("type");
    std::vector<SpectralScalarField> streams;
    if (type == "inline") {
        const nlohmann::json& arr = v.require("streams");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError(v.child("streams") + " must be a non-empty array");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            streams.push_back(build_field(arr[i], grid,
                                          v.child("streams") + "[" + std::to_string(i) + "]"));
        }
        if (const nlohmann::json* k = v.optional("K")) {
            std::int64_t want = ObjectView::as_integer(*k, v.child("K"));
            if (want != static_cast<std::int64_t>(streams.size())) {
                throw ConfigError(v.child("K") + " = " + std::to_string(want) +
                                  " does not match the " + std::to_string(streams.size()) +
                                  " inline streams");
            }
        }
    } else if (type == "basis") {
        std::string dir = v.text("path");
        std::int64_t K = v.integer("K");
        if (K < 1) {
            throw ConfigError(v.child("K") + " must be >= 1");
        }
        streams = load_basis_streams(dir, static_cast<int>(K), grid, path);
    } else {
        throw ConfigError(v.child("type") + " must be 'inline' or 'basis'");
    }
    v.finish();
    return streams;
}

}  // namespace

nlohmann::json parse_json_document(const std::string& text) {
    nlohmann::json doc = nlohmann::json::parse(text, nullptr, false);
    if (doc.is_discarded()) {
        throw ConfigError("config is not valid JSON");
    }
    return doc;
}

PeriodicGrid parse_grid(const nlohmann::json& spec, const std::string& path) {
    ObjectView v(spec, path);
    auto sizes = integer_array(v.require("size"), v.child("size"));
    std::vector<int> shape;
    for (std::int64_t n : sizes) {
        shape.push_back(static_cast<int>(n));
    }
    std::vector<double> lengths;
    if (const nlohmann::json* lens = v.optional("lengths")) {
        lengths = number_array(*lens, v.child("lengths"), sizes.size());
    }
    v.finish();
    try {
        return PeriodicGrid(shape, lengths);
    } catch (const InvalidArgument& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

SpectralScalarField build_field(const nlohmann::json& spec, const PeriodicGrid& grid,
                                const std::string& path) {
    ObjectView v(spec, path);
    std::string type = v.text("type");
    SpectralScalarField out(grid);
    if (type == "zero") {
        // default-constructed zeros
    } else if (type == "modes") {
        const nlohmann::json& arr = v.require("components");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError(v.child("components") + " must be a non-empty array");
        }
        struct ModeTerm {
            std::array<double, 3> k;
            double amplitude;
            double phase;
        };
        std::vector<ModeTerm> terms;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            std::string at = v.child("components") + "[" + std::to_string(i) + "]";
            ObjectView m(arr[i], at);
            auto kints = integer_array(m.require("k"), m.child("k"),
                                       static_cast<std::size_t>(grid.dims()));
            std::array<int, 3> k{0, 0, 0};
            for (int a = 0; a < grid.dims(); ++a) {
                k[static_cast<std::size_t>(a)] = static_cast<int>(kints[static_cast<std::size_t>(a)]);
            }
            check_band(k, grid, m.child("k"));
            ModeTerm term;
            for (int a = 0; a < 3; ++a) {
                term.k[static_cast<std::size_t>(a)] =
                    a < grid.dims() ? k[static_cast<std::size_t>(a)] * grid.k_scale(a) : 0.0;
            }
            term.amplitude = m.number("amplitude");
            term.phase = m.number_or("phase", 0.0);
            m.finish();
            terms.push_back(term);
        }
        out = make_field(grid, [&terms](const std::array<double, 3>& x) {
            double s = 0.0;
            for (const auto& t : terms) {
                s += t.amplitude *
                     std::cos(t.k[0] * x[0] + t.k[1] * x[1] + t.k[2] * x[2] + t.phase);
            }
            return s;
        });
    } else if (type == "random") {
        std::uint64_t seed = v.uinteger("seed");
        int kmax = checked_kmax(v, grid);
        double amplitude = v.number_or("amplitude", 1.0);
        out = random_field(grid, seed, kmax);
        out *= amplitude;
    } else if (type == "file") {
        std::string file = v.text("path");
        SpectralScalarField f = read_field(file);
        if (f.grid() != grid) {
            throw ConfigError(v.child("path") + ": field in '" + file +
                              "' lives on a different grid than the config declares");
        }
        out = std::move(f);
    } else {
        throw ConfigError(v.child("type") + " must be one of zero, modes, random, file");
    }
    v.finish();
    return out;
}

VectorFieldOnGrid build_vector_field(const nlohmann::json& spec, const PeriodicGrid& grid,
                                     const std::string& path) {
    ObjectView v(spec, path);
    std::string type = v.text("type");
    VectorFieldOnGrid out(grid);
    if (type == "zero") {
        // zeros
    } else if (type == "constant") {
        auto vals = number_array(v.require("value"), v.child("value"),
                                 static_cast<std::size_t>(grid.dims()));
        std::vector<SpectralScalarField> comps;
        for (int a = 0; a < grid.dims(); ++a) {
            comps.emplace_back(grid, vals[static_cast<std::size_t>(a)]);
        }
        out = VectorFieldOnGrid(std::move(comps));
    } else if (type == "stream") {
        if (grid.dims() != 2) {
            throw ConfigError(path + ": stream-function vectors are 2D only");
        }
        out = perp_gradient(build_field(v.require("field"), grid, v.child("field")));
    } else if (type == "random") {
        std::uint64_t seed = v.uinteger("seed");
        int kmax = checked_kmax(v, grid);
        double amplitude = v.number_or("amplitude", 1.0);
        bool solenoidal = v.flag_or("divergence_free", true);
        out = random_vector_field(grid, seed, kmax, solenoidal);
        for (int a = 0; a < grid.dims(); ++a) {
            out[a] *= amplitude;
        }
    } else if (type == "components") {
        const nlohmann::json& arr = v.require("fields");
        if (!arr.is_array() || arr.size() != static_cast<std::size_t>(grid.dims())) {
            throw ConfigError(v.child("fields") + " must be an array with one scalar spec per axis");
        }
        std::vector<SpectralScalarField> comps;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            comps.push_back(build_field(arr[i], grid,
                                        v.child("fields") + "[" + std::to_string(i) + "]"));
        }
        out = VectorFieldOnGrid(std::move(comps));
    } else {
        throw ConfigError(v.child("type") +
                          " must be one of zero, constant, stream, random, components");
    }
    v.finish();
    return out;
}

DifferentialForm build_form(const nlohmann::json& spec, const PeriodicGrid& grid,
                            const std::string& path) {
    ObjectView v(spec, path);
    FormGrade grade = parse_grade(v.text("grade"), v.child("grade"));
    std::string type = v.text("type");
    int ncomp = component_count(grade, grid.dims());
    DifferentialForm out(grade, grid);
    if (type == "random") {
        std::uint64_t seed = v.uinteger("seed");
        int kmax = checked_kmax(v, grid);
        double amplitude = v.number_or("amplitude", 1.0);
        out = random_form(grade, grid, seed, kmax);
        out *= amplitude;
    } else if (type == "components") {
        const nlohmann::json& arr = v.require("fields");
        if (!arr.is_array() || arr.size() != static_cast<std::size_t>(ncomp)) {
            throw ConfigError(v.child("fields") + " must be an array of " +
                              std::to_string(ncomp) + " scalar specs for grade " +
                              grade_name(grade));
        }
        std::vector<SpectralScalarField> comps;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            comps.push_back(build_field(arr[i], grid,
                                        v.child("fields") + "[" + std::to_string(i) + "]"));
        }
        out = DifferentialForm(grade, std::move(comps));
    } else {
        throw ConfigError(v.child("type") + " must be 'random' or 'components'");
    }
    v.finish();
    return out;
}

std::vector<SpectralScalarField> load_basis_streams(const std::string& dir, int K,
                                                    const PeriodicGrid& grid,
                                                    const std::string& path) {
    namespace fs = std::filesystem;
    if (grid.dims() != 2) {
        throw ConfigError(path + ": POD noise bases apply to 2D runs only");
    }
    std::string csv = (fs::path(dir) / "eigenvalues.csv").string();
    std::FILE* f = std::fopen(csv.c_str(), "r");
    if (f == nullptr) {
        throw ConfigError(path + ": cannot open '" + csv + "'");
    }
    std::vector<double> lambda_sq;
    char line[256];
    bool header = true;
    while (std::fgets(line, sizeof line, f) != nullptr) {
        if (header) {
            header = false;
            continue;
        }
        unsigned long idx = 0;
        double val = 0.0;
        if (std::sscanf(line, "%lu,%lf", &idx, &val) == 2) {
            lambda_sq.push_back(val);
        }
    }
    std::fclose(f);
    if (static_cast<std::size_t>(K) > lambda_sq.size()) {
        throw ConfigError(path + ": basis holds " + std::to_string(lambda_sq.size()) +
                          " modes, K = " + std::to_string(K) + " requested");
    }

    std::vector<SpectralScalarField> streams;
    for (int i = 0; i < K; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "mode_%02d", i);
        std::string base = (fs::path(dir) / name).string();
        SpectralScalarField u0 = read_field(base + ".c0.gfsf");
        SpectralScalarField u1 = read_field(base + ".c1.gfsf");
        if (u0.grid() != grid || u1.grid() != grid) {
            throw ConfigError(path + ": basis mode " + std::to_string(i) +
                              " lives on a different grid than the config declares");
        }
        VectorFieldOnGrid mode(std::vector<SpectralScalarField>{u0, u1});
        double div = max_divergence(mode);
        if (div > 1e-8) {
            throw ConfigError(path + ": basis mode " + std::to_string(i) +
                              " is not divergence-free (residual " + std::to_string(div) + ")");
        }
        // u = perp_grad(xi) makes curl u = Laplacian xi; invert with the
        // zero-mean gauge to recover the stream function
        SpectralScalarField vort = partial_derivative(u1, 0) - partial_derivative(u0, 1);
        SpectralScalarField xi = invert_helmholtz(vort, 0.0);
        xi *= std::sqrt(std::max(lambda_sq[static_cast<std::size_t>(i)], 0.0));
        streams.push_back(std::move(xi));
    }
    return streams;
}

SqgDocument parse_sqg_config(const std::string& json_text) {
    return parse_sqg_config(parse_json_document(json_text));
}

SqgDocument parse_sqg_config(const nlohmann::json& doc) {
    ObjectView v(doc, "config");
    SqgDocument out;
    SQGRunConfig& run = out.run;

    PeriodicGrid grid = parse_grid(v.require("grid"), v.child("grid"));
    if (grid.dims() != 2) {
        throw ConfigError("config.grid: the flow solver is 2D");
    }

    run.params.F = v.number_or("F", 0.0);
    run.params.beta = v.number_or("beta", 0.0);
    run.params.f0 = v.number_or("f0", 0.0);
    if (run.params.F < 0.0) {
        throw ConfigError("config.F must be >= 0");
    }

    run.dt = v.number("dt");
    if (!(run.dt > 0.0)) {
        throw ConfigError("config.dt must be > 0");
    }
    run.steps = v.integer("steps");
    if (run.steps < 0) {
        throw ConfigError("config.steps must be >= 0");
    }
    run.scheme = parse_sqg_scheme(v.text("scheme"), "config.scheme");
    run.seed = v.uinteger_or("seed", 0);

    run.mu0 = build_field(v.require("initial"), grid, "config.initial");

    if (const nlohmann::json* noise = v.optional("noise")) {
        run.noise_streams = parse_noise_streams(*noise, grid, "config.noise");
    } else if (run.scheme != SQGScheme::deterministic) {
        throw ConfigError("config: stochastic schemes need a noise block");
    }

    run.snapshot_every = v.integer_or("snapshot_every", 0);
    if (run.snapshot_every < 0) {
        throw ConfigError("config.snapshot_every must be >= 0");
    }
    run.diagnostic_every = v.integer_or("diagnostic_every", 1);
    if (run.diagnostic_every < 1) {
        throw ConfigError("config.diagnostic_every must be >= 1");
    }

    if (const nlohmann::json* filt = v.optional("filter")) {
        ObjectView fv(*filt, "config.filter");
        run.params.filter_nu = fv.number_or("nu", 0.0);
        std::int64_t order = fv.integer_or("order", 1);
        fv.finish();
        if (run.params.filter_nu < 0.0) {
            throw ConfigError("config.filter.nu must be >= 0");
        }
        if (order < 1 || order > 8) {
            throw ConfigError("config.filter.order must lie in [1, 8]");
        }
        run.params.filter_order = static_cast<int>(order);
    }

    run.out_dir = v.text_or("out_dir", "");
    out.log_level = parse_log_level(v);
    v.finish();
    return out;
}

TransportRunConfig parse_transport_config(const std::string& json_text) {
    return parse_transport_config(parse_json_document(json_text));
}

TransportRunConfig parse_transport_config(const nlohmann::json& doc) {
    ObjectView v(doc, "config");
    TransportRunConfig out;

    out.experiment = v.text("experiment");
    const bool kinematic = out.experiment == "form" || out.experiment == "kelvin" ||
                           out.experiment == "helicity" || out.experiment == "flux";
    if (!kinematic && out.experiment != "pv") {
        throw ConfigError("config.experiment must be one of form, kelvin, helicity, flux, pv");
    }

    out.grid = parse_grid(v.require("grid"), "config.grid");
    out.scheme = parse_transport_scheme(v.text("scheme"), "config.scheme");
    out.dt = v.number("dt");
    if (!(out.dt > 0.0)) {
        throw ConfigError("config.dt must be > 0");
    }
    out.steps = v.integer("steps");
    if (out.steps < 1) {
        throw ConfigError("config.steps must be >= 1");
    }
    out.seed = v.uinteger_or("seed", 0);
    out.record_every = v.integer_or("record_every", 1);
    if (out.record_every < 1) {
        throw ConfigError("config.record_every must be >= 1");
    }

    if (kinematic) {
        VectorFieldOnGrid drift(out.grid);
        if (const nlohmann::json* d = v.optional("drift")) {
            drift = build_vector_field(*d, out.grid, "config.drift");
        }
        std::vector<VectorFieldOnGrid> noise;
        if (const nlohmann::json* n = v.optional("noise")) {
            ObjectView nv(*n, "config.noise");
            const nlohmann::json& arr = nv.require("fields");
            if (!arr.is_array()) {
                throw ConfigError("config.noise.fields must be an array");
            }
            for (std::size_t i = 0; i < arr.size(); ++i) {
                noise.push_back(build_vector_field(
                    arr[i], out.grid, "config.noise.fields[" + std::to_string(i) + "]"));
            }
            nv.finish();
        }
        out.flow.drift = std::move(drift);
        out.flow.noise = std::move(noise);
        out.flow.incompressible = v.flag_or("incompressible", true);
        try {
            validate_flow(out.flow);
        } catch (const InvalidArgument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }

        out.form = build_form(v.require("form"), out.grid, "config.form");
        if (out.experiment == "helicity" &&
            (out.grid.dims() != 3 || out.form.grade() != FormGrade::one_form)) {
            throw ConfigError("config: helicity experiments need a 3D one_form");
        }
        if ((out.experiment == "kelvin" || out.experiment == "flux") &&
            out.form.grade() != FormGrade::one_form) {
            throw ConfigError("config: loop experiments need a one_form");
        }

        if (out.experiment == "kelvin" || out.experiment == "flux") {
            ObjectView lv(v.require("loop"), "config.loop");
            auto center = number_array(lv.require("center"), "config.loop.center",
                                       static_cast<std::size_t>(out.grid.dims()));
            double radius = lv.number("radius");
            std::int64_t vertices = lv.integer("vertices");
            std::array<int, 2> axes{0, 1};
            if (const nlohmann::json* ax = lv.optional("axes")) {
                auto a = integer_array(*ax, "config.loop.axes", 2);
                axes = {static_cast<int>(a[0]), static_cast<int>(a[1])};
            }
            lv.finish();
            std::array<double, 3> c{0.0, 0.0, 0.0};
            for (std::size_t a = 0; a < center.size(); ++a) {
                c[a] = center[a];
            }
            try {
                out.loop = make_circle_loop(out.grid, c, radius, static_cast<int>(vertices), axes);
            } catch (const InvalidArgument& e) {
                throw ConfigError(std::string("config.loop: ") + e.what());
            }
        }
    } else {
        if (out.grid.dims() != 2) {
            throw ConfigError("config.grid: pv experiments are 2D");
        }
        if (const nlohmann::json* p = v.optional("sqg")) {
            ObjectView pv(*p, "config.sqg");
            out.params.F = pv.number_or("F", 0.0);
            out.params.beta = pv.number_or("beta", 0.0);
            out.params.f0 = pv.number_or("f0", 0.0);
            pv.finish();
            if (out.params.F < 0.0) {
                throw ConfigError("config.sqg.F must be >= 0");
            }
        }
        out.mu0 = build_field(v.require("initial"), out.grid, "config.initial");
        const nlohmann::json& arr = v.require("streams");
        if (!arr.is_array() || arr.empty()) {
            throw ConfigError("config.streams must be a non-empty array of scalar specs");
        }
        for (std::size_t i = 0; i < arr.size(); ++i) {
            out.streams.push_back(build_field(arr[i], out.grid,
                                              "config.streams[" + std::to_string(i) + "]"));
        }
        ObjectView tv(v.require("tracers"), "config.tracers");
        std::int64_t count = tv.integer("count");
        if (count < 1) {
            throw ConfigError("config.tracers.count must be >= 1");
        }
        out.tracer_count = static_cast<int>(count);
        out.tracer_seed = tv.uinteger_or("seed", 1);
        tv.finish();
    }

    out.out_dir = v.text_or("out_dir", "");
    out.log_level = parse_log_level(v);
    v.finish();
    return out;
}

PodRunConfig parse_pod_config(const std::string& json_text) {
    return parse_pod_config(parse_json_document(json_text));
}

PodRunConfig parse_pod_config(const nlohmann::json& doc) {
    ObjectView v(doc, "config");
    PodRunConfig out;
    out.snapshot_dir = v.text("snapshot_dir");
    std::int64_t K = v.integer("K");
    if (K < 1) {
        throw ConfigError("config.K must be >= 1");
    }
    out.K = static_cast<int>(K);
    out.options.center = v.flag_or("center", false);
    out.options.divergence_free = v.flag_or("divergence_free", false);
    out.out_dir = v.text_or("out_dir", "");
    out.log_level = parse_log_level(v);
    v.finish();
    return out;
}

}  // namespace sgfd
