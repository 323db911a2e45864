#pragma once
// JSON (de)serialization of function specs and model configs.
//
// f0 schema:
//   {"kind": "power" | "flat_then_power", "mode": "regression" | "density",
//    "c": 1, "p": 1, "r0": 0,                 symmetric branches, or
//    "left": {"c","p","r0"}, "right": {...},   asymmetric branches,
//    "support_right": 1}                        density only
//   {"kind": "piecewise_linear", "mode": ..., "knots": [...], "values": [...]}
//   {"kind": "table", "mode": ..., "t0": -1, "dt": 0.5, "values": [...]}

#include <cmath>
#include <initializer_list>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "isorate/errors.hpp"
#include "isorate/funcspace.hpp"
#include "isorate/models.hpp"

namespace isorate {

using json = nlohmann::json;

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

inline void require_object(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path, "expected an object");
}

inline void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
    std::set<std::string> k(known.begin(), known.end());
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!k.count(it.key())) throw ConfigError(join_path(path, it.key()), "unknown field");
}

inline double get_number(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(join_path(path, key), "missing");
    const json& v = j.at(key);
    if (!v.is_number()) throw ConfigError(join_path(path, key), "expected a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(join_path(path, key), "not finite");
    return x;
}

inline double get_number(const json& j, const char* key, const std::string& path, double dflt) {
    return j.contains(key) ? get_number(j, key, path) : dflt;
}

inline std::uint64_t get_u64(const json& j, const char* key, const std::string& path, std::uint64_t dflt) {
    if (!j.contains(key)) return dflt;
    const json& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ConfigError(join_path(path, key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

inline std::string get_string(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(join_path(path, key), "missing");
    if (!j.at(key).is_string()) throw ConfigError(join_path(path, key), "expected a string");
    return j.at(key).get<std::string>();
}

inline std::string get_string(const json& j, const char* key, const std::string& path, const std::string& dflt) {
    return j.contains(key) ? get_string(j, key, path) : dflt;
}

inline std::vector<double> get_numbers(const json& j, const char* key, const std::string& path) {
    if (!j.contains(key)) throw ConfigError(join_path(path, key), "missing");
    const json& v = j.at(key);
    if (!v.is_array()) throw ConfigError(join_path(path, key), "expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::string p = join_path(path, key) + "[" + std::to_string(i) + "]";
        if (!v[i].is_number()) throw ConfigError(p, "expected a number");
        out.push_back(v[i].get<double>());
    }
    return out;
}

inline PowerBranch branch_from_json(const json& j, const std::string& path) {
    require_object(j, path);
    reject_unknown(j, path, {"c", "p", "r0"});
    return PowerBranch{get_number(j, "c", path), get_number(j, "p", path), get_number(j, "r0", path, 0.0)};
}

inline json branch_to_json(const PowerBranch& b) { return json{{"c", b.c}, {"p", b.p}, {"r0", b.r0}}; }

// Rebase ConfigErrors raised by the factories under `path`.
template <class F>
auto with_path(const std::string& path, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        std::string msg = e.what();
        if (!e.field.empty()) msg = msg.substr(e.field.size() + 2);
        throw ConfigError(e.field.empty() ? path : join_path(path, e.field), msg);
    }
}

}  // namespace detail

inline SpecMode mode_from_string(const std::string& s, const std::string& path) {
    if (s == "regression") return SpecMode::regression;
    if (s == "density") return SpecMode::density;
    throw ConfigError(path, "unknown mode '" + s + "'");
}

inline MonotoneFunctionSpec spec_from_json(const json& j, const std::string& path = "f0") {
    using namespace detail;
    require_object(j, path);
    std::string kind = get_string(j, "kind", path);
    SpecMode mode = mode_from_string(get_string(j, "mode", path, "regression"), join_path(path, "mode"));
    if (kind == "power" || kind == "flat_then_power") {
        reject_unknown(j, path, {"kind", "mode", "c", "p", "r0", "left", "right", "support_right"});
        double support = get_number(j, "support_right", path, 1.0);
        if (mode == SpecMode::regression && j.contains("support_right"))
            throw ConfigError(join_path(path, "support_right"), "only valid in density mode");
        PowerBranch left, right;
        if (j.contains("left") || j.contains("right")) {
            for (const char* k : {"c", "p", "r0"})
                if (j.contains(k)) throw ConfigError(join_path(path, k), "give either c/p/r0 or left/right");
            left = branch_from_json(j.contains("left") ? j.at("left") : json(), join_path(path, "left"));
            right = branch_from_json(j.contains("right") ? j.at("right") : json(), join_path(path, "right"));
        } else {
            left = right = PowerBranch{get_number(j, "c", path), get_number(j, "p", path),
                                       get_number(j, "r0", path, 0.0)};
        }
        SpecKind k = kind == "power" ? SpecKind::power : SpecKind::flat_then_power;
        return with_path(path, [&] { return MonotoneFunctionSpec::branches(k, left, right, mode, support); });
    }
    if (kind == "piecewise_linear") {
        reject_unknown(j, path, {"kind", "mode", "knots", "values"});
        auto knots = get_numbers(j, "knots", path);
        auto values = get_numbers(j, "values", path);
        return with_path(path, [&] { return MonotoneFunctionSpec::piecewise_linear(knots, values, mode); });
    }
    if (kind == "table") {
        reject_unknown(j, path, {"kind", "mode", "t0", "dt", "values"});
        double t0 = get_number(j, "t0", path), dt = get_number(j, "dt", path);
        auto values = get_numbers(j, "values", path);
        return with_path(path, [&] { return MonotoneFunctionSpec::table(t0, dt, values, mode); });
    }
    throw ConfigError(join_path(path, "kind"), "unknown kind '" + kind + "'");
}

inline json spec_to_json(const MonotoneFunctionSpec& s) {
    json j;
    j["kind"] = to_string(s.kind());
    j["mode"] = to_string(s.mode());
    switch (s.kind()) {
        case SpecKind::power:
        case SpecKind::flat_then_power:
            if (s.left_branch() == s.right_branch()) {
                j["c"] = s.right_branch().c;
                j["p"] = s.right_branch().p;
                if (s.kind() == SpecKind::flat_then_power) j["r0"] = s.right_branch().r0;
            } else {
                j["left"] = detail::branch_to_json(s.left_branch());
                j["right"] = detail::branch_to_json(s.right_branch());
            }
            if (s.mode() == SpecMode::density) j["support_right"] = s.support_right();
            break;
        case SpecKind::piecewise_linear:
            j["knots"] = s.piecewise()->knots;
            j["values"] = s.piecewise()->values;
            break;
        case SpecKind::table:
            j["t0"] = s.piecewise()->t0;
            j["dt"] = s.piecewise()->dt;
            j["values"] = s.piecewise()->values;
            break;
        case SpecKind::derived: throw InvalidInput("spec_to_json: derived specs are not serializable");
    }
    return j;
}

inline ModelKind model_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "wn" || s == "white_noise") return ModelKind::white_noise;
    if (s == "grid") return ModelKind::grid;
    if (s == "random" || s == "random_design") return ModelKind::random_design;
    if (s == "density") return ModelKind::density;
    throw ConfigError(path, "unknown model '" + s + "'");
}

inline ErrorKind error_kind_from_string(const std::string& s, const std::string& path) {
    if (s == "gaussian") return ErrorKind::gaussian;
    if (s == "uniform") return ErrorKind::uniform;
    if (s == "laplace") return ErrorKind::laplace;
    throw ConfigError(path, "unknown error law '" + s + "'");
}

// {"kind": "grid", "n": 1000, "sigma": 1, "errors": "gaussian", "design_slope": 0, "grid_points": 0}
// White noise accepts "epsilon" in place of "n".
inline ModelConfig model_from_json(const json& j, const std::string& path = "model") {
    using namespace detail;
    require_object(j, path);
    reject_unknown(j, path, {"kind", "n", "epsilon", "sigma", "errors", "design_slope", "grid_points"});
    ModelConfig m;
    m.kind = model_kind_from_string(get_string(j, "kind", path), join_path(path, "kind"));
    if (j.contains("n") && j.contains("epsilon")) throw ConfigError(join_path(path, "epsilon"), "give n or epsilon");
    if (j.contains("epsilon")) {
        if (m.kind != ModelKind::white_noise)
            throw ConfigError(join_path(path, "epsilon"), "only valid for the white noise model");
        double e = get_number(j, "epsilon", path);
        if (!(e > 0)) throw ConfigError(join_path(path, "epsilon"), "must be > 0");
        m.n = 1.0 / (e * e);
    } else {
        m.n = get_number(j, "n", path, m.n);
    }
    if (!(m.n > 0)) throw ConfigError(join_path(path, "n"), "must be > 0");
    m.sigma = get_number(j, "sigma", path, m.sigma);
    if (!(m.sigma > 0)) throw ConfigError(join_path(path, "sigma"), "must be > 0");
    m.errors = error_kind_from_string(get_string(j, "errors", path, "gaussian"), join_path(path, "errors"));
    m.design.slope = get_number(j, "design_slope", path, 0.0);
    if (!(std::abs(m.design.slope) <= 1)) throw ConfigError(join_path(path, "design_slope"), "must lie in [-1, 1]");
    m.grid_points = std::size_t(get_u64(j, "grid_points", path, 0));
    return m;
}

inline json model_to_json(const ModelConfig& m) {
    return json{{"kind", to_string(m.kind)},
                {"n", m.n},
                {"sigma", m.sigma},
                {"errors", to_string(m.errors)},
                {"design_slope", m.design.slope},
                {"grid_points", m.grid_points}};
}

}  // namespace isorate
