#pragma once
// Experiment configs, dispatch to the library, result bundles and file output.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "isorate/limitdist.hpp"
#include "isorate/minimax.hpp"
#include "isorate/models.hpp"
#include "isorate/spec_json.hpp"

namespace isorate {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kResultSchema = "isorate.result/1";

enum class Command { rates, estimate, simulate_limit, coverage, minimax };

inline const char* to_string(Command c) {
    switch (c) {
        case Command::rates: return "rates";
        case Command::estimate: return "estimate";
        case Command::simulate_limit: return "simulate-limit";
        case Command::coverage: return "coverage";
        case Command::minimax: return "minimax";
    }
    return "?";
}

inline Command command_from_string(const std::string& s) {
    for (Command c : {Command::rates, Command::estimate, Command::simulate_limit, Command::coverage,
                      Command::minimax})
        if (s == to_string(c)) return c;
    throw ConfigError("command", "unknown command '" + s + "'");
}

struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    Command command = Command::rates;
    MonotoneFunctionSpec f0;
    ModelConfig model;
    double C = 0;                  // 0 = calibrated from alpha (coverage, minimax) or 1
    std::vector<double> n_values;  // rates: sample sizes; empty = {model.n}
    std::uint64_t reps = 0;        // 0 = command default
    std::uint64_t seed = 0;
    std::string out = "out";
    double alpha = 0;  // 0 = 0.1 (coverage) or 0.2 (minimax)
    double beta = 0.25;
    double delta = 0;  // minimax: 0 = delta*
    double eta = 0;    // minimax: 0 = delta/4
    LimitProcessSpec limit;
    double refine_tol = 0.1;          // white noise: mean |f(G) - f(2G)| / threshold
    std::uint64_t refine_reps = 50;   // 0 disables the refinement check

    bool operator==(const ExperimentConfig&) const = default;
};

inline std::uint64_t default_reps(Command c) {
    switch (c) {
        case Command::rates: return 1;
        case Command::estimate: return 1;
        case Command::simulate_limit: return 1000;
        case Command::coverage: return 2000;
        case Command::minimax: return 2000;
    }
    return 1;
}

// Fills every automatic field so the echoed config is self-describing.
inline void materialize_defaults(ExperimentConfig& c) {
    if (c.reps == 0) c.reps = default_reps(c.command);
    if (c.alpha == 0) c.alpha = c.command == Command::minimax ? 0.2 : 0.1;
    if (!(c.alpha > 0 && c.alpha < 1)) throw ConfigError("alpha", "must lie in (0, 1)");
    if (!(c.beta > 0 && c.beta < 0.5)) throw ConfigError("beta", "must lie in (0, 1/2)");
    if (c.C == 0) {
        bool calibrate = c.command == Command::coverage || c.command == Command::minimax;
        c.C = calibrate ? calibrated_C(c.alpha, c.model, c.f0) : 1.0;
    }
    if (!(c.C > 0)) throw ConfigError("C", "must be > 0");
    if (c.command == Command::rates && c.n_values.empty()) c.n_values = {c.model.n};
    for (std::size_t i = 0; i < c.n_values.size(); ++i)
        if (!(c.n_values[i] > 0)) throw ConfigError("n_values[" + std::to_string(i) + "]", "must be > 0");
    if (c.command != Command::simulate_limit && c.command != Command::rates &&
        (c.model.kind == ModelKind::density) != (c.f0.mode() == SpecMode::density))
        throw ConfigError("f0.mode", "does not match the model kind");
    if (c.model.kind == ModelKind::white_noise && c.model.grid_points == 0 &&
        (c.command == Command::estimate || c.command == Command::coverage || c.command == Command::minimax))
        c.model.grid_points = wn_grid_points(c.f0, c.model.epsilon());
    if (c.command == Command::minimax && !(c.delta >= 0 && c.delta <= 1))
        throw ConfigError("delta", "must lie in (0, 1]");
    if (!(c.eta >= 0)) throw ConfigError("eta", "must be > 0");
    if (!(c.refine_tol > 0)) throw ConfigError("refine_tol", "must be > 0");
    c.limit.validate();
}

inline json limit_to_json(const LimitProcessSpec& s) {
    return json{{"alpha_rv", s.alpha_rv}, {"gamma", s.gamma},       {"window", s.window},
                {"step", s.step},         {"left_tail", s.left_tail}, {"tail_cap", s.tail_cap}};
}

inline LimitProcessSpec limit_from_json(const json& j, const std::string& path = "limit") {
    using namespace detail;
    require_object(j, path);
    reject_unknown(j, path, {"alpha_rv", "gamma", "window", "step", "left_tail", "tail_cap"});
    LimitProcessSpec s;
    s.alpha_rv = get_number(j, "alpha_rv", path, s.alpha_rv);
    s.gamma = get_number(j, "gamma", path, s.gamma);
    s.window = get_number(j, "window", path, s.window);
    s.step = get_number(j, "step", path, s.step);
    s.left_tail = get_number(j, "left_tail", path, s.left_tail);
    s.tail_cap = get_number(j, "tail_cap", path, s.tail_cap);
    with_path(path, [&] { s.validate(); return 0; });
    return s;
}

inline json config_to_json(const ExperimentConfig& c) {
    json j{{"schema_version", c.schema_version},
           {"command", to_string(c.command)},
           {"model", model_to_json(c.model)},
           {"C", c.C},
           {"n_values", c.n_values},
           {"reps", c.reps},
           {"seed", c.seed},
           {"out", c.out},
           {"alpha", c.alpha},
           {"beta", c.beta},
           {"delta", c.delta},
           {"eta", c.eta},
           {"limit", limit_to_json(c.limit)},
           {"refine_tol", c.refine_tol},
           {"refine_reps", c.refine_reps}};
    if (c.f0.kind() != SpecKind::derived) j["f0"] = spec_to_json(c.f0);
    return j;
}

inline ExperimentConfig config_from_json(const json& j) {
    using namespace detail;
    require_object(j, "");
    reject_unknown(j, "", {"schema_version", "command", "f0", "model", "C", "n_values", "reps", "seed", "out",
                           "alpha", "beta", "delta", "eta", "limit", "refine_tol", "refine_reps"});
    ExperimentConfig c;
    c.schema_version = int(get_u64(j, "schema_version", "", kSchemaVersion));
    if (c.schema_version != kSchemaVersion)
        throw ConfigError("schema_version", "unsupported version " + std::to_string(c.schema_version));
    c.command = command_from_string(get_string(j, "command", ""));
    if (j.contains("f0")) c.f0 = spec_from_json(j.at("f0"), "f0");
    else if (c.command != Command::simulate_limit) throw ConfigError("f0", "missing");
    if (j.contains("model")) c.model = model_from_json(j.at("model"), "model");
    else if (c.command == Command::estimate || c.command == Command::coverage || c.command == Command::minimax)
        throw ConfigError("model", "missing");
    c.C = get_number(j, "C", "", 0.0);
    if (j.contains("n_values")) c.n_values = get_numbers(j, "n_values", "");
    c.reps = get_u64(j, "reps", "", 0);
    c.seed = get_u64(j, "seed", "", 0);
    c.out = get_string(j, "out", "", c.out);
    c.alpha = get_number(j, "alpha", "", 0.0);
    c.beta = get_number(j, "beta", "", c.beta);
    c.delta = get_number(j, "delta", "", 0.0);
    c.eta = get_number(j, "eta", "", 0.0);
    if (j.contains("limit")) c.limit = limit_from_json(j.at("limit"), "limit");
    c.refine_tol = get_number(j, "refine_tol", "", c.refine_tol);
    c.refine_reps = get_u64(j, "refine_reps", "", c.refine_reps);
    return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("", std::string("malformed JSON: ") + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// results

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct ResultBundle {
    std::string schema = kResultSchema;
    ExperimentConfig config;
    json summary = json::object();
    json diagnostics = json::object();
    std::map<std::string, Table> tables;
    std::map<std::string, std::string> files;  // extra CSV files, verbatim
    std::vector<double> sample;                // primary per-replicate statistic
    std::string sample_name;
    bool diagnostic_failure = false;
};

inline std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string table_csv(const Table& t) {
    std::string s = "# schema_version=" + std::to_string(kSchemaVersion) + "\n";
    for (std::size_t k = 0; k < t.columns.size(); ++k) s += (k ? "," : "") + t.columns[k];
    s += '\n';
    for (const auto& row : t.rows) {
        for (std::size_t k = 0; k < row.size(); ++k) s += (k ? "," : "") + format_number(row[k]);
        s += '\n';
    }
    return s;
}

inline json mc_to_json(const McSummary& m) {
    return json{{"estimate", m.estimate}, {"se", m.se}, {"reps", m.reps},
                {"seed", json{{"master", m.seed.master_seed}, {"stream", m.seed.stream_id}}},
                {"bias_bound", m.bias_bound}, {"truncation_bound", m.truncation_bound}};
}

inline json bundle_to_json(const ResultBundle& b) {
    json j{{"schema", b.schema},
           {"schema_version", kSchemaVersion},
           {"config", config_to_json(b.config)},
           {"summary", b.summary},
           {"diagnostics", b.diagnostics}};
    json files = json::array();
    for (const auto& [name, t] : b.tables) files.push_back(name + ".csv");
    for (const auto& [name, s] : b.files) files.push_back(name);
    j["files"] = files;
    return j;
}

// Writes to a temporary sibling, then renames over the target.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        f << content;
        f.flush();
        if (!f) {
            f.close();
            std::filesystem::remove(tmp);
            throw std::runtime_error("write to " + tmp.string() + " failed");
        }
    }
    std::filesystem::rename(tmp, path);
}

inline void write_bundle(const ResultBundle& b, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, t] : b.tables) write_atomic(dir / (name + ".csv"), table_csv(t));
    for (const auto& [name, s] : b.files) write_atomic(dir / name, s);
    write_atomic(dir / "result.json", bundle_to_json(b).dump(2) + "\n");
}

// Least-squares slope of log y against log x.
inline double fit_loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2) throw InvalidInput("fit_loglog_slope: need >= 2 paired points");
    double mx = 0, my = 0;
    const double n = double(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0 && y[i] > 0)) throw InvalidInput("fit_loglog_slope: values must be positive");
        mx += std::log(x[i]) / n;
        my += std::log(y[i]) / n;
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double dx = std::log(x[i]) - mx;
        sxy += dx * (std::log(y[i]) - my);
        sxx += dx * dx;
    }
    if (sxx == 0) throw InvalidInput("fit_loglog_slope: x values are all equal");
    return sxy / sxx;
}

enum class PlotKind { survival, cdf, loglog_rate };

inline PlotKind plot_kind_from_string(const std::string& s) {
    if (s == "survival") return PlotKind::survival;
    if (s == "cdf") return PlotKind::cdf;
    if (s == "loglog-rate") return PlotKind::loglog_rate;
    throw InvalidInput("unknown plot kind '" + s + "'");
}

// Two-column CSV: (x, P(X >= x)), (x, P(X <= x)) or (log10 n, log10 a).
inline std::string emit_plotdata(const ResultBundle& b, PlotKind kind) {
    Table t;
    if (kind == PlotKind::loglog_rate) {
        auto it = b.tables.find("rates");
        if (it == b.tables.end() || it->second.rows.empty())
            throw InvalidInput("emit_plotdata: bundle has no rates table");
        t.columns = {"log10_n", "log10_a"};
        for (const auto& r : it->second.rows) t.rows.push_back({std::log10(r[0]), std::log10(r[1])});
        return table_csv(t);
    }
    if (b.sample.empty()) throw InvalidInput("emit_plotdata: bundle has no sample");
    std::vector<double> s = b.sample;
    std::sort(s.begin(), s.end());
    const double n = double(s.size());
    t.columns = {b.sample_name.empty() ? "x" : b.sample_name, kind == PlotKind::cdf ? "cdf" : "survival"};
    for (std::size_t i = 0; i < s.size();) {
        std::size_t j = i;
        while (j < s.size() && s[j] == s[i]) ++j;
        // survival: P(X >= s_i); cdf: P(X <= s_i)
        t.rows.push_back({s[i], kind == PlotKind::cdf ? double(j) / n : double(s.size() - i) / n});
        i = j;
    }
    return table_csv(t);
}

// ---------------------------------------------------------------------------
// commands

namespace detail {

inline json rates_json(const RateSolution& r) {
    return json{{"a", r.a}, {"r_a", r.r_a}, {"b", r.b}, {"r_b", r.r_b}, {"C", r.C}, {"n", r.n_or_inv_eps2},
                {"parametric_left", r.parametric_left}, {"parametric_right", r.parametric_right}};
}

inline ResultBundle run_rates(const ExperimentConfig& c) {
    ResultBundle b;
    Table t{{"n", "a", "r_a", "b", "r_b", "parametric_left", "parametric_right"}, {}};
    std::vector<double> ns, as;
    for (double n : c.n_values) {
        RateSolution r = solve_rates(c.f0, c.C, n);
        t.rows.push_back({n, r.a, r.r_a, r.b, r.r_b, double(r.parametric_left), double(r.parametric_right)});
        ns.push_back(n);
        as.push_back(r.a);
    }
    b.tables["rates"] = std::move(t);
    if (ns.size() >= 2) b.summary["loglog_slope_a"] = fit_loglog_slope(ns, as);
    return b;
}

inline ResultBundle run_estimate(const ExperimentConfig& c) {
    ResultBundle b;
    ModelSimulator sim(c.model, c.f0);
    SeedSpec seed{c.seed, 0};
    auto est = parallel_map(c.reps, [&](std::size_t i) { return estimate_ls(sim.draw(seed.offset(i))); });
    Table t{{"replicate", "estimate", "interior"}, {}};
    for (std::size_t i = 0; i < est.size(); ++i) {
        t.rows.push_back({double(i), est[i].value, double(est[i].interior)});
        b.sample.push_back(est[i].value);
    }
    b.sample_name = "estimate";
    b.tables["estimates"] = std::move(t);
    std::ostringstream os;
    os << "# schema_version=" << kSchemaVersion << "\n";
    write_csv(os, sim.draw(seed));
    b.files["draw.csv"] = os.str();
    b.summary["f0_at_zero"] = c.f0.value(0.0);
    b.summary["first_estimate"] = est.front().value;
    return b;
}

inline ResultBundle run_simulate_limit(const ExperimentConfig& c) {
    ResultBundle b;
    SlopeSample s = simulate_slope_at_zero(c.limit, c.reps, SeedSpec{c.seed, 0});
    Table t{{"replicate", "slope_pos", "slope_neg", "touched_boundary"}, {}};
    for (std::size_t i = 0; i < s.pairs.size(); ++i)
        t.rows.push_back({double(i), s.pairs[i].positive(), s.pairs[i].negative(), double(s.pairs[i].touched)});
    b.tables["limit_slopes"] = std::move(t);
    b.sample = s.draws;
    b.sample_name = "slope";
    McSummary m = summarize_mean(s.draws, s.seed);
    b.summary["mean_slope"] = mc_to_json(m);
    b.diagnostics["touched_fraction"] = s.touched_fraction;
    b.diagnostics["truncation_warning"] = s.truncation_warning;
    b.diagnostic_failure = s.truncation_warning;
    return b;
}

inline ResultBundle run_coverage(const ExperimentConfig& c) {
    ResultBundle b;
    RateSolution rs = solve_rates(c.f0, c.C, c.model.n);
    const double thr = std::max(rs.a, rs.b), theta = c.f0.value(0.0);
    ModelSimulator sim(c.model, c.f0);
    SeedSpec seed{c.seed, 0};
    auto est = parallel_map(c.reps, [&](std::size_t i) { return estimate_ls(sim.draw(seed.offset(i))); });
    Table t{{"replicate", "estimate", "error", "exceed", "interior"}, {}};
    std::size_t kept = 0, hits = 0;
    for (std::size_t i = 0; i < est.size(); ++i) {
        double e = est[i].value - theta;
        bool x = std::abs(e) >= thr;
        t.rows.push_back({double(i), est[i].value, e, double(x), double(est[i].interior)});
        if (!est[i].interior) continue;
        ++kept;
        hits += x;
        b.sample.push_back(e / thr);
    }
    b.sample_name = "normalized_error";
    b.tables["coverage"] = std::move(t);
    McSummary m;
    m.reps = kept;
    m.seed = seed;
    if (kept) {
        m.estimate = double(hits) / double(kept);
        m.se = std::sqrt(m.estimate * (1 - m.estimate) / double(kept));
    }
    b.summary["rates"] = rates_json(rs);
    b.summary["threshold"] = thr;
    b.summary["exceedance"] = mc_to_json(m);
    b.summary["target"] = c.alpha;
    b.summary["within_target"] = m.estimate <= c.alpha + 3 * m.se;
    b.diagnostics["drop_rate"] = c.reps ? double(c.reps - kept) / double(c.reps) : 0.0;
    if (c.model.kind == ModelKind::white_noise && c.refine_reps > 0) {
        // Same Brownian path on the doubled grid; the coarse path is its even knots.
        const std::size_t g = sim.config().grid_points;
        std::vector<double> fine = wn_knots(2 * g), mean(fine.size());
        for (std::size_t i = 0; i < fine.size(); ++i) mean[i] = c.f0.primitive(fine[i]);
        SeedSpec rseed = seed.offset(std::uint64_t(1) << 41);
        auto diffs = parallel_map(c.refine_reps, [&](std::size_t i) {
            WhiteNoiseDraw d = simulate_wn_on(c.f0, fine, mean, c.model.epsilon(), 2 * g, rseed.offset(i));
            std::vector<double> tk, vk;
            for (std::size_t k = 0; k < fine.size(); k += 2) {
                tk.push_back(fine[k]);
                vk.push_back(d.path.values()[k]);
            }
            double coarse = gcm(CumulativePath(tk, vk)).slope_at(0.0, Side::left);
            return std::abs(estimate_wn(d) - coarse) / thr;
        });
        double mean_diff = 0;
        for (double x : diffs) mean_diff += x / double(diffs.size());
        b.diagnostics["refinement_mean_relative_change"] = mean_diff;
        b.diagnostics["refinement_max_relative_change"] = *std::max_element(diffs.begin(), diffs.end());
        b.diagnostics["refinement_ok"] = mean_diff <= c.refine_tol;
        b.diagnostic_failure = mean_diff > c.refine_tol;
    }
    return b;
}

inline json risk_json(const RiskReport& r) {
    return json{{"estimator", r.estimator}, {"p0", mc_to_json(r.p0)}, {"p1", mc_to_json(r.p1)},
                {"max", r.max_risk},        {"max_se", r.max_se},     {"threshold", r.threshold},
                {"eta", r.eta},             {"delta", r.delta},       {"eta_a", r.eta_a},
                {"gamma_n", r.gamma_n}};
}

inline ResultBundle run_minimax(const ExperimentConfig& c) {
    ResultBundle b;
    RateSolution rs = solve_rates(c.f0, c.C, c.model.n);
    SeparationConstants k = model_constants(c.model, c.f0);
    double delta = c.delta > 0 ? c.delta : delta_star(c.model.kind, c.C, k, c.beta);
    double eta = c.eta > 0 ? c.eta : delta / 4;
    AlternativePair pair = build_alternative_for(c.f0, rs, delta);
    TwoPointExperiment ex(pair, c.model);
    SeedSpec seed{c.seed, 0};
    auto suite = estimator_suite(ex);
    auto reports = two_point_risk(ex, suite, eta, c.reps, seed);
    RiskReport upper = two_point_risk(ex, suite.front(), 1.0, c.reps, seed);
    McSummary l1 = empirical_l1(ex, c.reps, seed.offset(std::uint64_t(1) << 42));
    McSummary witness = l1;
    witness.estimate = 0.5 * (1 - 0.5 * l1.estimate);
    witness.se = 0.25 * l1.se;
    SeparationBounds sb = separation_bounds(pair, c.model.kind, c.C, k, c.beta);

    b.summary["rates"] = rates_json(rs);
    b.summary["alternative"] = json{{"delta", delta}, {"a", pair.a}, {"r_a", pair.r_a},
                                    {"s_delta_a", pair.s_delta_a}, {"plateau_end", pair.plateau_end},
                                    {"eta_a", pair.eta_a}, {"gamma_n", pair.gamma_n},
                                    {"branch", pair.branch == Side::right ? "right" : "left"},
                                    {"experimental", pair.experimental},
                                    {"theta0", pair.theta0()}, {"theta1", pair.theta1()}};
    b.summary["eta"] = eta;
    b.summary["l1_bound"] = sb.l1_bound;
    b.summary["delta_star"] = sb.delta_star;
    b.summary["empirical_l1"] = mc_to_json(l1);
    b.summary["lower_bound_witness"] = mc_to_json(witness);
    b.summary["ls_upper"] = risk_json(upper);
    json risks = json::array();
    for (const auto& r : reports) risks.push_back(risk_json(r));
    b.summary["risks"] = risks;

    Table t{{"replicate", "hypothesis"}, {}};
    for (const auto& r : reports) t.columns.push_back(r.estimator);
    for (int h = 0; h < 2; ++h)
        for (std::size_t i = 0; i < c.reps; ++i) {
            std::vector<double> row{double(i), double(h)};
            for (const auto& r : reports) row.push_back(h == 0 ? r.errors0[i] : r.errors1[i]);
            t.rows.push_back(std::move(row));
        }
    b.tables["minimax_errors"] = std::move(t);
    b.sample = reports.front().errors0;
    b.sample_name = "ls_error_h0";
    return b;
}

}  // namespace detail

inline ResultBundle run(ExperimentConfig config) {
    materialize_defaults(config);
    ResultBundle b;
    switch (config.command) {
        case Command::rates: b = detail::run_rates(config); break;
        case Command::estimate: b = detail::run_estimate(config); break;
        case Command::simulate_limit: b = detail::run_simulate_limit(config); break;
        case Command::coverage: b = detail::run_coverage(config); break;
        case Command::minimax: b = detail::run_minimax(config); break;
    }
    b.config = config;
    return b;
}

}  // namespace isorate
