#pragma once
// The four observation models: simulators and estimators of f0(0).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "isorate/convexcore.hpp"
#include "isorate/funcspace.hpp"
#include "isorate/stochastic.hpp"

namespace isorate {

enum class ErrorKind { gaussian, uniform, laplace };

inline const char* to_string(ErrorKind e) {
    switch (e) {
        case ErrorKind::gaussian: return "gaussian";
        case ErrorKind::uniform: return "uniform";
        case ErrorKind::laplace: return "laplace";
    }
    return "?";
}

inline double draw_error(Stream& g, ErrorKind kind, double sigma) {
    switch (kind) {
        case ErrorKind::gaussian: return sigma * g.normal();
        case ErrorKind::uniform: return g.uniform_centered(sigma);
        case ErrorKind::laplace: return g.laplace(sigma);
    }
    return 0;
}

// Design density on [-1,1]: g(x) = (1 + slope x)/2, |slope| <= 1. slope = 0 is uniform.
struct DesignSpec {
    double slope = 0.0;

    double density(double x) const { return (x < -1 || x > 1) ? 0.0 : 0.5 * (1 + slope * x); }
    double g0() const { return 0.5; }
    double quantile(double u) const {
        if (slope == 0) return 2 * u - 1;
        // (x+1)/2 + slope (x^2-1)/4 = u
        double a = slope / 4, b = 0.5, c = 0.5 - slope / 4 - u;
        double disc = std::max(0.0, b * b - 4 * a * c);
        return (2 * c) / (-b - std::sqrt(disc));
    }
    void validate() const {
        if (!(std::abs(slope) <= 1)) throw ConfigError("design.slope", "must lie in [-1, 1]");
    }
    bool operator==(const DesignSpec&) const = default;
};

struct WhiteNoiseDraw {
    CumulativePath path;
    double epsilon = 0;
    std::size_t grid_points = 0;  // knots per unit length
    MonotoneFunctionSpec spec;
};

struct GridDraw {
    std::size_t n = 0;
    std::vector<double> y;  // y[i + n] = Y_i, i = -n..n
    double sigma = 1;
    ErrorKind error_kind = ErrorKind::gaussian;

    double x(std::ptrdiff_t i) const { return double(i) / double(n); }
};

struct RandomDesignDraw {
    std::vector<double> x;  // sorted
    std::vector<double> y;  // responses in the order of x
    DesignSpec design;
    double sigma = 1;
    ErrorKind error_kind = ErrorKind::gaussian;
};

struct DensityDraw {
    std::vector<double> sample;  // sorted ascending
};

struct Estimate {
    double value = 0;
    bool interior = true;  // false for boundary cases of the random-design estimator
};

// ---------------------------------------------------------------------------
// white noise

// Uniform grid on [-1,1] with `per_unit` knots per unit length; knot per_unit is exactly 0.
inline std::vector<double> wn_knots(std::size_t per_unit) {
    if (per_unit < 1) throw InvalidInput("white noise grid needs at least 1 knot per unit");
    std::vector<double> t(2 * per_unit + 1);
    double g = double(per_unit);
    for (std::size_t k = 0; k < t.size(); ++k) t[k] = (double(k) - g) / g;
    return t;
}

// Knots per unit so that the natural scale G0^{-1}(H0^{-1}(eps)) holds `steps` grid steps.
inline std::size_t wn_grid_points(const MonotoneFunctionSpec& spec, double epsilon,
                                  double steps = 200, std::size_t floor_points = 1000) {
    if (!(epsilon > 0)) return floor_points;
    double r = 1.0;
    try {
        RateSolution rs = solve_rates(spec, 1.0, 1.0 / (epsilon * epsilon));
        r = std::min(rs.r_a, rs.r_b);
    } catch (const Infeasible&) {
    }
    return std::max(floor_points, std::size_t(std::ceil(steps / r)));
}

inline void require_regression(const MonotoneFunctionSpec& spec, const char* who) {
    if (spec.mode() != SpecMode::regression)
        throw InvalidInput(std::string(who) + ": spec must be in regression mode");
}

inline WhiteNoiseDraw simulate_wn_on(const MonotoneFunctionSpec& spec, const std::vector<double>& knots,
                                     const std::vector<double>& mean, double epsilon,
                                     std::size_t per_unit, SeedSpec seed) {
    BrownianGrid w = brownian_two_sided(seed, knots);
    std::vector<double> v(knots.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mean[i] + epsilon * w.values[i];
    return WhiteNoiseDraw{CumulativePath(knots, std::move(v)), epsilon, per_unit, spec};
}

inline WhiteNoiseDraw simulate_wn(const MonotoneFunctionSpec& spec, double epsilon,
                                  std::size_t grid_points, SeedSpec seed) {
    require_regression(spec, "simulate_wn");
    if (!(epsilon >= 0)) throw InvalidInput("simulate_wn: epsilon must be >= 0");
    std::vector<double> t = wn_knots(grid_points);
    std::vector<double> m(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) m[i] = spec.primitive(t[i]);
    return simulate_wn_on(spec, t, m, epsilon, grid_points, seed);
}

inline double estimate_wn(const WhiteNoiseDraw& d) {
    return gcm(d.path).slope_at(0.0, Side::left);
}

// ---------------------------------------------------------------------------
// regression on a grid

inline GridDraw simulate_grid(const MonotoneFunctionSpec& spec, std::size_t n, double sigma,
                              ErrorKind kind, SeedSpec seed) {
    require_regression(spec, "simulate_grid");
    if (n < 1) throw InvalidInput("simulate_grid: n must be >= 1");
    if (!(sigma >= 0)) throw InvalidInput("simulate_grid: sigma must be >= 0");
    GridDraw d;
    d.n = n;
    d.sigma = sigma;
    d.error_kind = kind;
    d.y.resize(2 * n + 1);
    Stream g(seed);
    for (std::size_t k = 0; k < d.y.size(); ++k) {
        double x = (double(k) - double(n)) / double(n);
        d.y[k] = spec.value(x) + draw_error(g, kind, sigma);
    }
    return d;
}

// Cumulative step-integral path on knots x_{-n-1} = -1-1/n, x_{-n}, ..., x_n.
inline CumulativePath grid_path(const GridDraw& d) {
    const std::size_t n = d.n;
    const double w = 1.0 / double(n);
    std::vector<double> t(2 * n + 2), v(2 * n + 2);
    // index j <-> knot x_{j-n-1}; knot x_0 is j = n+1
    for (std::size_t j = 0; j < t.size(); ++j) t[j] = (double(j) - double(n) - 1.0) / double(n);
    v[n + 1] = 0.0;
    for (std::size_t j = n + 2; j < t.size(); ++j) v[j] = v[j - 1] + d.y[j - 1] * w;  // Y_{j-n-1}
    for (std::size_t j = n + 1; j-- > 0;) v[j] = v[j + 1] - d.y[j] * w;  // Y_{j-n}
    return CumulativePath(std::move(t), std::move(v));
}

inline double estimate_grid(const GridDraw& d) { return gcm(grid_path(d)).slope_at(0.0, Side::left); }

// ---------------------------------------------------------------------------
// random design

inline RandomDesignDraw simulate_random_design(const MonotoneFunctionSpec& spec,
                                               const DesignSpec& design, std::size_t n,
                                               double sigma, ErrorKind kind, SeedSpec seed) {
    require_regression(spec, "simulate_random_design");
    design.validate();
    if (n < 2) throw InvalidInput("simulate_random_design: n must be >= 2");
    RandomDesignDraw d;
    d.design = design;
    d.sigma = sigma;
    d.error_kind = kind;
    Stream gx(seed, 1), ge(seed, 2);
    d.x.resize(n);
    for (double& x : d.x) x = design.quantile(gx.uniform());
    std::sort(d.x.begin(), d.x.end());
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) d.y[i] = spec.value(d.x[i]) + draw_error(ge, kind, sigma);
    return d;
}

// H on knots 0..n, H(i) = sum of the first i ordered responses.
inline CumulativePath random_design_path(const RandomDesignDraw& d) {
    std::vector<double> t(d.y.size() + 1), v(d.y.size() + 1);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = double(i);
    for (std::size_t i = 1; i < t.size(); ++i) v[i] = v[i - 1] + d.y[i - 1];
    return CumulativePath(std::move(t), std::move(v));
}

// m with X_(m-1) < 0 <= X_(m), 1-based; n+1 when no point is >= 0.
inline std::size_t random_design_index(const RandomDesignDraw& d) {
    return std::size_t(std::lower_bound(d.x.begin(), d.x.end(), 0.0) - d.x.begin()) + 1;
}

inline Estimate estimate_random(const RandomDesignDraw& d) {
    const std::size_t n = d.x.size();
    if (n < 2) throw InvalidInput("estimate_random: n must be >= 2");
    if (d.x.front() == d.x.back()) throw InvalidInput("estimate_random: degenerate design");
    std::size_t m = random_design_index(d);
    bool interior = m > 1 && m < n;
    std::size_t seg = std::min(m, n);  // segment (seg-1, seg]
    double v = gcm(random_design_path(d)).slope_at(double(seg) - 0.5, Side::left);
    return Estimate{v, interior};
}

// ---------------------------------------------------------------------------
// monotone density

inline DensityDraw simulate_density(const MonotoneFunctionSpec& spec, std::size_t n, SeedSpec seed) {
    if (spec.mode() != SpecMode::density)
        throw InvalidInput("simulate_density: spec must be in density mode");
    if (n < 1) throw InvalidInput("simulate_density: n must be >= 1");
    DensityDraw d;
    d.sample.resize(n);
    Stream g(seed);
    const double lo = std::nextafter(-1.0, 0.0);
    for (double& x : d.sample) x = std::max(lo, spec.quantile(g.uniform()));
    std::sort(d.sample.begin(), d.sample.end());
    return d;
}

// Empirical distribution function on knots -1, the distinct order statistics, and 0.
inline CumulativePath empirical_cdf_path(const DensityDraw& d) {
    const double n = double(d.sample.size());
    std::vector<double> t{-1.0}, v{0.0};
    bool have_zero = false;
    for (std::size_t i = 0; i < d.sample.size(); ++i) {
        double x = d.sample[i];
        if (!(x > -1.0)) throw InvalidInput("density sample must lie in (-1, inf)");
        if (!have_zero && x > 0.0) {
            t.push_back(0.0);
            v.push_back(double(i) / n);
            have_zero = true;
        }
        if (x == 0.0) have_zero = true;
        if (x == t.back()) v.back() = double(i + 1) / n;
        else {
            t.push_back(x);
            v.push_back(double(i + 1) / n);
        }
    }
    if (!have_zero) {
        t.push_back(0.0);
        v.push_back(1.0);
    }
    return CumulativePath(std::move(t), std::move(v));
}

inline double estimate_grenander(const DensityDraw& d, double at) {
    if (d.sample.empty()) throw InvalidInput("estimate_grenander: empty sample");
    if (at < -1.0) throw DomainError("estimate_grenander: point left of the support");
    CumulativePath p = empirical_cdf_path(d);
    if (at >= p.back()) return 0.0;
    return lcm_majorant(p).slope_at(at, Side::right);
}

// ---------------------------------------------------------------------------
// uniform access for experiments

enum class ModelKind { white_noise, grid, random_design, density };

inline const char* to_string(ModelKind m) {
    switch (m) {
        case ModelKind::white_noise: return "wn";
        case ModelKind::grid: return "grid";
        case ModelKind::random_design: return "random";
        case ModelKind::density: return "density";
    }
    return "?";
}

struct ModelConfig {
    ModelKind kind = ModelKind::white_noise;
    double n = 1000;  // sample size; eps^-2 for white noise
    double sigma = 1.0;
    ErrorKind errors = ErrorKind::gaussian;
    DesignSpec design{};
    std::size_t grid_points = 0;  // white noise knots per unit; 0 = automatic

    double epsilon() const { return 1.0 / std::sqrt(n); }
    std::size_t sample_size() const { return std::size_t(std::llround(n)); }
    bool operator==(const ModelConfig&) const = default;
};

using Draw = std::variant<WhiteNoiseDraw, GridDraw, RandomDesignDraw, DensityDraw>;

// Simulator with per-spec precomputation (white-noise mean path).
class ModelSimulator {
public:
    ModelSimulator(ModelConfig cfg, MonotoneFunctionSpec spec) : cfg_(cfg), spec_(std::move(spec)) {
        if (!(cfg_.n > 0)) throw ConfigError("n", "must be > 0");
        bool density = cfg_.kind == ModelKind::density;
        if (density != (spec_.mode() == SpecMode::density))
            throw ConfigError("f0.mode", density ? "density model needs a density-mode spec"
                                                 : "regression models need a regression-mode spec");
        if (cfg_.kind == ModelKind::white_noise) {
            if (cfg_.grid_points == 0) cfg_.grid_points = wn_grid_points(spec_, cfg_.epsilon());
            knots_ = wn_knots(cfg_.grid_points);
            mean_.resize(knots_.size());
            for (std::size_t i = 0; i < knots_.size(); ++i) mean_[i] = spec_.primitive(knots_[i]);
        }
    }

    const ModelConfig& config() const { return cfg_; }
    const MonotoneFunctionSpec& spec() const { return spec_; }
    const std::vector<double>& wn_grid() const { return knots_; }

    Draw draw(SeedSpec seed) const {
        switch (cfg_.kind) {
            case ModelKind::white_noise:
                return simulate_wn_on(spec_, knots_, mean_, cfg_.epsilon(), cfg_.grid_points, seed);
            case ModelKind::grid:
                return simulate_grid(spec_, cfg_.sample_size(), cfg_.sigma, cfg_.errors, seed);
            case ModelKind::random_design:
                return simulate_random_design(spec_, cfg_.design, cfg_.sample_size(), cfg_.sigma,
                                              cfg_.errors, seed);
            case ModelKind::density: return simulate_density(spec_, cfg_.sample_size(), seed);
        }
        throw InvalidInput("unknown model");
    }

private:
    ModelConfig cfg_;
    MonotoneFunctionSpec spec_;
    std::vector<double> knots_, mean_;
};

inline Estimate estimate_ls(const Draw& d) {
    struct V {
        Estimate operator()(const WhiteNoiseDraw& w) const { return {estimate_wn(w), true}; }
        Estimate operator()(const GridDraw& g) const { return {estimate_grid(g), true}; }
        Estimate operator()(const RandomDesignDraw& r) const { return estimate_random(r); }
        Estimate operator()(const DensityDraw& s) const { return {estimate_grenander(s, 0.0), true}; }
    };
    return std::visit(V{}, d);
}

// Cumulative path and split point on which the switch relation acts.
inline std::pair<CumulativePath, double> switch_path(const Draw& d) {
    struct V {
        std::pair<CumulativePath, double> operator()(const WhiteNoiseDraw& w) const { return {w.path, 0.0}; }
        std::pair<CumulativePath, double> operator()(const GridDraw& g) const { return {grid_path(g), 0.0}; }
        std::pair<CumulativePath, double> operator()(const RandomDesignDraw& r) const {
            return {random_design_path(r), double(std::min(random_design_index(r), r.x.size()))};
        }
        std::pair<CumulativePath, double> operator()(const DensityDraw& s) const {
            return {empirical_cdf_path(s), 0.0};
        }
    };
    return std::visit(V{}, d);
}

// {estimate >= a} evaluated through infima of the tilted cumulative path.
inline bool switch_indicator(const Draw& d, double a) {
    auto [path, split] = switch_path(d);
    if (std::holds_alternative<DensityDraw>(d)) return switch_event_majorant(path, a, split);
    return switch_event(path, a, split);
}

// ---------------------------------------------------------------------------
// CSV

inline void write_csv(std::ostream& os, const WhiteNoiseDraw& d) {
    os << "t,value\n";
    os.precision(17);
    for (std::size_t i = 0; i < d.path.size(); ++i) os << d.path.knots()[i] << ',' << d.path.values()[i] << '\n';
}
inline void write_csv(std::ostream& os, const GridDraw& d) {
    os << "i,x,y\n";
    os.precision(17);
    for (std::size_t k = 0; k < d.y.size(); ++k) {
        auto i = std::ptrdiff_t(k) - std::ptrdiff_t(d.n);
        os << i << ',' << d.x(i) << ',' << d.y[k] << '\n';
    }
}
inline void write_csv(std::ostream& os, const RandomDesignDraw& d) {
    os << "rank,x,y\n";
    os.precision(17);
    for (std::size_t i = 0; i < d.x.size(); ++i) os << i + 1 << ',' << d.x[i] << ',' << d.y[i] << '\n';
}
inline void write_csv(std::ostream& os, const DensityDraw& d) {
    os << "rank,x\n";
    os.precision(17);
    for (std::size_t i = 0; i < d.sample.size(); ++i) os << i + 1 << ',' << d.sample[i] << '\n';
}
inline void write_csv(std::ostream& os, const Draw& d) {
    std::visit([&](const auto& x) { write_csv(os, x); }, d);
}

}  // namespace isorate
