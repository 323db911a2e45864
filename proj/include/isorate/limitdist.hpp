#pragma once
// Limit processes X(s) = W_s + s^alpha (s >= 0), W_s + gamma^{alpha-1/2}|s|^alpha (s < 0):
// slope of the convex minorant at 0, exceedance probabilities, normalized estimators.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "isorate/convexcore.hpp"
#include "isorate/funcspace.hpp"
#include "isorate/models.hpp"
#include "isorate/stochastic.hpp"

namespace isorate {

struct LimitProcessSpec {
    double alpha_rv = 2.0;
    double gamma = 1.0;
    double window = 8.0;
    double step = 2e-3;
    double left_tail = 0.0;  // geometric extension of the left window; 0 = automatic
    double tail_cap = 1e5;

    void validate() const {
        if (!(alpha_rv > 1)) throw ConfigError("alpha_rv", "must be > 1");
        if (!(gamma >= 0)) throw ConfigError("gamma", "must be >= 0");
        if (!(window > 0)) throw ConfigError("window", "must be > 0");
        if (!(step > 0 && step < window / 100)) throw ConfigError("step", "must lie in (0, window/100)");
        if (!(left_tail >= 0)) throw ConfigError("left_tail", "must be >= 0");
    }
    double left_coefficient() const { return std::pow(gamma, alpha_rv - 0.5); }
    bool operator==(const LimitProcessSpec&) const = default;
};

namespace detail {

// Smallest S >= window with linear drift rate (lin + coef S^{alpha-1}) making
// 2 Phi(-rate sqrt(S)) negligible; capped.
inline double drift_horizon(double lin, double coef, double alpha, double window, double cap) {
    auto ok = [&](double S) { return (lin + coef * std::pow(S, alpha - 1)) * std::sqrt(S) >= 6.0; };
    double S = window;
    while (!ok(S) && S < cap) S *= 1.25;
    return std::min(S, cap);
}

// Uniform grid of step h on [-S, S] with exact 0, extended geometrically to -left_end.
inline std::vector<double> limit_grid(double S, double h, double left_end) {
    std::size_t m = std::size_t(std::llround(S / h));
    std::vector<double> tail;
    if (left_end > double(m) * h) {
        double pos = double(m) * h, d = h;
        while (pos < left_end) {
            d *= 1.02;
            pos = std::min(left_end, pos + d);
            tail.push_back(-pos);
        }
    }
    std::vector<double> t;
    t.reserve(tail.size() + 2 * m + 1);
    for (std::size_t k = tail.size(); k-- > 0;) t.push_back(tail[k]);
    for (std::size_t k = 0; k <= 2 * m; ++k) t.push_back((double(k) - double(m)) * h);
    return t;
}

}  // namespace detail

struct SlopePair {
    double left = 0, right = 0;
    bool touched = false;

    // Sign-consistent value at 0: right slope for the positive part, left slope
    // for the negative part, 0 when the kink at 0 straddles 0.
    double value() const {
        if (left >= 0) return right;
        if (right <= 0) return left;
        return 0.0;
    }
    double positive() const { return std::max(right, 0.0); }
    double negative() const { return std::max(-left, 0.0); }
};

struct SlopeSample {
    std::vector<double> draws;
    std::vector<SlopePair> pairs;
    LimitProcessSpec spec;
    SeedSpec seed;
    double touched_fraction = 0;
    bool truncation_warning = false;

    double exceedance(double c) const {
        std::size_t k = 0;
        for (double d : draws) k += d >= c;
        return draws.empty() ? 0.0 : double(k) / double(draws.size());
    }
};

// Grid actually used for X: left tail chosen so the left drift dominates.
inline std::vector<double> slope_grid(const LimitProcessSpec& spec) {
    double left = spec.left_tail > 0
                      ? spec.left_tail
                      : detail::drift_horizon(0.0, spec.left_coefficient(), spec.alpha_rv, spec.window,
                                              spec.tail_cap);
    return detail::limit_grid(spec.window, spec.step, left);
}

inline SlopePair slope_at_zero_once(const LimitProcessSpec& spec, const std::vector<double>& grid,
                                    SeedSpec seed) {
    BrownianGrid w = brownian_two_sided(seed, grid);
    const double k = spec.left_coefficient(), a = spec.alpha_rv;
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = grid[i];
        v[i] = w.values[i] + (s >= 0 ? std::pow(s, a) : k * std::pow(-s, a));
    }
    ConvexHullFit fit = gcm(CumulativePath(grid, std::move(v)));
    std::size_t li = fit.segment_index(0.0, Side::left), ri = fit.segment_index(0.0, Side::right);
    const auto& ab = fit.abscissae();
    SlopePair p;
    p.left = fit.segment_slope(li);
    p.right = fit.segment_slope(ri);
    p.touched = ab[li] == grid.front() || ab[ri + 1] == grid.back();
    return p;
}

inline SlopeSample simulate_slope_at_zero(const LimitProcessSpec& spec, std::size_t reps, SeedSpec seed) {
    spec.validate();
    if (reps < 1) throw InvalidInput("simulate_slope_at_zero: reps must be >= 1");
    std::vector<double> grid = slope_grid(spec);
    SlopeSample out;
    out.spec = spec;
    out.seed = seed;
    out.pairs = parallel_map(reps, [&](std::size_t i) { return slope_at_zero_once(spec, grid, seed.offset(i)); });
    out.draws.reserve(reps);
    std::size_t touched = 0;
    for (const auto& p : out.pairs) {
        out.draws.push_back(p.value());
        touched += p.touched;
    }
    out.touched_fraction = double(touched) / double(reps);
    out.truncation_warning = out.touched_fraction >= 0.01;
    return out;
}

// P(inf_{s<=0}(W_s + C k |s|^a - Cs) <= inf_{s>0}(W_s + C s^a - Cs)), k = gamma^{a-1/2}.
inline McSummary limit_exceedance(double alpha_rv, double gamma, double C, std::uint64_t reps, SeedSpec seed,
                                  double window = 8.0, double step = 2e-3) {
    LimitProcessSpec spec{alpha_rv, gamma, window, step};
    spec.validate();
    if (!(C > 0)) throw InvalidInput("limit_exceedance: C must be > 0");
    const double k = spec.left_coefficient(), a = alpha_rv;
    double left_end = detail::drift_horizon(C, C * k, a, window, spec.tail_cap);
    std::vector<double> grid = detail::limit_grid(window, step, left_end);
    std::vector<double> drift(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        double s = grid[i];
        drift[i] = s >= 0 ? C * std::pow(s, a) - C * s : C * k * std::pow(-s, a) - C * s;
    }
    auto event = [&](SeedSpec sd) {
        BrownianGrid w = brownian_two_sided(sd, grid);
        double L = std::numeric_limits<double>::infinity(), R = L;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double x = w.values[i] + drift[i];
            if (grid[i] <= 0) L = std::min(L, x); else R = std::min(R, x);
        }
        return L <= R;
    };
    McSummary s = mc_probability(event, reps, seed);
    double SL = -grid.front(), SR = grid.back();
    s.truncation_bound = drift_truncation_bound(C * (1 + k * std::pow(SL, a - 1)), SL) +
                         drift_truncation_bound(C * (std::pow(SR, a - 1) - 1), SR);
    return s;
}

// Replicates of (f(0)_+ / H0^{-1}(eps), f(0)_- / (-H0^{-1}(-eps))) in white noise.
inline std::vector<std::pair<double, double>> normalized_estimator_sample(
    const MonotoneFunctionSpec& spec, double epsilon, std::size_t reps, SeedSpec seed,
    std::size_t grid_points = 0, double delta = 0.1) {
    require_regression(spec, "normalized_estimator_sample");
    if (!(epsilon > 0)) throw InvalidInput("normalized_estimator_sample: epsilon must be > 0");
    double up = H0_inv(spec, epsilon, delta), down = -H0_inv(spec, -epsilon, delta);
    if (!(up > 0) || !(down > 0)) throw Infeasible("H0 inverse is not positive at epsilon", 0);
    ModelConfig cfg;
    cfg.kind = ModelKind::white_noise;
    cfg.n = 1.0 / (epsilon * epsilon);
    cfg.grid_points = grid_points;
    ModelSimulator sim(cfg, spec);
    return parallel_map(reps, [&](std::size_t i) {
        double f = estimate_wn(std::get<WhiteNoiseDraw>(sim.draw(seed.offset(i))));
        return std::make_pair(std::max(f, 0.0) / up, std::max(-f, 0.0) / down);
    });
}

// Two-sample Kolmogorov-Smirnov distance.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw InvalidInput("ks_distance: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0, na = double(a.size()), nb = double(b.size());
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == x) ++i;
        while (j < b.size() && b[j] == x) ++j;
        d = std::max(d, std::abs(double(i) / na - double(j) / nb));
    }
    return d;
}

// H0 regular-variation index for F0 regularly varying with index alpha_rv.
inline double h0_index(double alpha_rv) { return (2 * alpha_rv - 1) / (2 * alpha_rv - 2); }

}  // namespace isorate
