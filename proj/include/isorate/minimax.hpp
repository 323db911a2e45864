#pragma once
// Two-point alternatives, distance bounds, exact likelihood ratios and
// empirical two-point risk.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "isorate/funcspace.hpp"
#include "isorate/models.hpp"
#include "isorate/stochastic.hpp"

namespace isorate {

struct AlternativePair {
    MonotoneFunctionSpec f0, f1;
    double delta = 0;
    double a = 0;            // rate on the perturbed side (a, or b when mirrored)
    double r_a = 0;          // matching radius, 0 when unknown
    double s_delta_a = 0;    // first point where f0 leaves the plateau band
    double plateau_end = 0;  // end of the plateau of f1 (equals s_delta_a in regression)
    double eta_a = 0;        // density normalizer
    double gamma_n = 0;
    Side branch = Side::right;
    bool experimental = false;

    double theta0() const { return f0.value(0.0); }
    double theta1() const { return f1.value(0.0); }
};

namespace detail {

// inf{u in (0,1]: pred(u)} for a predicate monotone in u; 1 when never true.
template <class P>
double first_true(P&& pred) {
    if (!pred(1.0)) return 1.0;
    double lo = 0, hi = 1;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (pred(mid)) hi = mid; else lo = mid;
    }
    return hi;
}

inline AlternativePair regression_alternative(const MonotoneFunctionSpec& f0, double a, double delta,
                                              Side branch) {
    if (std::abs(f0.value(0.0)) > 1e-12) throw InvalidInput("build_alternative: f0(0) must be 0");
    AlternativePair p;
    p.f0 = f0;
    p.delta = delta;
    p.a = a;
    p.branch = branch;
    p.gamma_n = 2 * a;
    double level = delta * a;
    Alteration alt;
    alt.base = std::make_shared<const MonotoneFunctionSpec>(f0);
    if (branch == Side::right) {
        alt.type = Alteration::regression_right;
        alt.level = level;
        alt.s = first_true([&](double u) { return f0.value(u) >= level; });
    } else {
        alt.type = Alteration::regression_left;
        alt.level = -level;
        alt.s = first_true([&](double u) { return f0.value(-u) <= -level; });
    }
    p.s_delta_a = p.plateau_end = alt.s;
    p.f1 = MonotoneFunctionSpec::derived(SpecMode::regression, alt);
    return p;
}

inline AlternativePair density_alternative(const MonotoneFunctionSpec& f0, double a, double delta,
                                           Side branch) {
    AlternativePair p;
    p.f0 = f0;
    p.delta = delta;
    p.a = a;
    p.branch = branch;
    p.gamma_n = 2 * a;
    const double h = f0.value(0.0);
    if (f0.flat_radius(branch) > 0)
        throw Infeasible("build_alternative: f0 is constant on one side of 0 (parametric case)", 0);
    Alteration alt;
    alt.base = std::make_shared<const MonotoneFunctionSpec>(f0);
    const double c0 = f0.cdf(0.0);
    if (branch == Side::left) {
        // f1 = max(f0 - eta, h + delta a) on [-1, 0], eta fixing the mass.
        const double level = h + delta * a;
        auto ustar = [&](double eta) { return first_true([&](double u) { return f0.value(-u) >= level + eta; }); };
        auto excess = [&](double eta) {
            double u = ustar(eta);
            return level * u - (c0 - f0.cdf(-u)) - eta * (1 - u);
        };
        double hi = f0.value(-1.0) - level;
        if (!(hi > 0) || excess(hi) > 0)
            throw Infeasible("build_alternative: no mass-preserving normalizer (n too small)", 0);
        double eta = bisect([&](double e) { return -excess(e); }, 0.0, 0.0, hi);
        alt.type = Alteration::density_left;
        alt.level = level;
        alt.eta = eta;
        alt.s = ustar(eta);
        p.s_delta_a = first_true([&](double u) { return f0.value(-u) >= level; });
    } else {
        // f1 = min(f0 + eta, h - delta b) on [0, 1].
        if (f0.support_end() < 1.0)
            throw InvalidInput("build_alternative: right-branch density alternative needs support to 1");
        const double level = h - delta * a;
        if (!(level > 0)) throw Infeasible("build_alternative: plateau level would be negative", 0);
        auto vstar = [&](double eta) { return first_true([&](double v) { return f0.value(v) + eta <= level; }); };
        auto excess = [&](double eta) {
            double v = vstar(eta);
            return eta * (1 - v) - (f0.cdf(v) - c0 - level * v);
        };
        double hi = level - f0.value(1.0);
        if (!(hi > 0) || excess(hi) < 0)
            throw Infeasible("build_alternative: no mass-preserving normalizer (n too small)", 0);
        double eta = bisect(excess, 0.0, 0.0, hi);
        alt.type = Alteration::density_right;
        alt.level = level;
        alt.eta = eta;
        alt.s = vstar(eta);
        p.s_delta_a = first_true([&](double v) { return f0.value(v) <= level; });
        p.experimental = true;
    }
    p.plateau_end = alt.s;
    p.eta_a = alt.eta;
    p.f1 = MonotoneFunctionSpec::derived(SpecMode::density, alt);
    return p;
}

}  // namespace detail

// Regression: branch right lifts f0 to delta a on [0, s]; branch left mirrors.
// Density: branch left raises the plateau f0(0) + delta a left of 0; branch right
// (experimental) lowers to f0(0) - delta a on [0, v*].
inline AlternativePair build_alternative(const MonotoneFunctionSpec& f0, double a, double delta,
                                         Side branch) {
    if (!(a > 0)) throw InvalidInput("build_alternative: a must be > 0");
    if (!(delta > 0 && delta <= 1)) throw InvalidInput("build_alternative: delta must lie in (0, 1]");
    return f0.mode() == SpecMode::regression ? detail::regression_alternative(f0, a, delta, branch)
                                             : detail::density_alternative(f0, a, delta, branch);
}

// Picks the branch with the larger rate.
inline AlternativePair build_alternative_for(const MonotoneFunctionSpec& f0, const RateSolution& rs,
                                             double delta) {
    bool use_a = rs.a >= rs.b;
    Side branch = (f0.mode() == SpecMode::regression) == use_a ? Side::right : Side::left;
    AlternativePair p = build_alternative(f0, use_a ? rs.a : rs.b, delta, branch);
    p.r_a = use_a ? rs.r_a : rs.r_b;
    return p;
}

// int (f1 - f0)^2 over the perturbed interval, Simpson on 2000 panels.
inline double squared_distance(const AlternativePair& p) {
    double lo = 0, hi = p.plateau_end;
    if (p.f0.mode() == SpecMode::density) {
        if (p.branch == Side::left) { lo = -1; hi = 0; }
        else { lo = 0; hi = 1; }
    } else if (p.branch == Side::left) {
        lo = -p.plateau_end;
        hi = 0;
    }
    auto g = [&](double t) {
        double d = p.f1.value(t) - p.f0.value(t);
        return d * d;
    };
    // split at the plateau end, where the integrand has a kink
    double kink = p.branch == Side::left ? -p.plateau_end : p.plateau_end;
    auto simpson = [&](double x0, double x1) {
        const int m = 2000;
        if (!(x1 > x0)) return 0.0;
        double hh = (x1 - x0) / m, s = g(x0) + g(x1);
        for (int i = 1; i < m; ++i) s += g(x0 + i * hh) * (i % 2 ? 4 : 2);
        return s * hh / 3;
    };
    if (kink > lo && kink < hi) return simpson(lo, kink) + simpson(kink, hi);
    return simpson(lo, hi);
}

// ---------------------------------------------------------------------------
// distance bounds

struct SeparationConstants {
    std::optional<double> M;           // Hellinger constant of the error law
    std::optional<double> g0;          // design density at 0
    std::optional<double> f0_at_zero;  // density at 0
};

// Per-observation squared Hellinger distance <= M d^2 for a location shift d.
inline double hellinger_constant(ErrorKind kind, double sigma) {
    if (!(sigma > 0)) throw InvalidInput("hellinger_constant: sigma must be > 0");
    switch (kind) {
        case ErrorKind::gaussian: return 1.0 / (4 * sigma * sigma);
        case ErrorKind::laplace: return 1.0 / (2 * sigma * sigma);
        case ErrorKind::uniform: break;
    }
    throw InvalidInput("hellinger_constant: uniform errors have no quadratic Hellinger bound");
}

inline SeparationConstants model_constants(const ModelConfig& cfg, const MonotoneFunctionSpec& f0) {
    SeparationConstants c;
    switch (cfg.kind) {
        case ModelKind::white_noise: break;
        case ModelKind::random_design: c.g0 = cfg.design.g0(); [[fallthrough]];
        case ModelKind::grid: c.M = hellinger_constant(cfg.errors, cfg.sigma); break;
        case ModelKind::density: c.f0_at_zero = f0.value(0.0); break;
    }
    return c;
}

// Closed-form upper bound on ||P1 - P0||_1 as a function of C and delta.
inline double separation_bound(ModelKind model, double C, double delta, const SeparationConstants& k) {
    auto need = [](const std::optional<double>& v, const char* name) {
        if (!v) throw InvalidInput(std::string("separation_bound: missing constant ") + name);
        return *v;
    };
    switch (model) {
        case ModelKind::white_noise: return std::sqrt(std::expm1(C * C * delta * delta));
        case ModelKind::grid: return 4 * C * delta * std::sqrt(need(k.M, "M"));
        case ModelKind::random_design:
            return 4 * C * delta * std::sqrt(need(k.M, "M") * need(k.g0, "g0"));
        case ModelKind::density: return C * delta / std::sqrt(need(k.f0_at_zero, "f0(0)"));
    }
    return 0;
}

struct SeparationBounds {
    ModelKind model = ModelKind::white_noise;
    double C = 0, delta = 0, beta = 0.25;
    double l1_bound = 0;
    double delta_star = 0;  // largest delta in (0,1] with bound <= 2 - 4 beta
    SeparationConstants constants;
};

inline double delta_star(ModelKind model, double C, const SeparationConstants& k, double beta = 0.25) {
    if (!(beta > 0 && beta < 0.5)) throw InvalidInput("delta_star: beta must lie in (0, 1/2)");
    double target = 2 - 4 * beta;
    if (separation_bound(model, C, 1.0, k) <= target) return 1.0;
    return detail::bisect([&](double d) { return separation_bound(model, C, d, k); }, target, 0.0, 1.0);
}

inline SeparationBounds separation_bounds(double delta, ModelKind model, double C,
                                          const SeparationConstants& k, double beta = 0.25) {
    SeparationBounds b;
    b.model = model;
    b.C = C;
    b.delta = delta;
    b.beta = beta;
    b.constants = k;
    b.l1_bound = separation_bound(model, C, delta, k);
    b.delta_star = delta_star(model, C, k, beta);
    return b;
}

inline SeparationBounds separation_bounds(const AlternativePair& p, ModelKind model, double C,
                                          const SeparationConstants& k, double beta = 0.25) {
    return separation_bounds(p.delta, model, C, k, beta);
}

// C with twice the limiting tail bound equal to alpha, corrected for the model's scale.
inline double calibrated_C(double alpha, const ModelConfig& cfg, const MonotoneFunctionSpec& f0) {
    if (!(alpha > 0 && alpha < 1)) throw InvalidInput("calibrated_C: alpha must lie in (0,1)");
    double base = 2.0 / (std::sqrt(2 * std::numbers::pi) * alpha);
    switch (cfg.kind) {
        case ModelKind::white_noise: return base;
        case ModelKind::grid: return base * cfg.sigma;
        case ModelKind::random_design: return base * cfg.sigma / std::sqrt(cfg.design.g0());
        case ModelKind::density: return base * std::sqrt(f0.value(0.0));
    }
    return base;
}

// ---------------------------------------------------------------------------
// exact likelihood ratios dP1/dP0 of the simulated data

class LikelihoodRatio {
public:
    // wn_knots: knot grid shared by both white-noise simulators.
    LikelihoodRatio(const AlternativePair& p, const ModelConfig& cfg, std::vector<double> wn_knots = {})
        : pair_(p), cfg_(cfg) {
        if (cfg.kind == ModelKind::grid || cfg.kind == ModelKind::random_design) {
            if (cfg.errors == ErrorKind::uniform)
                throw InvalidInput("likelihood ratio: uniform errors are not supported");
            if (!(cfg.sigma > 0)) throw InvalidInput("likelihood ratio: sigma must be > 0");
        }
        if (cfg.kind == ModelKind::white_noise) {
            if (wn_knots.size() < 2) throw InvalidInput("likelihood ratio: white noise needs the knot grid");
            const double e2 = 1.0 / cfg.n;
            for (std::size_t k = 0; k + 1 < wn_knots.size(); ++k) {
                double t0 = wn_knots[k], t1 = wn_knots[k + 1];
                double m0 = p.f0.primitive(t1) - p.f0.primitive(t0);
                double d = p.f1.primitive(t1) - p.f1.primitive(t0) - m0;
                if (d != 0) cells_.push_back(Cell{k, m0, d, e2 * (t1 - t0)});
            }
        }
        if (cfg.kind == ModelKind::grid) {
            const std::size_t n = cfg.sample_size();
            for (std::size_t j = 0; j <= 2 * n; ++j) {
                double x = (double(j) - double(n)) / double(n);
                double m0 = p.f0.value(x), d = p.f1.value(x) - m0;
                if (d != 0) cells_.push_back(Cell{j, m0, d, 0});
            }
        }
    }

    double log_ratio(const Draw& draw) const {
        if (auto* w = std::get_if<WhiteNoiseDraw>(&draw)) {
            const auto& v = w->path.values();
            double s = 0;
            for (const Cell& c : cells_) {
                double r = v[c.index + 1] - v[c.index] - c.m0;
                s += (c.d * r - 0.5 * c.d * c.d) / c.var;
            }
            return s;
        }
        if (auto* g = std::get_if<GridDraw>(&draw)) {
            double s = 0;
            for (const Cell& c : cells_) s += noise_term(g->y[c.index], c.m0, c.m0 + c.d);
            return s;
        }
        if (auto* r = std::get_if<RandomDesignDraw>(&draw)) {
            double s = 0;
            for (std::size_t i = 0; i < r->x.size(); ++i) {
                double m0 = pair_.f0.value(r->x[i]), m1 = pair_.f1.value(r->x[i]);
                if (m0 != m1) s += noise_term(r->y[i], m0, m1);
            }
            return s;
        }
        const auto& d = std::get<DensityDraw>(draw);
        double s = 0;
        for (double x : d.sample) {
            double q0 = pair_.f0.value(x), q1 = pair_.f1.value(x);
            if (q0 == q1) continue;
            if (q0 == 0) return std::numeric_limits<double>::infinity();
            if (q1 == 0) return -std::numeric_limits<double>::infinity();
            s += std::log(q1 / q0);
        }
        return s;
    }

    double ratio(const Draw& d) const { return std::exp(log_ratio(d)); }

private:
    struct Cell {
        std::size_t index;
        double m0, d, var;
    };

    double noise_term(double y, double m0, double m1) const {
        const double sg = cfg_.sigma;
        if (cfg_.errors == ErrorKind::gaussian) {
            double d = m1 - m0;
            return (d * (y - m0) - 0.5 * d * d) / (sg * sg);
        }
        double b = sg / std::numbers::sqrt2;
        return -(std::abs(y - m1) - std::abs(y - m0)) / b;
    }

    AlternativePair pair_;
    ModelConfig cfg_;
    std::vector<Cell> cells_;
};

// ---------------------------------------------------------------------------
// two-point experiments

using DrawEstimator = std::function<double(const Draw&)>;

struct NamedEstimator {
    std::string name;
    DrawEstimator fn;
};

struct RiskReport {
    std::string estimator;
    McSummary p0, p1;  // P_i(|theta_hat - f_i(0)| >= threshold)
    double max_risk = 0, max_se = 0;
    double threshold = 0, eta = 0, C = 0, delta = 0, eta_a = 0, gamma_n = 0;
    double l1_bound = 0;
    std::vector<double> errors0, errors1;  // theta_hat - f_i(0) per replicate
};

// Paired simulators for f0 and f1 sharing the white-noise grid.
class TwoPointExperiment {
public:
    TwoPointExperiment(AlternativePair pair, ModelConfig cfg)
        : pair_(std::move(pair)), sim0_(cfg, pair_.f0), sim1_(sim0_.config(), pair_.f1),
          lr_(pair_, sim0_.config(), sim0_.wn_grid()) {}

    const AlternativePair& pair() const { return pair_; }
    const ModelConfig& config() const { return sim0_.config(); }
    const LikelihoodRatio& likelihood_ratio() const { return lr_; }

    Draw draw(int hypothesis, SeedSpec seed) const {
        return hypothesis == 0 ? sim0_.draw(seed) : sim1_.draw(hypothesis_seed(seed));
    }

    // Replicate seeds of the alternative live in a disjoint stream range.
    static SeedSpec hypothesis_seed(SeedSpec s) { return s.offset(std::uint64_t(1) << 40); }

private:
    AlternativePair pair_;
    ModelSimulator sim0_, sim1_;
    LikelihoodRatio lr_;
};

// LS, constant f0(0), likelihood-ratio dichotomy, local average over [-r_a, r_a].
inline std::vector<NamedEstimator> estimator_suite(const TwoPointExperiment& ex) {
    const AlternativePair& p = ex.pair();
    const double t0 = p.theta0(), t1 = p.theta1();
    const double h = std::clamp(p.r_a > 0 ? p.r_a : 0.1, 1e-6, 1.0);
    const LikelihoodRatio* lr = &ex.likelihood_ratio();
    std::vector<NamedEstimator> out;
    out.push_back({"ls", [](const Draw& d) { return estimate_ls(d).value; }});
    out.push_back({"constant", [t0](const Draw&) { return t0; }});
    out.push_back({"dichotomy", [lr, t0, t1](const Draw& d) { return lr->log_ratio(d) <= 0 ? t0 : t1; }});
    out.push_back({"local_average", [h](const Draw& d) -> double {
                       if (auto* w = std::get_if<WhiteNoiseDraw>(&d)) return (w->path(h) - w->path(-h)) / (2 * h);
                       if (auto* g = std::get_if<GridDraw>(&d)) {
                           double s = 0;
                           std::size_t k = 0;
                           for (std::size_t j = 0; j < g->y.size(); ++j)
                               if (std::abs(g->x(std::ptrdiff_t(j) - std::ptrdiff_t(g->n))) <= h) s += g->y[j], ++k;
                           return s / double(k);
                       }
                       if (auto* r = std::get_if<RandomDesignDraw>(&d)) {
                           double s = 0;
                           std::size_t k = 0;
                           for (std::size_t i = 0; i < r->x.size(); ++i)
                               if (std::abs(r->x[i]) <= h) s += r->y[i], ++k;
                           return k ? s / double(k) : 0.0;
                       }
                       const auto& x = std::get<DensityDraw>(d).sample;
                       auto lo = std::lower_bound(x.begin(), x.end(), -h);
                       auto hi = std::upper_bound(x.begin(), x.end(), h);
                       return double(hi - lo) / (double(x.size()) * 2 * h);
                   }});
    return out;
}

// Exceedance probabilities of every estimator at threshold eta * gamma_n; one
// draw per replicate and hypothesis is shared by all estimators.
inline std::vector<RiskReport> two_point_risk(const TwoPointExperiment& ex,
                                              const std::vector<NamedEstimator>& estimators, double eta,
                                              std::size_t reps, SeedSpec seed) {
    if (estimators.empty()) throw InvalidInput("two_point_risk: no estimators");
    if (reps < 100) throw InvalidInput("two_point_risk: reps must be >= 100");
    if (!(eta > 0)) throw InvalidInput("two_point_risk: eta must be > 0");
    const AlternativePair& p = ex.pair();
    const double theta[2] = {p.theta0(), p.theta1()};
    const std::size_t m = estimators.size();
    std::vector<RiskReport> out(m);
    for (int hyp = 0; hyp < 2; ++hyp) {
        auto errs = parallel_map(reps, [&](std::size_t i) {
            Draw d = ex.draw(hyp, seed.offset(i));
            std::vector<double> e(m);
            for (std::size_t k = 0; k < m; ++k) e[k] = estimators[k].fn(d) - theta[hyp];
            return e;
        });
        for (std::size_t k = 0; k < m; ++k) {
            auto& dst = hyp == 0 ? out[k].errors0 : out[k].errors1;
            dst.resize(reps);
            for (std::size_t i = 0; i < reps; ++i) dst[i] = errs[i][k];
        }
    }
    const double thr = eta * p.gamma_n;
    for (std::size_t k = 0; k < m; ++k) {
        RiskReport& r = out[k];
        r.estimator = estimators[k].name;
        r.threshold = thr;
        r.eta = eta;
        r.delta = p.delta;
        r.eta_a = p.eta_a;
        r.gamma_n = p.gamma_n;
        for (int hyp = 0; hyp < 2; ++hyp) {
            const auto& e = hyp == 0 ? r.errors0 : r.errors1;
            std::size_t hits = 0;
            for (double x : e) hits += std::abs(x) >= thr;
            McSummary& s = hyp == 0 ? r.p0 : r.p1;
            s.reps = reps;
            s.seed = hyp == 0 ? seed : TwoPointExperiment::hypothesis_seed(seed);
            s.estimate = double(hits) / double(reps);
            s.se = std::sqrt(s.estimate * (1 - s.estimate) / double(reps));
        }
        const McSummary& hi = r.p0.estimate >= r.p1.estimate ? r.p0 : r.p1;
        r.max_risk = hi.estimate;
        r.max_se = hi.se;
    }
    return out;
}

inline RiskReport two_point_risk(const TwoPointExperiment& ex, const NamedEstimator& est, double eta,
                                 std::size_t reps, SeedSpec seed) {
    return two_point_risk(ex, std::vector<NamedEstimator>{est}, eta, reps, seed).front();
}

// ||P1 - P0||_1 = E_0 |1 - dP1/dP0|.
inline McSummary empirical_l1(const TwoPointExperiment& ex, std::size_t reps, SeedSpec seed) {
    if (reps < 2) throw InvalidInput("empirical_l1: reps must be >= 2");
    auto xs = parallel_map(reps, [&](std::size_t i) {
        return std::abs(1.0 - ex.likelihood_ratio().ratio(ex.draw(0, seed.offset(i))));
    });
    return summarize_mean(xs, seed);
}

// 1/2 (1 - 1/2 ||P1 - P0||_1): lower bound on any estimator's two-point max risk
// at threshold below half the separation |f1(0) - f0(0)|.
inline McSummary lower_bound_witness(const TwoPointExperiment& ex, std::size_t reps, SeedSpec seed) {
    McSummary l1 = empirical_l1(ex, reps, seed);
    McSummary w = l1;
    w.estimate = 0.5 * (1 - 0.5 * l1.estimate);
    w.se = 0.25 * l1.se;
    return w;
}

}  // namespace isorate
