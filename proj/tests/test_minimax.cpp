#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "isorate/minimax.hpp"

using namespace isorate;
using Catch::Approx;

namespace {

MonotoneFunctionSpec quadratic() { return MonotoneFunctionSpec::power(1, 2); }
MonotoneFunctionSpec linear() { return MonotoneFunctionSpec::power(1, 1); }
MonotoneFunctionSpec triangular() { return MonotoneFunctionSpec::power(0.5, 1, SpecMode::density); }

template <class F>
double simpson(F&& f, double lo, double hi, int m = 4000) {
    double h = (hi - lo) / m, s = f(lo) + f(hi);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4 : 2) * f(lo + i * h);
    return s * h / 3;
}

// Squared Hellinger distance int (sqrt p(y - d) - sqrt p(y))^2 by quadrature.
template <class P>
double hellinger_sq(P&& p, double d, double half_width) {
    auto g = [&](double y) {
        double u = std::sqrt(p(y - d)) - std::sqrt(p(y));
        return u * u;
    };
    // kinks of the laplace density at 0 and d
    return simpson(g, -half_width, 0, 20000) + simpson(g, 0, d, 2000) + simpson(g, d, half_width, 20000);
}

ModelConfig model(ModelKind k, double n, std::size_t grid_points = 0) {
    ModelConfig c;
    c.kind = k;
    c.n = n;
    c.grid_points = grid_points;
    return c;
}

}  // namespace

TEST_CASE("regression alternative: worked example", "[minimax]") {
    AlternativePair p = build_alternative(quadratic(), 0.1, 0.5, Side::right);
    const double s = std::sqrt(0.05);
    CHECK(p.s_delta_a == Approx(s).epsilon(1e-12));
    CHECK(p.theta0() == 0.0);
    CHECK(p.theta1() == Approx(0.05));
    CHECK(p.gamma_n == Approx(0.2));
    CHECK_FALSE(p.experimental);
    for (double t = -1; t <= 1; t += 1.0 / 256) {
        double expect = (t >= 0 && t <= s) ? 0.05 : p.f0.value(t);
        CHECK(p.f1.value(t) == Approx(expect).margin(1e-15));
    }
    // int_0^s (0.05 - t^2)^2 dt in closed form
    double exact = 0.0025 * s - 0.1 * s * s * s / 3 + std::pow(s, 5) / 5;
    CHECK(exact == Approx(0.000298).margin(1e-6));
    CHECK(squared_distance(p) == Approx(exact).epsilon(1e-10));
    CHECK(squared_distance(p) <= 0.25 * 0.01 * s);
    CHECK(0.25 * 0.01 * s == Approx(0.000559).margin(1e-6));
    // F1 - F0 on the plateau, independent of the derived spec's primitive
    for (double t : {0.05, 0.2, 0.5, 1.0}) {
        double u = std::min(t, s);
        CHECK(p.f1.primitive(t) - p.f0.primitive(t) == Approx(0.05 * u - u * u * u / 3).margin(1e-14));
    }
}

TEST_CASE("regression alternative: invariants", "[minimax]") {
    for (auto f : {linear(), quadratic(), MonotoneFunctionSpec::power(2, 0.5), MonotoneFunctionSpec::flat_then_power(0.2, 1, 1)})
        for (double delta : {1.0, 0.3, 1e-3})
            for (Side side : {Side::right, Side::left}) {
                AlternativePair p = build_alternative(f, 0.08, delta, side);
                double gap = 0, prev = -1e9;
                for (double t = -1; t <= 1; t += 1.0 / 512) {
                    double v = p.f1.value(t);
                    CHECK(v >= prev);
                    prev = v;
                    gap = std::max(gap, std::abs(v - p.f0.value(t)));
                    bool inside = side == Side::right ? (t >= 0 && t < p.plateau_end) : (t <= 0 && t > -p.plateau_end);
                    if (!inside) CHECK(v == p.f0.value(t));
                }
                CHECK(gap == Approx(delta * 0.08).epsilon(1e-12));
                CHECK(std::abs(p.theta1() - p.theta0()) == Approx(delta * 0.08).epsilon(1e-12));
            }
    CHECK_THROWS_AS(build_alternative(linear(), 0.0, 0.5, Side::right), InvalidInput);
    CHECK_THROWS_AS(build_alternative(linear(), 0.1, 1.5, Side::right), InvalidInput);
    CHECK_THROWS_AS(build_alternative(linear(), 0.1, 0.0, Side::right), InvalidInput);
}

TEST_CASE("asymmetric f0 uses the mirrored branch", "[minimax]") {
    // steep left side: b > a
    auto f = MonotoneFunctionSpec::branches(SpecKind::power, PowerBranch{4, 1, 0}, PowerBranch{0.5, 2, 0});
    RateSolution rs = solve_rates(f, 1.0, 1e4);
    REQUIRE(rs.b > rs.a);
    AlternativePair p = build_alternative_for(f, rs, 0.5);
    CHECK(p.branch == Side::left);
    CHECK(p.a == rs.b);
    CHECK(p.r_a == rs.r_b);
    CHECK(p.theta1() == Approx(-0.5 * rs.b));
    // the mirror image of the right-branch construction on the reflected function
    auto g = MonotoneFunctionSpec::branches(SpecKind::power, PowerBranch{0.5, 2, 0}, PowerBranch{4, 1, 0});
    AlternativePair q = build_alternative(g, rs.b, 0.5, Side::right);
    CHECK(p.plateau_end == Approx(q.plateau_end).epsilon(1e-12));
    for (double t = 0; t <= 1; t += 1.0 / 128) CHECK(p.f1.value(-t) == Approx(-q.f1.value(t)).margin(1e-14));
    double s = p.plateau_end, h = 0.5 * rs.b;
    // int_0^s (h - 4t)^2 dt
    CHECK(squared_distance(p) == Approx(h * h * s - 4 * h * s * s + 16 * s * s * s / 3).epsilon(1e-10));

    RateSolution sym = solve_rates(linear(), 1.0, 1e4);
    CHECK(build_alternative_for(linear(), sym, 0.5).branch == Side::right);
}

TEST_CASE("density alternative", "[minimax]") {
    auto f = triangular();
    RateSolution rs = solve_rates(f, 2.0, 1e4);
    AlternativePair p = build_alternative_for(f, rs, 0.5);
    CHECK(p.branch == Side::left);
    CHECK_FALSE(p.experimental);
    CHECK(p.theta1() == Approx(f.value(0) + 0.5 * p.a).epsilon(1e-12));
    CHECK(p.eta_a > 0);
    CHECK(p.eta_a <= 2 * p.delta * p.a * p.r_a);
    // f1 is piecewise linear with breaks at -u* and a jump at 0: Simpson is exact per piece
    auto d = [&](double t) { return p.f1.value(t); };
    auto right = [&](double t) { return f.value(std::max(t, 1e-300)); };
    double mass = simpson(d, -1, -p.plateau_end, 200) + simpson(d, -p.plateau_end, 0, 200) + simpson(right, 0, 1, 200);
    CHECK(mass == Approx(1.0).margin(1e-10));
    double prev = 1e9;
    for (double t = -1; t <= 1.5; t += 1.0 / 256) {
        double v = p.f1.value(t);
        CHECK(v <= prev + 1e-15);
        CHECK(v >= 0);
        prev = v;
        if (t > 0) CHECK(v == f.value(t));
        if (t < -p.plateau_end) CHECK(v == Approx(f.value(t) - p.eta_a).margin(1e-14));
    }
    CHECK(p.f1.cdf(0.0) == Approx(f.cdf(0.0)).margin(1e-10));
    for (double u : {0.1, 0.5, 0.9}) CHECK(p.f1.cdf(p.f1.quantile(u)) == Approx(u).margin(1e-10));

    // f0 constant just left of 0: parametric case, no construction
    auto flat = MonotoneFunctionSpec::branches(SpecKind::flat_then_power, PowerBranch{0.5, 1, 0.3},
                                               PowerBranch{0.5, 1, 0}, SpecMode::density);
    CHECK_THROWS_AS(build_alternative(flat, 0.05, 0.5, Side::left), Infeasible);
}

TEST_CASE("density alternative on the right branch", "[minimax]") {
    auto f = MonotoneFunctionSpec::branches(SpecKind::power, PowerBranch{0.2, 1, 0}, PowerBranch{0.5, 1, 0},
                                            SpecMode::density);
    RateSolution rs = solve_rates(f, 2.0, 1e4);
    REQUIRE(rs.b > rs.a);
    AlternativePair p = build_alternative_for(f, rs, 0.5);
    CHECK(p.branch == Side::right);
    CHECK(p.experimental);
    CHECK(p.theta1() == Approx(f.value(0) - 0.5 * rs.b).epsilon(1e-12));
    auto d = [&](double t) { return p.f1.value(t); };
    auto left = [&](double t) { return f.value(std::min(t, -1e-300)); };
    double mass = simpson(left, -1, 0, 200) + simpson(d, 0, p.plateau_end, 200) + simpson(d, p.plateau_end, 1, 200);
    CHECK(mass == Approx(1.0).margin(1e-10));
    auto short_support =
        MonotoneFunctionSpec::piecewise_linear({-1, 0, 0.5}, {1 / 1.2, 0.8 / 1.2, 0.4 / 1.2}, SpecMode::density);
    CHECK_THROWS_AS(build_alternative(short_support, 0.05, 0.5, Side::right), InvalidInput);
}

TEST_CASE("hellinger constants", "[minimax]") {
    const double sigma = 0.7;
    double Mg = hellinger_constant(ErrorKind::gaussian, sigma);
    double Ml = hellinger_constant(ErrorKind::laplace, sigma);
    CHECK(Mg == Approx(1 / (4 * sigma * sigma)));
    auto gauss = [&](double y) { return std_normal_pdf(y / sigma) / sigma; };
    const double b = sigma / std::numbers::sqrt2;
    auto lap = [&](double y) { return std::exp(-std::abs(y) / b) / (2 * b); };
    for (double d : {1e-3, 0.01, 0.1, 0.5, 1.0, 3.0}) {
        double hg = hellinger_sq(gauss, d, 12);
        double hl = hellinger_sq(lap, d, 40);
        CHECK(hg == Approx(2 * (1 - std::exp(-d * d / (8 * sigma * sigma)))).epsilon(1e-8));
        CHECK(hg <= Mg * d * d * (1 + 1e-9));
        CHECK(hl <= Ml * d * d * (1 + 1e-6));
    }
    // sharp as the shift vanishes
    CHECK(hellinger_sq(lap, 1e-3, 40) / 1e-6 == Approx(Ml).epsilon(2e-3));
    CHECK_THROWS_AS(hellinger_constant(ErrorKind::uniform, 1), InvalidInput);
    CHECK_THROWS_AS(hellinger_constant(ErrorKind::gaussian, 0), InvalidInput);
}

TEST_CASE("separation bounds and delta star", "[minimax]") {
    SeparationConstants none;
    CHECK(separation_bound(ModelKind::white_noise, 1, 0.5, none) == Approx(0.53294).margin(5e-6));
    for (double sigma : {0.5, 1.0, 2.0}) {
        SeparationConstants k;
        k.M = hellinger_constant(ErrorKind::gaussian, sigma);
        CHECK(separation_bound(ModelKind::grid, 1.3, 0.4, k) == Approx(2 * 1.3 * 0.4 / sigma));
    }
    SeparationConstants all;
    all.M = 0.25;
    all.g0 = 0.5;
    all.f0_at_zero = 0.5;
    for (ModelKind m : {ModelKind::white_noise, ModelKind::grid, ModelKind::random_design, ModelKind::density}) {
        CHECK(separation_bound(m, 2, 1e-9, all) < 1e-8);
        double ds = delta_star(m, 2, all);
        CHECK(ds > 0);
        CHECK(ds <= 1);
        if (ds < 1) CHECK(separation_bound(m, 2, ds, all) == Approx(1.0).epsilon(1e-12));
    }
    CHECK(delta_star(ModelKind::white_noise, 2, none) == Approx(std::sqrt(std::log(2.0)) / 2).epsilon(1e-12));
    CHECK(delta_star(ModelKind::white_noise, 0.1, none) == 1.0);
    CHECK_THROWS_AS(separation_bound(ModelKind::grid, 1, 0.5, none), InvalidInput);
    CHECK_THROWS_AS(separation_bound(ModelKind::random_design, 1, 0.5, SeparationConstants{0.25, {}, {}}), InvalidInput);
    CHECK_THROWS_AS(separation_bound(ModelKind::density, 1, 0.5, none), InvalidInput);
    CHECK_THROWS_AS(delta_star(ModelKind::white_noise, 1, none, 0.5), InvalidInput);

    ModelConfig g = model(ModelKind::random_design, 100);
    g.sigma = 2;
    SeparationConstants mk = model_constants(g, linear());
    CHECK(*mk.M == Approx(1.0 / 16));
    CHECK(*mk.g0 == 0.5);
    CHECK(*model_constants(model(ModelKind::density, 100), triangular()).f0_at_zero == Approx(0.5));
}

TEST_CASE("calibrated C", "[minimax]") {
    double base = 2 / (std::sqrt(2 * std::numbers::pi) * 0.1);
    CHECK(calibrated_C(0.1, model(ModelKind::white_noise, 100), linear()) == Approx(base));
    CHECK(2 * p_twosided_upper(base).bound == Approx(0.1));
    ModelConfig g = model(ModelKind::grid, 100);
    g.sigma = 3;
    CHECK(calibrated_C(0.1, g, linear()) == Approx(3 * base));
    g.kind = ModelKind::random_design;
    CHECK(calibrated_C(0.1, g, linear()) == Approx(3 * base * std::sqrt(2.0)));
    CHECK(calibrated_C(0.1, model(ModelKind::density, 100), triangular()) == Approx(base * std::sqrt(0.5)));
    CHECK_THROWS_AS(calibrated_C(1.5, g, linear()), InvalidInput);
}

TEST_CASE("grid likelihood ratio by hand", "[minimax]") {
    AlternativePair p = build_alternative(linear(), 0.3, 1.0, Side::right);
    ModelConfig cfg = model(ModelKind::grid, 4);
    cfg.sigma = 0.5;
    LikelihoodRatio lr(p, cfg);
    GridDraw d = simulate_grid(linear(), 4, 0.5, ErrorKind::gaussian, SeedSpec{1, 0});
    double want = 0;
    for (std::size_t k = 0; k < d.y.size(); ++k) {
        double x = d.x(std::ptrdiff_t(k) - 4), m0 = linear().value(x), m1 = p.f1.value(x);
        want += (std::pow(d.y[k] - m0, 2) - std::pow(d.y[k] - m1, 2)) / (2 * 0.25);
    }
    CHECK(lr.log_ratio(Draw{d}) == Approx(want).margin(1e-12));

    cfg.errors = ErrorKind::laplace;
    LikelihoodRatio ll(p, cfg);
    const double bb = 0.5 / std::numbers::sqrt2;
    double wl = 0;
    for (std::size_t k = 0; k < d.y.size(); ++k) {
        double x = d.x(std::ptrdiff_t(k) - 4), m0 = linear().value(x), m1 = p.f1.value(x);
        wl += (std::abs(d.y[k] - m0) - std::abs(d.y[k] - m1)) / bb;
    }
    CHECK(ll.log_ratio(Draw{d}) == Approx(wl).margin(1e-12));
    cfg.errors = ErrorKind::uniform;
    CHECK_THROWS_AS(LikelihoodRatio(p, cfg), InvalidInput);
}

TEST_CASE("likelihood ratios have unit mean under the null", "[minimax]") {
    std::vector<TwoPointExperiment> exps;
    auto lin_pair = [](double n) {
        return build_alternative_for(linear(), solve_rates(linear(), 1.0, n), 0.5);
    };
    exps.emplace_back(lin_pair(1e3), model(ModelKind::white_noise, 1e3));
    exps.emplace_back(lin_pair(200), model(ModelKind::grid, 200));
    exps.emplace_back(lin_pair(400), model(ModelKind::random_design, 400));
    exps.emplace_back(build_alternative_for(triangular(), solve_rates(triangular(), 1.0, 1000), 0.5),
                      model(ModelKind::density, 1000));
    for (const auto& ex : exps) {
        auto r = parallel_map(2000, [&](std::size_t i) {
            return ex.likelihood_ratio().ratio(ex.draw(0, SeedSpec{31, i}));
        });
        McSummary m = summarize_mean(r, SeedSpec{});
        CHECK(std::abs(m.estimate - 1) <= 4 * m.se);
    }
}

TEST_CASE("two-point risks of simple estimators", "[minimax]") {
    AlternativePair p = build_alternative_for(linear(), solve_rates(linear(), 2.0, 1e3), 0.5);
    TwoPointExperiment ex(p, model(ModelKind::white_noise, 1e3));
    auto suite = estimator_suite(ex);
    REQUIRE(suite.size() == 4);
    auto reports = two_point_risk(ex, suite, p.delta / 4, 600, SeedSpec{40, 0});
    const RiskReport& constant = reports[1];
    CHECK(constant.estimator == "constant");
    CHECK(constant.p0.estimate == 0.0);
    CHECK(constant.p1.estimate == 1.0);
    CHECK(constant.threshold == Approx(p.delta / 4 * 2 * p.a));
    const RiskReport& dich = reports[2];
    CHECK(dich.max_risk <= 0.5 + 3 * dich.max_se);

    McSummary w = lower_bound_witness(ex, 600, SeedSpec{41, 0});
    SeparationBounds sb = separation_bounds(p, ModelKind::white_noise, 2.0, {});
    CHECK(w.estimate >= 0.5 * (1 - 0.5 * sb.l1_bound) - 3 * w.se);
    for (const RiskReport& r : reports)
        if (r.estimator == "ls" || r.estimator == "dichotomy")
            CHECK(r.max_risk >= w.estimate - 3 * std::hypot(r.max_se, w.se));

    RiskReport single = two_point_risk(ex, suite[0], p.delta / 4, 600, SeedSpec{40, 0});
    CHECK(single.errors0 == reports[0].errors0);
    CHECK_THROWS_AS(two_point_risk(ex, suite, 0.1, 50, SeedSpec{}), InvalidInput);
}

TEST_CASE("identical hypotheses give the trivial witness", "[minimax]") {
    AlternativePair p = build_alternative(linear(), 1e-9, 1e-3, Side::right);
    TwoPointExperiment ex(p, model(ModelKind::grid, 100));
    McSummary w = lower_bound_witness(ex, 200, SeedSpec{5, 0});
    CHECK(w.estimate == Approx(0.5).margin(1e-9));
}

TEST_CASE("empirical L1 stays below the closed-form bound", "[minimax]") {
    struct Case {
        ModelKind kind;
        MonotoneFunctionSpec f;
        double n;
    };
    std::vector<Case> cases{{ModelKind::white_noise, linear(), 1e3},
                            {ModelKind::grid, linear(), 300},
                            {ModelKind::random_design, linear(), 600},
                            {ModelKind::density, triangular(), 2000}};
    for (const auto& c : cases)
        for (double delta : {0.25, 0.75}) {
            const double C = 1.0;
            ModelConfig cfg = model(c.kind, c.n);
            AlternativePair p = build_alternative_for(c.f, solve_rates(c.f, C, c.n), delta);
            TwoPointExperiment ex(p, cfg);
            McSummary l1 = empirical_l1(ex, 1000, SeedSpec{50, 0});
            double bound = separation_bound(c.kind, C, delta, model_constants(cfg, c.f));
            INFO(to_string(c.kind) << " delta " << delta << " l1 " << l1.estimate << " bound " << bound);
            CHECK(l1.estimate <= bound + 3 * l1.se);
        }
}
