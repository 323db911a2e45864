#include <catch_amalgamated.hpp>

#include <cmath>

#include "isorate/limitdist.hpp"

using namespace isorate;
using Catch::Approx;

TEST_CASE("limit process spec validation", "[limitdist]") {
    CHECK_NOTHROW(LimitProcessSpec{}.validate());
    CHECK_THROWS_AS((LimitProcessSpec{1.0, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((LimitProcessSpec{2, -1}.validate()), ConfigError);
    CHECK_THROWS_AS((LimitProcessSpec{2, 1, 8, 0.1}.validate()), ConfigError);
    CHECK(LimitProcessSpec{3, 4}.left_coefficient() == Approx(32));
    CHECK(LimitProcessSpec{2, 0}.left_coefficient() == 0.0);
}

TEST_CASE("limit grid layout", "[limitdist]") {
    auto g = detail::limit_grid(1.0, 0.25, 0.0);
    CHECK(g == std::vector<double>{-1, -0.75, -0.5, -0.25, 0, 0.25, 0.5, 0.75, 1});
    auto t = detail::limit_grid(1.0, 0.25, 10.0);
    CHECK(t.front() == -10.0);
    CHECK(std::is_sorted(t.begin(), t.end()));
    CHECK(std::adjacent_find(t.begin(), t.end()) == t.end());
    CHECK(t.back() == 1.0);
}

TEST_CASE("slope at zero: symmetric process", "[limitdist]") {
    LimitProcessSpec spec{2, 1, 6, 4e-3};
    SlopeSample s = simulate_slope_at_zero(spec, 2000, SeedSpec{1, 0});
    REQUIRE(s.draws.size() == 2000);
    CHECK_FALSE(s.truncation_warning);
    double pos = 0;
    for (double d : s.draws) pos += d > 0;
    pos /= 2000;
    CHECK(std::abs(pos - 0.5) <= 3 * std::sqrt(0.25 / 2000));
    for (const auto& p : s.pairs) CHECK(p.left <= p.right);
    double prev = 1;
    for (double c = -2; c <= 2; c += 0.05) {
        double e = s.exceedance(c);
        CHECK(e <= prev);
        prev = e;
    }
}

TEST_CASE("slope at zero: no left drift", "[limitdist]") {
    LimitProcessSpec spec{2, 0, 6, 4e-3};
    SlopeSample s = simulate_slope_at_zero(spec, 500, SeedSpec{2, 0});
    std::size_t neg = 0;
    for (double d : s.draws) neg += d < 0;
    CHECK(double(neg) / 500 <= 0.01);
    CHECK_FALSE(s.truncation_warning);
}

TEST_CASE("slope pair sign convention", "[limitdist]") {
    CHECK(SlopePair{0.5, 1.5}.value() == 1.5);
    CHECK(SlopePair{-1.5, -0.5}.value() == -1.5);
    CHECK(SlopePair{-0.5, 0.5}.value() == 0.0);
    CHECK(SlopePair{-0.5, 0.5}.positive() == 0.5);
    CHECK(SlopePair{-0.5, 0.5}.negative() == 0.5);
}

TEST_CASE("exceedance matches the slope law by Brownian scaling", "[limitdist]") {
    const double alpha = 2, gamma = 1, C = 1;
    McSummary e = limit_exceedance(alpha, gamma, C, 3000, SeedSpec{3, 0}, 6, 4e-3);
    SlopeSample s = simulate_slope_at_zero({alpha, gamma, 6, 4e-3}, 3000, SeedSpec{4, 0});
    double p = s.exceedance(std::pow(C, (2 * alpha - 2) / (2 * alpha - 1)));
    double se = std::sqrt(p * (1 - p) / 3000);
    CHECK(std::abs(e.estimate - p) <= 3 * std::hypot(e.se, se));
    CHECK(e.truncation_bound < 1e-6);

    McSummary other = limit_exceedance(alpha, gamma, C, 3000, SeedSpec{5, 0}, 6, 4e-3);
    CHECK(std::abs(e.estimate - other.estimate) <= 3 * std::hypot(e.se, other.se));

    McSummary big = limit_exceedance(alpha, gamma, 3, 2000, SeedSpec{6, 0}, 6, 4e-3);
    CHECK(big.estimate <= p_twosided_upper(3).bound);
    CHECK_THROWS_AS(limit_exceedance(alpha, gamma, 0, 200, SeedSpec{}), InvalidInput);
}

TEST_CASE("normalizer matches the classical constant", "[limitdist]") {
    auto f = MonotoneFunctionSpec::power(1, 1);
    for (double eps : {1e-2, 1e-3, 1e-4})
        CHECK(H0_inv(f, eps) == Approx(std::cbrt(0.5) * std::pow(eps, 2.0 / 3)).epsilon(1e-9));
    auto g = MonotoneFunctionSpec::power(3, 1);  // f0'(0) = 3
    CHECK(H0_inv(g, 1e-3) == Approx(std::cbrt(1.5) * 1e-2).epsilon(1e-9));
    CHECK_THROWS_AS(normalized_estimator_sample(f, 0.0, 10, SeedSpec{}), InvalidInput);
    auto ns = normalized_estimator_sample(f, 1e-2, 200, SeedSpec{7, 0});
    REQUIRE(ns.size() == 200);
    for (auto [p, m] : ns) {
        CHECK(p >= 0);
        CHECK(m >= 0);
        CHECK(p * m == 0);
    }
}

TEST_CASE("normalized estimator approaches the limit law", "[limitdist]") {
    auto f = MonotoneFunctionSpec::power(1, 1);
    auto ns = normalized_estimator_sample(f, 1e-3, 800, SeedSpec{8, 0});
    SlopeSample s = simulate_slope_at_zero({2, 1, 6, 4e-3}, 800, SeedSpec{9, 0});
    std::vector<double> a, b;
    for (auto [p, m] : ns) a.push_back(p);
    for (const auto& p : s.pairs) b.push_back(p.positive());
    // 1% two-sample critical value at 800 vs 800 is about 0.081
    CHECK(ks_distance(a, b) <= 0.081);
}

TEST_CASE("ks distance and regular variation index", "[limitdist]") {
    CHECK(ks_distance({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_distance({1, 2}, {3, 4}) == 1.0);
    CHECK(ks_distance({1, 2, 3, 4}, {2.5}) == Approx(0.5));
    CHECK_THROWS_AS(ks_distance({}, {1}), InvalidInput);
    CHECK(h0_index(2) == 1.5);
    for (double p : {1.0, 2.0, 0.5}) {
        auto f = MonotoneFunctionSpec::power(1, p);
        double beta = h0_index(p + 1);
        for (double s : {0.1, 0.5, 0.9}) {
            double t = 1e-4;  // below a_delta for every p here
            CHECK(H0(f, s * t) / H0(f, t) == Approx(std::pow(s, beta)).epsilon(1e-8));
        }
    }
}
