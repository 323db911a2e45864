#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "isorate/stochastic.hpp"

using namespace isorate;
using Catch::Approx;

namespace {

// Composite Simpson on [lo, hi].
template <class F>
double simpson(F&& f, double lo, double hi, int m = 20000) {
    double h = (hi - lo) / m, s = f(lo) + f(hi);
    for (int i = 1; i < m; ++i) s += (i % 2 ? 4 : 2) * f(lo + i * h);
    return s * h / 3;
}

struct ScopedWorkers {
    explicit ScopedWorkers(const char* v) { setenv("ISORATE_WORKERS", v, 1); }
    ~ScopedWorkers() { unsetenv("ISORATE_WORKERS"); }
};

}  // namespace

TEST_CASE("philox known-answer vectors", "[stochastic]") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32(A4{~0u, ~0u, ~0u, ~0u}, A2{~0u, ~0u}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and distinct", "[stochastic]") {
    Stream a(SeedSpec{42, 7}), b(SeedSpec{42, 7}), c(SeedSpec{42, 8}), d(SeedSpec{42, 7}, 1);
    bool differ_c = false, differ_d = false;
    for (int i = 0; i < 100; ++i) {
        auto x = a();
        CHECK(x == b());
        differ_c |= x != c();
        differ_d |= x != d();
    }
    CHECK(differ_c);
    CHECK(differ_d);
    Stream u(SeedSpec{1, 0});
    for (int i = 0; i < 10000; ++i) {
        double v = u.uniform();
        REQUIRE(v > 0);
        REQUIRE(v < 1);
    }
}

TEST_CASE("normal variates: moments and tail mass", "[stochastic]") {
    Stream g(SeedSpec{3, 0});
    const int N = 1000000;
    double s1 = 0, s2 = 0, s4 = 0;
    int tail = 0, below = 0;
    for (int i = 0; i < N; ++i) {
        double z = g.normal();
        s1 += z, s2 += z * z, s4 += z * z * z * z;
        tail += std::abs(z) > 3.442619855899;
        below += z <= -1.0;
    }
    CHECK(std::abs(s1 / N) < 3.0 / std::sqrt(N) * 1.5);
    CHECK(std::abs(s2 / N - 1) < 3 * std::sqrt(2.0 / N) * 1.5);
    CHECK(std::abs(s4 / N - 3) < 3 * std::sqrt(96.0 / N) * 1.5);
    double pt = 2 * std_normal_cdf(-3.442619855899);
    CHECK(std::abs(double(tail) / N - pt) < 4 * std::sqrt(pt / N));
    double pb = std_normal_cdf(-1.0);
    CHECK(std::abs(double(below) / N - pb) < 4 * std::sqrt(pb * (1 - pb) / N));
}

TEST_CASE("laplace and uniform errors have the requested variance", "[stochastic]") {
    Stream g(SeedSpec{5, 0});
    const int N = 200000;
    double l2 = 0, u2 = 0, l4 = 0, u4 = 0;
    for (int i = 0; i < N; ++i) {
        double l = g.laplace(2.0), u = g.uniform_centered(2.0);
        l2 += l * l, l4 += l * l * l * l;
        u2 += u * u, u4 += u * u * u * u;
    }
    // fourth moments: laplace 6 sigma^4, uniform 1.8 sigma^4
    CHECK(std::abs(l2 / N - 4) < 4 * std::sqrt((6 * 16 - 16) / double(N)));
    CHECK(std::abs(u2 / N - 4) < 4 * std::sqrt((1.8 * 16 - 16) / double(N)));
}

TEST_CASE("normal cdf", "[stochastic]") {
    CHECK(std_normal_cdf(0) == 0.5);
    CHECK(std_normal_cdf(2) == Approx(0.9772498680518208).epsilon(1e-14));
    CHECK(std_normal_cdf(-8) == Approx(6.22096057427178e-16).epsilon(1e-10));
    double area = simpson([](double x) { return std_normal_pdf(x); }, -1.3, 0.7);
    CHECK(area == Approx(std_normal_cdf(0.7) - std_normal_cdf(-1.3)).epsilon(1e-12));
}

TEST_CASE("boundary crossing closed forms", "[stochastic]") {
    CHECK(p_linear_boundary(1, 1) == Approx(0.1353352832366127).epsilon(1e-14));
    CHECK(p_linear_boundary(2.5, 0) == 1.0);
    CHECK_THROWS_AS(p_linear_boundary(0, 1), InvalidInput);
    CHECK_THROWS_AS(p_linear_boundary(1, -1), InvalidInput);

    auto p = p_twosided_upper(1);
    CHECK(p.exact == Approx(0.336204).margin(1e-6));
    CHECK(p.bound == Approx(0.39894).margin(5e-6));
    auto far = p_twosided_upper(50);
    CHECK(far.exact * std::sqrt(2 * std::numbers::pi) * 50 == Approx(1).margin(1e-3));
    CHECK_THROWS_AS(p_twosided_upper(0), InvalidInput);

    // Oracle: the left infimum is -Exp(2C) and -inf_{[0,1]} W is |N(0,1)|.
    for (double C : {0.3, 1.0, 2.0, 4.0}) {
        double q = simpson([&](double z) { return 2 * std_normal_pdf(z) * std::exp(-2 * C * z); }, 0, 40);
        CHECK(p_twosided_upper(C).exact == Approx(q).epsilon(1e-9));
        CHECK(p_twosided_upper(C).exact <= p_twosided_upper(C).bound);
    }
}

TEST_CASE("fixed-time crossing against quadrature", "[stochastic]") {
    // P(L <= Y) with L = -Exp(2C), Y ~ N(-C rho tau, tau): E[min(1, e^{2C Y})].
    for (double C : {0.5, 2.0, 5.0})
        for (double tau : {0.1, 0.5, 0.9})
            for (double rho : {0.3, 1.0}) {
                double m = -C * rho * tau, sd = std::sqrt(tau);
                double kink = -m / sd;  // y = 0
                double q = std_normal_cdf(-kink) +
                           simpson([&](double z) { return std_normal_pdf(z) * std::exp(2 * C * (m + sd * z)); },
                                   -40, kink, 200000);
                CHECK(p_fixed_time_crossing(C, tau, rho) == Approx(q).epsilon(1e-7));
            }
    // the deficit from 1 is of order C sqrt(tau)
    CHECK(p_fixed_time_crossing(1e-4, 0.5, 1.0) == Approx(1.0).margin(1e-4));
    CHECK(p_fixed_time_crossing(1e-7, 0.5, 1.0) == Approx(1.0).margin(1e-6));
    CHECK_THROWS_AS(p_fixed_time_crossing(1, 1, 1), InvalidInput);
    CHECK_THROWS_AS(p_fixed_time_crossing(1, 0.5, 0), InvalidInput);
}

TEST_CASE("fixed-time crossing by simulation", "[stochastic]") {
    const double C = 2, tau = 0.5, rho = 1, h = 1e-3, S = 10 / C;
    McSummary s = mc_probability(
        [&](SeedSpec sd) {
            Stream g(sd);
            double left = left_drift_infimum(g, C, S, h);
            RightWalk r = right_walk(g, tau, h, tau);
            return left <= r.value_at_tau - C * rho * tau;
        },
        20000, SeedSpec{11, 0});
    double exact = p_fixed_time_crossing(C, tau, rho);
    double allowance = grid_bias_bound(fixed_time_gap_density(C, tau, rho), h) + drift_truncation_bound(C, S);
    CHECK(std::abs(s.estimate - exact) <= 3 * s.se + allowance);
}

TEST_CASE("fixed-time bound holds on a parameter grid", "[stochastic]") {
    for (int i = 1; i <= 10; ++i)
        for (int j = 1; j <= 10; ++j)
            for (int k = 1; k <= 10; ++k) {
                double C = 0.25 * i, tau = (j - 0.5) / 10.0, rho = k / 10.0;
                CHECK(p_fixed_time_crossing(C, tau, rho) <= p_fixed_time_bound(C, tau, rho) * (1 + 1e-12));
            }
}

TEST_CASE("brownian paths", "[stochastic]") {
    BrownianGrid z = brownian_two_sided(SeedSpec{1, 0}, {0.0});
    CHECK(z.values == std::vector<double>{0.0});
    CHECK_THROWS_AS(brownian_two_sided(SeedSpec{}, {-1.0, 1.0}), InvalidInput);
    CHECK_THROWS_AS(brownian_two_sided(SeedSpec{}, {0.0, 0.0}), InvalidInput);

    const std::size_t N = 100000;
    auto ends = parallel_map(N, [](std::size_t i) {
        BrownianGrid g = brownian_two_sided(SeedSpec{9, i}, {-1.0, -0.5, 0.0, 0.25, 1.0});
        return std::array<double, 2>{g.values[4], g.values[0]};
    });
    for (int side = 0; side < 2; ++side) {
        double m = 0, v = 0;
        for (auto& e : ends) m += e[side];
        m /= N;
        for (auto& e : ends) v += (e[side] - m) * (e[side] - m);
        v /= (N - 1);
        CHECK(std::abs(v - 1) <= 3 * std::sqrt(2.0 / N));
    }
    double cov = 0;
    for (auto& e : ends) cov += e[0] * e[1];
    CHECK(std::abs(cov / N) < 4 / std::sqrt(double(N)));
}

TEST_CASE("monte carlo probability", "[stochastic]") {
    McSummary one = mc_probability([](SeedSpec) { return true; }, 500, SeedSpec{});
    CHECK(one.estimate == 1.0);
    CHECK(one.se == 0.0);
    CHECK_THROWS_AS(mc_probability([](SeedSpec) { return true; }, 99, SeedSpec{}), InvalidInput);

    McSummary half = mc_probability([](SeedSpec s) { return Stream(s).normal() > 0; }, 100000, SeedSpec{2, 0});
    CHECK(std::abs(half.estimate - 0.5) <= 3 * half.se);

    // sup of W on [0,1] above 1: reflection gives 2(1 - Phi(1)); the grid max undershoots.
    const double h = 1e-3;
    McSummary sup = mc_probability(
        [&](SeedSpec s) {
            Stream g(s);
            double w = 0, best = 0;
            for (int k = 0; k < 1000; ++k) best = std::max(best, w += std::sqrt(h) * g.normal());
            return best >= 1.0;
        },
        20000, SeedSpec{4, 0});
    double exact = 2 * (1 - std_normal_cdf(1));
    CHECK(exact == Approx(0.31731).margin(1e-5));
    // density of the running max at level 1 is 2 phi(1)
    double bias = grid_bias_bound(2 * std_normal_pdf(1), h);
    CHECK(sup.estimate <= exact + 3 * sup.se);
    CHECK(sup.estimate >= exact - 3 * sup.se - bias);
}

TEST_CASE("results do not depend on the worker count", "[stochastic]") {
    auto run = [] {
        return mc_probability([](SeedSpec s) { return Stream(s).uniform() < 0.3; }, 5000, SeedSpec{8, 100});
    };
    McSummary a, b;
    {
        ScopedWorkers w("1");
        a = run();
    }
    {
        ScopedWorkers w("3");
        b = run();
    }
    CHECK(a.estimate == b.estimate);
    CHECK(a.se == b.se);
    ScopedWorkers w("4");
    auto xs = parallel_map(1000, [](std::size_t i) { return Stream(SeedSpec{1, i}).normal(); });
    for (std::size_t i = 0; i < xs.size(); i += 97) CHECK(xs[i] == Stream(SeedSpec{1, i}).normal());
}

TEST_CASE("allowances", "[stochastic]") {
    CHECK(grid_bias_bound(1.0, 1e-4) == Approx(kGridOvershoot * 1e-2));
    CHECK(twosided_gap_density(1.0) == Approx(2 * 0.33621).margin(1e-4));
    CHECK(drift_truncation_bound(1.0, 4.0) == Approx(2 * std_normal_cdf(-2)));
    CHECK(drift_truncation_bound(0.0, 4.0) == 1.0);
    McSummary m = summarize_mean({1, 2, 3, 4}, SeedSpec{});
    CHECK(m.estimate == 2.5);
    CHECK(m.se == Approx(std::sqrt(5.0 / 3 / 4)));
}
