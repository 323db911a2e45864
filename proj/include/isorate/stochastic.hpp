#pragma once
// Counter-based random streams, Brownian paths, the normal CDF and
// closed-form boundary-crossing probabilities.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "isorate/errors.hpp"

namespace isorate {

// Philox4x32-10 block cipher (Salmon et al. counter-based generator).
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        if (r > 0) {
            key[0] += W0;
            key[1] += W1;
        }
        std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
    }
    return ctr;
}

struct SeedSpec {
    std::uint64_t master_seed = 0;
    std::uint64_t stream_id = 0;
    bool operator==(const SeedSpec&) const = default;
    SeedSpec offset(std::uint64_t k) const { return SeedSpec{master_seed, stream_id + k}; }
};

// Counter layout: word0 = block index (low), word1 = block index (high 16 bits)
// | substream << 16, words 2..3 = stream id. Key = master seed.
class Stream {
public:
    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type(0); }

    explicit Stream(SeedSpec seed, std::uint32_t substream = 0)
        : key_{std::uint32_t(seed.master_seed), std::uint32_t(seed.master_seed >> 32)},
          sid_lo_(std::uint32_t(seed.stream_id)),
          sid_hi_(std::uint32_t(seed.stream_id >> 32)),
          sub_(substream & 0xFFFFu) {}

    result_type operator()() {
        if (pos_ == 2) refill();
        return buf_[pos_++];
    }

    // Uniform on the open interval (0,1), 53-bit resolution.
    double uniform() { return (double((*this)() >> 11) + 0.5) * 0x1.0p-53; }

    // Standard normal by the 128-layer ziggurat (Marsaglia-Tsang, Doornik variant).
    double normal();

    // Centered Laplace with variance sigma^2.
    double laplace(double sigma) {
        double u = uniform() - 0.5;
        double b = sigma / std::numbers::sqrt2;
        return u < 0 ? b * std::log1p(2 * u) : -b * std::log1p(-2 * u);
    }

    // Centered uniform with variance sigma^2.
    double uniform_centered(double sigma) {
        return (2.0 * uniform() - 1.0) * std::sqrt(3.0) * sigma;
    }

private:
    void refill() {
        auto out = philox4x32({std::uint32_t(block_), std::uint32_t((block_ >> 32) & 0xFFFFu) | (sub_ << 16),
                               sid_lo_, sid_hi_},
                              key_);
        ++block_;
        buf_[0] = (std::uint64_t(out[1]) << 32) | out[0];
        buf_[1] = (std::uint64_t(out[3]) << 32) | out[2];
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint32_t sid_lo_, sid_hi_, sub_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int pos_ = 2;
};

namespace detail {

struct ZigguratTables {
    static constexpr int layers = 128;
    static constexpr double r = 3.442619855899;
    static constexpr double v = 9.91256303526217e-3;
    std::array<double, layers + 1> x{};
    std::array<double, layers> ratio{};
    ZigguratTables() {
        double f = std::exp(-0.5 * r * r);
        x[0] = v / f;
        x[1] = r;
        x[layers] = 0;
        for (int i = 2; i < layers; ++i) {
            x[i] = std::sqrt(-2 * std::log(v / x[i - 1] + f));
            f = std::exp(-0.5 * x[i] * x[i]);
        }
        for (int i = 0; i < layers; ++i) ratio[i] = x[i + 1] / x[i];
    }
};

inline const ZigguratTables& ziggurat() {
    static const ZigguratTables t;
    return t;
}

}  // namespace detail

inline double Stream::normal() {
    const auto& z = detail::ziggurat();
    for (;;) {
        std::uint64_t bits = (*this)();
        unsigned i = unsigned(bits & 0x7F);
        double u = 2.0 * ((double(bits >> 11) + 0.5) * 0x1.0p-53) - 1.0;
        if (std::abs(u) < z.ratio[i]) return u * z.x[i];
        if (i == 0) {
            double x, y;
            do {
                x = std::log(uniform()) / z.r;
                y = std::log(uniform());
            } while (-2 * y < x * x);
            return u < 0 ? x - z.r : z.r - x;
        }
        double x = u * z.x[i];
        double f0 = std::exp(-0.5 * (z.x[i] * z.x[i] - x * x));
        double f1 = std::exp(-0.5 * (z.x[i + 1] * z.x[i + 1] - x * x));
        if (f1 + uniform() * (f0 - f1) < 1.0) return x;
    }
}

// ---------------------------------------------------------------------------
// replicate-parallel execution

inline unsigned worker_count() {
    if (const char* env = std::getenv("ISORATE_WORKERS")) {
        long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return unsigned(v);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

// Calls f(i) for i in [0,n). Results must be written to per-index slots; any
// reduction happens afterwards in index order, so output never depends on the
// number of workers.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    unsigned w = std::min<std::size_t>(worker_count(), std::max<std::size_t>(n, 1));
    if (w <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    const std::size_t chunk = std::max<std::size_t>(1, n / (std::size_t(w) * 16));
    auto body = [&] {
        for (;;) {
            std::size_t b = next.fetch_add(chunk);
            if (b >= n) return;
            std::size_t e = std::min(n, b + chunk);
            for (std::size_t i = b; i < e; ++i) f(i);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned k = 1; k < w; ++k) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

template <class F>
auto parallel_map(std::size_t n, F&& f) {
    using R = decltype(f(std::size_t{}));
    std::vector<R> out(n);
    parallel_for(n, [&](std::size_t i) { out[i] = f(i); });
    return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo summaries

struct McSummary {
    double estimate = 0;
    double se = 0;
    std::uint64_t reps = 0;
    SeedSpec seed{};
    double bias_bound = 0;        // documented discretization allowance
    double truncation_bound = 0;  // window truncation allowance
};

// Event callable: bool(SeedSpec) for replicate seed base.offset(i).
template <class Event>
McSummary mc_probability(Event&& event, std::uint64_t reps, SeedSpec seed) {
    if (reps < 100) throw InvalidInput("mc_probability: reps must be >= 100");
    auto hits = parallel_map(reps, [&](std::size_t i) -> char { return event(seed.offset(i)) ? 1 : 0; });
    std::uint64_t k = 0;
    for (char h : hits) k += std::uint64_t(h);
    McSummary s;
    s.reps = reps;
    s.seed = seed;
    s.estimate = double(k) / double(reps);
    s.se = std::sqrt(s.estimate * (1 - s.estimate) / double(reps));
    return s;
}

inline McSummary summarize_mean(const std::vector<double>& xs, SeedSpec seed) {
    McSummary s;
    s.reps = xs.size();
    s.seed = seed;
    if (xs.empty()) return s;
    double m = 0;
    for (double x : xs) m += x;
    m /= double(xs.size());
    double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    s.estimate = m;
    s.se = xs.size() > 1 ? std::sqrt(v / double(xs.size() - 1) / double(xs.size())) : 0.0;
    return s;
}

// ---------------------------------------------------------------------------
// Brownian paths

struct BrownianGrid {
    std::vector<double> times;
    std::vector<double> values;
};

// Two-sided Brownian motion on a sorted grid containing 0. The right half uses
// substream 1, the left half substream 2.
inline BrownianGrid brownian_two_sided(SeedSpec seed, std::vector<double> times) {
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InvalidInput("brownian_two_sided: grid not sorted");
    auto z = std::lower_bound(times.begin(), times.end(), 0.0);
    if (z == times.end() || *z != 0.0) throw InvalidInput("brownian_two_sided: grid must contain 0");
    std::size_t o = std::size_t(z - times.begin());
    BrownianGrid g{std::move(times), {}};
    g.values.assign(g.times.size(), 0.0);
    Stream right(seed, 1), left(seed, 2);
    for (std::size_t i = o + 1; i < g.times.size(); ++i)
        g.values[i] = g.values[i - 1] + std::sqrt(g.times[i] - g.times[i - 1]) * right.normal();
    for (std::size_t i = o; i-- > 0;)
        g.values[i] = g.values[i + 1] + std::sqrt(g.times[i + 1] - g.times[i]) * left.normal();
    return g;
}

// ---------------------------------------------------------------------------
// closed forms

inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2 * std::numbers::pi);
}

// exp(x^2) erfc(x) for x >= 0 without overflow.
inline double erfcx(double x) {
    if (x < 25.0) return std::exp(x * x) * std::erfc(x);
    double inv2 = 1.0 / (2.0 * x * x), term = 1.0, sum = 1.0;
    for (int k = 1; k < 12; ++k) {
        term *= -double(2 * k - 1) * inv2;
        sum += term;
        if (std::abs(term) < 1e-18) break;
    }
    return sum / (x * std::sqrt(std::numbers::pi));
}

inline double p_linear_boundary(double C, double v) {
    if (!(C > 0)) throw InvalidInput("p_linear_boundary: C must be > 0");
    if (!(v >= 0)) throw InvalidInput("p_linear_boundary: v must be >= 0");
    return std::exp(-2 * C * v);
}

struct TwoSidedProbability {
    double exact;
    double bound;
};

// P(inf_{s<=0} W_s - Cs <= inf_{[0,1]} W) = 2 e^{2C^2}(1 - Phi(2C)), and its bound.
inline TwoSidedProbability p_twosided_upper(double C) {
    if (!(C > 0)) throw InvalidInput("p_twosided_upper: C must be > 0");
    return {erfcx(std::numbers::sqrt2 * C), 1.0 / (std::sqrt(2 * std::numbers::pi) * C)};
}

namespace detail {
inline void check_fixed_time(double C, double tau, double rho) {
    if (!(C > 0)) throw InvalidInput("p_fixed_time_crossing: C must be > 0");
    if (!(tau > 0 && tau < 1)) throw InvalidInput("p_fixed_time_crossing: tau must lie in (0,1)");
    if (!(rho > 0 && rho <= 1)) throw InvalidInput("p_fixed_time_crossing: rho must lie in (0,1]");
}
}  // namespace detail

// P(inf_{s<=0} W_s - Cs <= W_tau - C rho tau).
inline double p_fixed_time_crossing(double C, double tau, double rho) {
    detail::check_fixed_time(C, tau, rho);
    double x = C * std::sqrt(tau) * rho, y = C * std::sqrt(tau) * (2 - rho);
    double t1 = 0.5 * std::erfc(x / std::numbers::sqrt2);
    double t2 = 0.5 * erfcx(y / std::numbers::sqrt2) * std::exp(-0.5 * x * x);
    return std::min(1.0, t1 + t2);
}

inline double p_fixed_time_bound(double C, double tau, double rho) {
    detail::check_fixed_time(C, tau, rho);
    return std::sqrt(2 / (std::numbers::pi * tau)) * std::exp(-C * C * tau * rho * rho / 2) /
           (C * rho * (2 - rho));
}

// ---------------------------------------------------------------------------
// discretization and truncation allowances

// E[max of Brownian motion] - E[max over a grid of step h] ~ beta1 sqrt(h),
// beta1 = -zeta(1/2)/sqrt(2 pi) (Asmussen-Glynn-Pitman).
inline constexpr double kGridOvershoot = 0.5825971579390106;

// First-order bias allowance for P(X <= Y) when one side's infimum is taken
// over a grid of step h: density of X - Y at 0 times beta1 sqrt(h).
inline double grid_bias_bound(double density_at_zero, double h) {
    return density_at_zero * kGridOvershoot * std::sqrt(h);
}

// Density at 0 of (inf_{s<=0} W - Cs) - inf_{[0,1]} W: 2C times the exact probability.
inline double twosided_gap_density(double C) { return 2 * C * p_twosided_upper(C).exact; }

// Density at 0 of (inf_{s<=0} W - Cs) - (W_tau - C rho tau).
inline double fixed_time_gap_density(double C, double tau, double rho) {
    double x = C * std::sqrt(tau) * rho, y = C * std::sqrt(tau) * (2 - rho);
    return 2 * C * 0.5 * erfcx(y / std::numbers::sqrt2) * std::exp(-0.5 * x * x);
}

// P(inf_{s <= -S}(W_s - Cs) < inf over the window) <= P(argmin beyond S) <= 2 Phi(-C sqrt(S)).
inline double drift_truncation_bound(double drift, double S) {
    if (!(drift > 0)) return 1.0;
    return 2 * std_normal_cdf(-drift * std::sqrt(S));
}

// ---------------------------------------------------------------------------
// streaming infima used by the Brownian boundary experiments

// inf over s in [-S, 0] of W_s - C s on a grid of step h (includes s = 0).
inline double left_drift_infimum(Stream& g, double C, double S, double h) {
    std::size_t steps = std::size_t(std::llround(S / h));
    double sq = std::sqrt(h), w = 0, best = 0;
    for (std::size_t k = 1; k <= steps; ++k) {
        w += sq * g.normal();
        best = std::min(best, w + C * h * double(k));
    }
    return best;
}

struct RightWalk {
    double infimum;  // over the grid points in (0, horizon]
    double value_at_tau;
};

inline RightWalk right_walk(Stream& g, double horizon, double h, double tau) {
    std::size_t steps = std::size_t(std::llround(horizon / h));
    std::size_t ktau = std::size_t(std::llround(tau / h));
    double sq = std::sqrt(h), w = 0;
    RightWalk r{std::numeric_limits<double>::infinity(), 0.0};
    for (std::size_t k = 1; k <= steps; ++k) {
        w += sq * g.normal();
        r.infimum = std::min(r.infimum, w);
        if (k == ktau) r.value_at_tau = w;
    }
    return r;
}

}  // namespace isorate
