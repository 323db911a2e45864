#pragma once
// Monotone function families, their primitives F0/G0/H0, the shape
// function psi, the modulus eta and the rate-equation solver.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "isorate/convexcore.hpp"
#include "isorate/errors.hpp"

namespace isorate {

enum class SpecKind { power, flat_then_power, piecewise_linear, table, derived };
enum class SpecMode { regression, density };

inline const char* to_string(SpecKind k) {
    switch (k) {
        case SpecKind::power: return "power";
        case SpecKind::flat_then_power: return "flat_then_power";
        case SpecKind::piecewise_linear: return "piecewise_linear";
        case SpecKind::table: return "table";
        case SpecKind::derived: return "derived";
    }
    return "?";
}
inline const char* to_string(SpecMode m) {
    return m == SpecMode::regression ? "regression" : "density";
}

// One side of a power-type function: |f(t)| = c (|t| - r0)_+^p.
struct PowerBranch {
    double c = 1.0;
    double p = 1.0;
    double r0 = 0.0;

    double value(double u) const {  // u >= 0
        double x = u - r0;
        if (x <= 0 || c == 0) return 0.0;
        return p == 0 ? c : c * std::pow(x, p);
    }
    double integral(double u) const {  // int_0^u value
        double x = u - r0;
        if (x <= 0 || c == 0) return 0.0;
        return c * std::pow(x, p + 1) / (p + 1);
    }
    bool operator==(const PowerBranch&) const = default;
};

class MonotoneFunctionSpec;

namespace detail {

struct PiecewiseData {
    std::vector<double> knots, values;  // original input (values = f at knots)
    double t0 = 0, dt = 0;              // table kind only
    // Integration grid: knots with 0 inserted; phi = integrand of F0 at knots.
    std::vector<double> grid, phi, cum_phi;
    std::vector<double> cum_f;  // int_{first}^{grid_i} f (density cdf)
};

struct Alteration {
    enum Type { regression_right, regression_left, density_left, density_right } type;
    std::shared_ptr<const MonotoneFunctionSpec> base;
    double level = 0;  // plateau level
    double s = 0;      // plateau end (regression) / u* or v* (density)
    double eta = 0;    // density normalizer
};

}  // namespace detail

class MonotoneFunctionSpec {
public:
    MonotoneFunctionSpec() : MonotoneFunctionSpec(power(1.0, 1.0)) {}

    // Regression: f(t) = c sgn(t)|t|^p. Density: f(t) = h - c sgn(t)|t|^p on [-1, support_right].
    static MonotoneFunctionSpec power(double c, double p, SpecMode mode = SpecMode::regression,
                                      double support_right = 1.0) {
        return branches(SpecKind::power, PowerBranch{c, p, 0}, PowerBranch{c, p, 0}, mode,
                        support_right);
    }

    static MonotoneFunctionSpec branches(SpecKind kind, PowerBranch left, PowerBranch right,
                                         SpecMode mode = SpecMode::regression,
                                         double support_right = 1.0) {
        if (kind != SpecKind::power && kind != SpecKind::flat_then_power)
            throw InvalidInput("branches: kind must be power or flat_then_power");
        for (const PowerBranch* b : {&left, &right}) {
            if (!(b->c >= 0) || !std::isfinite(b->c)) throw ConfigError("c", "must be >= 0");
            if (!(b->p >= 0) || !std::isfinite(b->p)) throw ConfigError("p", "must be >= 0");
            if (!(b->r0 >= 0) || !std::isfinite(b->r0)) throw ConfigError("r0", "must be >= 0");
            if (kind == SpecKind::power && b->r0 != 0)
                throw ConfigError("r0", "power kind has no flat part");
        }
        MonotoneFunctionSpec s(kind, mode);
        s.left_ = left;
        s.right_ = right;
        if (mode == SpecMode::density) {
            if (!(support_right > 0) || !std::isfinite(support_right))
                throw ConfigError("support_right", "must be > 0");
            for (const PowerBranch* b : {&left, &right})
                if (b->p == 0 && b->r0 == 0 && b->c > 0)
                    throw ConfigError("p", "density must be continuous at 0 (p > 0)");
            s.support_ = support_right;
            double g_int = s.branch_primitive(support_right) - s.branch_primitive(-1.0);
            s.height_ = (1.0 + g_int) / (support_right + 1.0);
            if (s.height_ - s.branch_value(support_right) < -1e-12)
                throw ConfigError("", "density would be negative near the right support end");
            s.build_quantile_table();
        }
        return s;
    }

    static MonotoneFunctionSpec flat_then_power(double r0, double c, double p,
                                                SpecMode mode = SpecMode::regression,
                                                double support_right = 1.0) {
        return branches(SpecKind::flat_then_power, PowerBranch{c, p, r0}, PowerBranch{c, p, r0},
                        mode, support_right);
    }

    // Regression: knots cover [-1,1], values non-decreasing, f(0)=0.
    // Density: knots start at -1, values non-increasing, non-negative, integrate to 1;
    // the density is 0 beyond the last knot.
    static MonotoneFunctionSpec piecewise_linear(std::vector<double> knots,
                                                 std::vector<double> values,
                                                 SpecMode mode = SpecMode::regression) {
        return make_piecewise(SpecKind::piecewise_linear, std::move(knots), std::move(values),
                              mode, 0, 0);
    }

    static MonotoneFunctionSpec table(double t0, double dt, std::vector<double> values,
                                      SpecMode mode = SpecMode::regression) {
        if (!(dt > 0)) throw ConfigError("dt", "must be > 0");
        std::vector<double> knots(values.size());
        for (std::size_t i = 0; i < knots.size(); ++i) knots[i] = t0 + double(i) * dt;
        return make_piecewise(SpecKind::table, std::move(knots), std::move(values), mode, t0, dt);
    }

    static MonotoneFunctionSpec derived(SpecMode mode, detail::Alteration alt) {
        MonotoneFunctionSpec s(SpecKind::derived, mode);
        s.alt_ = std::make_shared<const detail::Alteration>(std::move(alt));
        if (mode == SpecMode::density) {
            s.support_ = s.alt_->base->support_;
            s.height_ = s.value(0.0);
            s.build_quantile_table();
        }
        return s;
    }

    SpecKind kind() const { return kind_; }
    SpecMode mode() const { return mode_; }
    const PowerBranch& left_branch() const { return left_; }
    const PowerBranch& right_branch() const { return right_; }
    double support_right() const { return support_; }
    const detail::PiecewiseData* piecewise() const { return pw_.get(); }
    const detail::Alteration* alteration() const { return alt_.get(); }
    bool scale_invariant() const {
        return kind_ == SpecKind::power || (kind_ == SpecKind::flat_then_power &&
                                            left_.r0 == 0 && right_.r0 == 0);
    }

    double domain_left() const { return -1.0; }
    double domain_right() const {
        return mode_ == SpecMode::regression ? 1.0 : std::numeric_limits<double>::infinity();
    }

    // f0(t).
    double value(double t) const {
        check_domain(t);
        switch (kind_) {
            case SpecKind::power:
            case SpecKind::flat_then_power:
                if (mode_ == SpecMode::regression) return branch_value(t);
                if (t > support_) return 0.0;
                return height_ - branch_value(t);
            case SpecKind::piecewise_linear:
            case SpecKind::table: return pw_value(t);
            case SpecKind::derived: return alt_value(t);
        }
        return 0;
    }

    // F0(t): int_0^t f0 (regression) or int_0^t (f0(0) - f0) (density).
    double primitive(double t) const {
        check_domain(t);
        switch (kind_) {
            case SpecKind::power:
            case SpecKind::flat_then_power:
                if (mode_ == SpecMode::regression || t <= support_) return branch_primitive(t);
                return branch_primitive(support_) + height_ * (t - support_);
            case SpecKind::piecewise_linear:
            case SpecKind::table: return pw_primitive(t);
            case SpecKind::derived: return alt_primitive(t);
        }
        return 0;
    }

    // Distribution function (density mode).
    double cdf(double t) const {
        require_density("cdf");
        if (t <= -1.0) return 0.0;
        switch (kind_) {
            case SpecKind::power:
            case SpecKind::flat_then_power:
                if (t >= support_) return 1.0;
                return height_ * (t + 1.0) - (branch_primitive(t) - branch_primitive(-1.0));
            case SpecKind::piecewise_linear:
            case SpecKind::table: return pw_cdf(t);
            case SpecKind::derived: return alt_cdf(t);
        }
        return 0;
    }

    // Inverse distribution function on (0,1); bracketed Newton, tolerance 1e-12.
    double quantile(double u) const {
        require_density("quantile");
        if (!(u > 0 && u < 1)) throw DomainError("quantile: u must lie in (0,1)");
        const auto& tab = *qtab_;
        const double lo_t = -1.0, hi_t = support_end();
        const std::size_t m = tab.size() - 1;
        auto it = std::upper_bound(tab.begin(), tab.end(), u);
        std::size_t j = std::min<std::size_t>(std::max<std::ptrdiff_t>(it - tab.begin(), 1), m);
        double step = (hi_t - lo_t) / double(m);
        double a = lo_t + step * double(j - 1), b = lo_t + step * double(j);
        double fa = tab[j - 1] - u, fb = tab[j] - u;
        double x = fb > fa ? a - fa * (b - a) / (fb - fa) : 0.5 * (a + b);
        for (int it2 = 0; it2 < 100; ++it2) {
            double fx = cdf(x) - u;
            if (fx == 0) return x;
            if (fx < 0) a = x; else b = x;
            if (b - a <= 1e-12) break;
            double d = value(x);
            double nx = d > 0 ? x - fx / d : 0.5 * (a + b);
            if (!(nx > a && nx < b)) nx = 0.5 * (a + b);
            if (std::abs(nx - x) <= 1e-13) { x = nx; break; }
            x = nx;
        }
        return x;
    }

    // Right end of the set where the density is positive (density mode).
    double support_end() const {
        if (kind_ == SpecKind::piecewise_linear || kind_ == SpecKind::table)
            return pw_->knots.back();
        return support_;
    }

    // Largest r in [0, rmax] with F0(+-r) = 0.
    double flat_radius(Side side, double rmax = 1.0) const {
        double sg = side == Side::right ? 1.0 : -1.0;
        if (kind_ == SpecKind::power || kind_ == SpecKind::flat_then_power) {
            const PowerBranch& b = side == Side::right ? right_ : left_;
            if (b.c == 0) return rmax;
            return std::min(b.r0, rmax);
        }
        if (primitive(sg * rmax) == 0) return rmax;
        double lo = 0, hi = rmax;
        for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
            double mid = 0.5 * (lo + hi);
            if (primitive(sg * mid) == 0) lo = mid; else hi = mid;
        }
        return lo;
    }

    bool operator==(const MonotoneFunctionSpec& o) const {
        if (kind_ != o.kind_ || mode_ != o.mode_) return false;
        switch (kind_) {
            case SpecKind::power:
            case SpecKind::flat_then_power:
                return left_ == o.left_ && right_ == o.right_ &&
                       (mode_ == SpecMode::regression || support_ == o.support_);
            case SpecKind::piecewise_linear:
                return pw_->knots == o.pw_->knots && pw_->values == o.pw_->values;
            case SpecKind::table:
                return pw_->t0 == o.pw_->t0 && pw_->dt == o.pw_->dt &&
                       pw_->values == o.pw_->values;
            case SpecKind::derived: return alt_ == o.alt_;
        }
        return false;
    }

private:
    MonotoneFunctionSpec(SpecKind k, SpecMode m) : kind_(k), mode_(m) {}

    void check_domain(double t) const {
        if (!(t >= -1.0 - 1e-12) || (mode_ == SpecMode::regression && !(t <= 1.0 + 1e-12)))
            throw DomainError("t = " + std::to_string(t) + " outside the domain");
    }
    void require_density(const char* what) const {
        if (mode_ != SpecMode::density)
            throw InvalidInput(std::string(what) + " needs a density-mode spec");
    }

    // Regression-shaped branch function g and its primitive from 0.
    double branch_value(double t) const {
        return t >= 0 ? right_.value(t) : -left_.value(-t);
    }
    double branch_primitive(double t) const {
        return t >= 0 ? right_.integral(t) : left_.integral(-t);
    }

    static MonotoneFunctionSpec make_piecewise(SpecKind kind, std::vector<double> knots,
                                               std::vector<double> values, SpecMode mode,
                                               double t0, double dt) {
        if (knots.size() != values.size()) throw ConfigError("values", "length differs from knots");
        if (knots.size() < 2) throw ConfigError("values", "need at least 2 points");
        for (std::size_t i = 0; i < knots.size(); ++i) {
            if (!std::isfinite(knots[i]) || !std::isfinite(values[i]))
                throw ConfigError("values[" + std::to_string(i) + "]", "non-finite");
            if (i > 0 && !(knots[i] > knots[i - 1]))
                throw ConfigError("knots[" + std::to_string(i) + "]", "not strictly increasing");
            if (i > 0 && mode == SpecMode::regression && values[i] < values[i - 1])
                throw ConfigError("values[" + std::to_string(i) + "]",
                                  "regression function must be non-decreasing");
            if (i > 0 && mode == SpecMode::density && values[i] > values[i - 1])
                throw ConfigError("values[" + std::to_string(i) + "]",
                                  "density must be non-increasing");
            if (mode == SpecMode::density && values[i] < 0)
                throw ConfigError("values[" + std::to_string(i) + "]", "density must be >= 0");
        }
        auto d = std::make_shared<detail::PiecewiseData>();
        d->knots = knots;
        d->values = values;
        d->t0 = t0;
        d->dt = dt;
        auto interp = [&](double t) {
            auto it = std::lower_bound(knots.begin(), knots.end(), t);
            std::size_t j = std::size_t(it - knots.begin());
            if (knots[j] == t) return values[j];
            double w = (t - knots[j - 1]) / (knots[j] - knots[j - 1]);
            return values[j - 1] + w * (values[j] - values[j - 1]);
        };
        if (mode == SpecMode::regression) {
            if (knots.front() > -1.0 || knots.back() < 1.0)
                throw ConfigError("knots", "must cover [-1, 1]");
            if (std::abs(interp(0.0)) > 1e-12) throw ConfigError("values", "f0(0) must be 0");
        } else {
            if (knots.front() != -1.0) throw ConfigError("knots", "density knots must start at -1");
            if (knots.back() <= 0.0) throw ConfigError("knots", "density support must contain 0");
        }
        d->grid = knots;
        if (!std::binary_search(knots.begin(), knots.end(), 0.0)) {
            auto it = std::lower_bound(d->grid.begin(), d->grid.end(), 0.0);
            d->grid.insert(it, 0.0);
        }
        double f_at0 = mode == SpecMode::density ? interp(0.0) : 0.0;
        std::vector<double> fv(d->grid.size());
        for (std::size_t i = 0; i < fv.size(); ++i) fv[i] = interp(d->grid[i]);
        if (mode == SpecMode::regression) fv[std::size_t(std::find(d->grid.begin(), d->grid.end(), 0.0) - d->grid.begin())] = 0.0;
        d->phi.resize(fv.size());
        for (std::size_t i = 0; i < fv.size(); ++i)
            d->phi[i] = mode == SpecMode::regression ? fv[i] : f_at0 - fv[i];
        std::size_t z = std::size_t(std::find(d->grid.begin(), d->grid.end(), 0.0) - d->grid.begin());
        d->cum_phi.assign(fv.size(), 0.0);
        for (std::size_t i = z + 1; i < fv.size(); ++i)
            d->cum_phi[i] = d->cum_phi[i - 1] +
                            0.5 * (d->grid[i] - d->grid[i - 1]) * (d->phi[i] + d->phi[i - 1]);
        for (std::size_t i = z; i-- > 0;)
            d->cum_phi[i] = d->cum_phi[i + 1] -
                            0.5 * (d->grid[i + 1] - d->grid[i]) * (d->phi[i] + d->phi[i + 1]);
        d->cum_f.assign(fv.size(), 0.0);
        for (std::size_t i = 1; i < fv.size(); ++i)
            d->cum_f[i] = d->cum_f[i - 1] + 0.5 * (d->grid[i] - d->grid[i - 1]) * (fv[i] + fv[i - 1]);
        MonotoneFunctionSpec s(kind, mode);
        s.pw_ = d;
        if (mode == SpecMode::density) {
            if (std::abs(d->cum_f.back() - 1.0) > 1e-9)
                throw ConfigError("values", "density integrates to " +
                                                std::to_string(d->cum_f.back()) + ", not 1");
            s.height_ = f_at0;
            s.support_ = knots.back();
            s.build_quantile_table();
        }
        return s;
    }

    std::size_t pw_segment(double t) const {  // index j with grid[j] <= t < grid[j+1]
        const auto& g = pw_->grid;
        if (t < g.front() || t > g.back()) throw DomainError("t outside the table range");
        auto it = std::upper_bound(g.begin(), g.end(), t);
        std::size_t j = std::size_t(it - g.begin());
        return j == 0 ? 0 : std::min(j - 1, g.size() - 2);
    }
    double pw_f(double t) const {
        const auto& g = pw_->grid;
        std::size_t j = pw_segment(t);
        double w = (t - g[j]) / (g[j + 1] - g[j]);
        double f0 = mode_ == SpecMode::regression ? pw_->phi[j] : height_ - pw_->phi[j];
        double f1 = mode_ == SpecMode::regression ? pw_->phi[j + 1] : height_ - pw_->phi[j + 1];
        return f0 + w * (f1 - f0);
    }
    double pw_value(double t) const {
        if (mode_ == SpecMode::density && t > pw_->grid.back()) return 0.0;
        return pw_f(t);
    }
    double pw_primitive(double t) const {
        const auto& d = *pw_;
        if (t > d.grid.back()) {
            if (mode_ == SpecMode::regression) throw DomainError("t outside the table range");
            return d.cum_phi.back() + height_ * (t - d.grid.back());
        }
        double phit = mode_ == SpecMode::regression ? pw_f(t) : height_ - pw_f(t);
        if (t >= 0) {
            auto it = std::upper_bound(d.grid.begin(), d.grid.end(), t);
            std::size_t j = std::size_t(it - d.grid.begin()) - 1;
            return d.cum_phi[j] + 0.5 * (t - d.grid[j]) * (d.phi[j] + phit);
        }
        auto it = std::lower_bound(d.grid.begin(), d.grid.end(), t);
        std::size_t j = std::size_t(it - d.grid.begin());
        return d.cum_phi[j] - 0.5 * (d.grid[j] - t) * (d.phi[j] + phit);
    }
    double pw_cdf(double t) const {
        const auto& d = *pw_;
        if (t >= d.grid.back()) return 1.0;
        std::size_t j = pw_segment(t);
        double fj = height_ - d.phi[j];
        return d.cum_f[j] + 0.5 * (t - d.grid[j]) * (fj + pw_f(t));
    }

    double alt_value(double t) const {
        const auto& A = *alt_;
        const auto& B = *A.base;
        double f = B.value(t);
        switch (A.type) {
            case detail::Alteration::regression_right: return t >= 0 ? std::max(f, A.level) : f;
            case detail::Alteration::regression_left: return t <= 0 ? std::min(f, A.level) : f;
            case detail::Alteration::density_left: return t <= 0 ? std::max(f - A.eta, A.level) : f;
            case detail::Alteration::density_right:
                return (t >= 0 && t <= 1) ? std::min(f + A.eta, A.level) : f;
        }
        return f;
    }
    double alt_primitive(double t) const {
        const auto& A = *alt_;
        const auto& B = *A.base;
        switch (A.type) {
            case detail::Alteration::regression_right:
                if (t < 0) return B.primitive(t);
                return A.level * std::min(t, A.s) + (t > A.s ? B.primitive(t) - B.primitive(A.s) : 0.0);
            case detail::Alteration::regression_left:
                if (t > 0) return B.primitive(t);
                return -A.level * std::min(-t, A.s) +
                       (-t > A.s ? B.primitive(t) - B.primitive(-A.s) : 0.0);
            default: return height_ * t - (alt_cdf(t) - alt_cdf(0.0));
        }
    }
    double alt_cdf(double t) const {
        const auto& A = *alt_;
        const auto& B = *A.base;
        if (t <= -1.0) return 0.0;
        if (A.type == detail::Alteration::density_left) {
            double us = A.s;
            if (t > 0) return B.cdf(t);
            if (t <= -us) return B.cdf(t) - A.eta * (t + 1.0);
            return B.cdf(-us) - A.eta * (1.0 - us) + A.level * (t + us);
        }
        if (A.type == detail::Alteration::density_right) {
            double vs = A.s;
            if (t < 0 || t > 1) return B.cdf(t);
            double c0 = B.cdf(0.0);
            if (t <= vs) return c0 + A.level * t;
            return c0 + A.level * vs + B.cdf(t) - B.cdf(vs) + A.eta * (t - vs);
        }
        throw InvalidInput("cdf on a regression alternative");
    }

    void build_quantile_table() {
        const std::size_t m = 4096;
        auto tab = std::make_shared<std::vector<double>>(m + 1);
        double lo = -1.0, hi = support_end();
        for (std::size_t i = 0; i <= m; ++i) (*tab)[i] = cdf(lo + (hi - lo) * double(i) / double(m));
        (*tab)[0] = 0.0;
        (*tab)[m] = 1.0;
        for (std::size_t i = 1; i <= m; ++i) (*tab)[i] = std::max((*tab)[i], (*tab)[i - 1]);
        qtab_ = tab;
    }

    SpecKind kind_;
    SpecMode mode_;
    PowerBranch left_{}, right_{};
    double support_ = 1.0;  // density: right end of the support
    double height_ = 0.0;   // density: f0(0)
    std::shared_ptr<const detail::PiecewiseData> pw_;
    std::shared_ptr<const detail::Alteration> alt_;
    std::shared_ptr<const std::vector<double>> qtab_;
};

inline double primitive_F0(const MonotoneFunctionSpec& spec, double t) { return spec.primitive(t); }

// ---------------------------------------------------------------------------
// G0, H0

inline double G0(const MonotoneFunctionSpec& spec, double t) {
    if (t == 0) return 0.0;
    return spec.primitive(t) / t;
}

namespace detail {

// Monotone bisection to full double resolution (cap 200 iterations).
template <class F>
double bisect(F&& increasing, double target, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (increasing(mid) < target) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

inline double G0_inv(const MonotoneFunctionSpec& spec, double a, double rmax = 1.0) {
    if (a == 0) return 0.0;
    Side side = a > 0 ? Side::right : Side::left;
    double sg = a > 0 ? 1.0 : -1.0;
    double r0 = spec.flat_radius(side, rmax);
    double top = G0(spec, sg * rmax) * sg;
    if (!(std::abs(a) <= top) || r0 >= rmax)
        throw DomainError("G0_inv: argument " + std::to_string(a) + " outside the range of G0");
    double r = detail::bisect([&](double x) { return sg * G0(spec, sg * x); }, std::abs(a), r0, rmax);
    return sg * r;
}

struct H0Scale {
    double delta = 0.1;
    double a_pos = 0;  // a_delta on the right
    double a_neg = 0;  // a_delta on the left (magnitude)
};

inline H0Scale h0_scale(const MonotoneFunctionSpec& spec, double delta = 0.1) {
    if (!(delta > 0 && delta <= 1)) throw InvalidInput("H0: delta must lie in (0,1]");
    return H0Scale{delta, G0(spec, delta), -G0(spec, -delta)};
}

namespace detail {
inline double h0_core(const MonotoneFunctionSpec& spec, double x) {
    if (x == 0) return 0.0;
    return x * std::sqrt(std::abs(G0_inv(spec, x)));
}
}  // namespace detail

inline double H0(const MonotoneFunctionSpec& spec, double x, double delta = 0.1) {
    H0Scale k = h0_scale(spec, delta);
    if (x >= 0) {
        if (x <= k.a_pos) return detail::h0_core(spec, x);
        return detail::h0_core(spec, k.a_pos) + x - k.a_pos;
    }
    if (-x <= k.a_neg) return detail::h0_core(spec, x);
    return detail::h0_core(spec, -k.a_neg) + x + k.a_neg;
}

inline double H0_inv(const MonotoneFunctionSpec& spec, double y, double delta = 0.1) {
    H0Scale k = h0_scale(spec, delta);
    if (!std::isfinite(y)) throw DomainError("H0_inv: non-finite argument");
    if (y == 0) return 0.0;
    if (y > 0) {
        double top = detail::h0_core(spec, k.a_pos);
        if (y >= top) return k.a_pos + y - top;
        return detail::bisect([&](double x) { return detail::h0_core(spec, x); }, y, 0.0, k.a_pos);
    }
    double bot = detail::h0_core(spec, -k.a_neg);
    if (y <= bot) return -k.a_neg + y - bot;
    return -detail::bisect([&](double x) { return -detail::h0_core(spec, -x); }, -y, 0.0, k.a_neg);
}

inline double chi_exponent(double alpha_lip) {
    if (!(alpha_lip > 0)) throw InvalidInput("chi_exponent: alpha must be > 0");
    return (2 * alpha_lip + 1) / (2 * alpha_lip);
}

// ---------------------------------------------------------------------------
// psi and eta

class ShapeFunction {
public:
    ShapeFunction(const MonotoneFunctionSpec& spec, Side side, double t0 = 0.5, int levels = 40)
        : spec_(&spec), side_(side), t0_(t0), levels_(levels) {
        double sg = side == Side::right ? 1.0 : -1.0;
        flat_ = spec.primitive(sg * t0 * std::ldexp(1.0, -levels)) == 0.0;
    }

    Side side() const { return side_; }
    bool flat() const { return flat_; }

    double operator()(double s) const {
        if (!(s >= 0 && s <= 1)) throw DomainError("psi: s outside [0,1]");
        if (s == 1) return 1.0;
        if (s == 0 || flat_) return 0.0;
        if (spec_->scale_invariant()) {
            const PowerBranch& b =
                side_ == Side::right ? spec_->right_branch() : spec_->left_branch();
            return std::pow(s, b.p + 1);
        }
        // limsup approximated by the sup over the finer half of the t-grid
        double sg = side_ == Side::right ? 1.0 : -1.0;
        double best = 0.0;
        for (int k = levels_ / 2; k <= levels_; ++k) {
            double t = t0_ * std::ldexp(1.0, -k);
            double den = spec_->primitive(sg * t);
            if (den > 0) best = std::max(best, spec_->primitive(sg * s * t) / den);
        }
        return std::min(best, s);
    }

private:
    const MonotoneFunctionSpec* spec_;
    Side side_;
    double t0_;
    int levels_;
    bool flat_ = false;
};

inline double psi(const MonotoneFunctionSpec& spec, double s, Side side = Side::right) {
    return ShapeFunction(spec, side)(s);
}

// sup_{s in [0,tau]} (sup_{u <= t} F0(su)/F0(u) - psi(s)) on fixed s- and u-grids.
inline double eta_modulus(const MonotoneFunctionSpec& spec, double tau, double t,
                          Side side = Side::right) {
    if (!(tau > 0 && tau < 1)) throw DomainError("eta_modulus: tau must lie in (0,1)");
    if (!(t > 0 && t <= 1)) throw DomainError("eta_modulus: t must lie in (0,1]");
    double sg = side == Side::right ? 1.0 : -1.0;
    if (spec.primitive(sg * t) == 0 || spec.scale_invariant()) return 0.0;
    ShapeFunction ps(spec, side);
    std::vector<double> us{t};
    for (int j = 0; j <= 8 * 40; ++j) {
        double u = std::exp2(-double(j) / 8.0);
        if (u < t) us.push_back(u);
    }
    double eta = 0.0;
    const int ns = 200;
    for (int i = 0; i <= ns; ++i) {
        double s = tau * double(i) / ns;
        double g = 0.0;
        for (double u : us) {
            double den = spec.primitive(sg * u);
            if (den > 0) g = std::max(g, spec.primitive(sg * s * u) / den);
        }
        eta = std::max(eta, g - ps(s));
    }
    return eta;
}

// ---------------------------------------------------------------------------
// rate equations

struct RateSolution {
    double a = 0, r_a = 0, b = 0, r_b = 0, C = 0, n_or_inv_eps2 = 0;
    bool parametric_left = false, parametric_right = false;
};

struct SideRate {
    double rate = 0, radius = 0;
    bool parametric = false;
};

// Solves F0(sg r) = rate r, sqrt(r) rate = C n^{-1/2} on one side.
inline SideRate solve_side(const MonotoneFunctionSpec& spec, Side side, double C, double n,
                           double rmax = 1.0) {
    double sg = side == Side::right ? 1.0 : -1.0;
    double target = C / std::sqrt(n);
    double r0 = spec.flat_radius(side, rmax);
    if (r0 >= rmax) return SideRate{target, rmax, true};
    auto phi = [&](double r) { return spec.primitive(sg * r) / std::sqrt(r); };
    double top = phi(rmax);
    if (top < target) {
        double n_min = C * C / (top * top);
        throw Infeasible("rate equations infeasible for n = " + std::to_string(n) +
                             "; minimal n = " + std::to_string(n_min),
                         n_min);
    }
    double r = detail::bisect(phi, target, r0, rmax);
    return SideRate{std::abs(G0(spec, sg * r)), r, r0 > 0};
}

inline RateSolution solve_rates(const MonotoneFunctionSpec& spec, double C, double n) {
    if (!(C > 0)) throw InvalidInput("solve_rates: C must be > 0");
    if (!(n > 0)) throw InvalidInput("solve_rates: n must be > 0");
    SideRate right, left;
    double n_min = 0;
    std::string msg;
    for (Side s : {Side::right, Side::left}) {
        try {
            (s == Side::right ? right : left) = solve_side(spec, s, C, n);
        } catch (const Infeasible& e) {
            n_min = std::max(n_min, e.minimal_n);
        }
    }
    if (n_min > 0)
        throw Infeasible("rate equations infeasible for n = " + std::to_string(n) +
                             "; minimal n = " + std::to_string(n_min),
                         n_min);
    RateSolution out;
    out.C = C;
    out.n_or_inv_eps2 = n;
    out.parametric_left = left.parametric;
    out.parametric_right = right.parametric;
    // Density mode reverses the roles: a lives on the left, b on the right.
    const SideRate& A = spec.mode() == SpecMode::regression ? right : left;
    const SideRate& B = spec.mode() == SpecMode::regression ? left : right;
    out.a = A.rate;
    out.r_a = A.radius;
    out.b = B.rate;
    out.r_b = B.radius;
    return out;
}

}  // namespace isorate
