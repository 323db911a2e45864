#pragma once
// Convex minorants / concave majorants of piecewise-linear paths, PAVA,
// slope extraction and the switch relation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "isorate/errors.hpp"

namespace isorate {

class CumulativePath {
public:
    CumulativePath() = default;
    CumulativePath(std::vector<double> knots, std::vector<double> values)
        : knots_(std::move(knots)), values_(std::move(values)) {
        if (knots_.size() != values_.size())
            throw InvalidInput("CumulativePath: knots and values differ in length");
        if (knots_.size() < 2) throw InvalidInput("CumulativePath: need at least 2 knots");
        for (std::size_t i = 0; i < knots_.size(); ++i) {
            if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]))
                throw InvalidInput("CumulativePath: non-finite entry at " + std::to_string(i));
            if (i > 0 && !(knots_[i] > knots_[i - 1]))
                throw InvalidInput("CumulativePath: knots not strictly increasing at " +
                                   std::to_string(i));
        }
    }

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return knots_.size(); }
    double front() const { return knots_.front(); }
    double back() const { return knots_.back(); }

    std::optional<std::size_t> origin_index() const {
        auto it = std::lower_bound(knots_.begin(), knots_.end(), 0.0);
        if (it != knots_.end() && *it == 0.0) return std::size_t(it - knots_.begin());
        return std::nullopt;
    }

    // Linear interpolation between knots.
    double operator()(double t) const {
        if (t < knots_.front() || t > knots_.back())
            throw DomainError("CumulativePath: t outside knot range");
        auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
        std::size_t j = std::size_t(it - knots_.begin());
        if (knots_[j] == t) return values_[j];
        double w = (t - knots_[j - 1]) / (knots_[j] - knots_[j - 1]);
        return values_[j - 1] + w * (values_[j] - values_[j - 1]);
    }

    CumulativePath negated() const {
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = -values_[i];
        return CumulativePath(knots_, std::move(v));
    }

private:
    std::vector<double> knots_, values_;
};

enum class Orientation { minorant, majorant };
enum class Side { left, right };

class ConvexHullFit {
public:
    ConvexHullFit(std::vector<double> t, std::vector<double> v, Orientation o)
        : t_(std::move(t)), v_(std::move(v)), orientation_(o) {}

    const std::vector<double>& abscissae() const { return t_; }
    const std::vector<double>& ordinates() const { return v_; }
    Orientation orientation() const { return orientation_; }
    std::size_t vertex_count() const { return t_.size(); }
    std::size_t segment_count() const { return t_.size() - 1; }

    double segment_slope(std::size_t i) const {
        return (v_[i + 1] - v_[i]) / (t_[i + 1] - t_[i]);
    }

    // Index of the segment ending at or passing t (left) / starting at or passing t (right).
    std::size_t segment_index(double t, Side side) const {
        if (side == Side::left) {
            if (!(t > t_.front() && t < t_.back()))
                throw DomainError("slope_at: left slope needs t strictly inside the hull range");
            auto it = std::lower_bound(t_.begin(), t_.end(), t);  // first vertex >= t
            return std::size_t(it - t_.begin()) - 1;
        }
        if (!(t >= t_.front() && t < t_.back()))
            throw DomainError("slope_at: right slope needs first <= t < last");
        auto it = std::upper_bound(t_.begin(), t_.end(), t);  // first vertex > t
        return std::size_t(it - t_.begin()) - 1;
    }

    double slope_at(double t, Side side) const { return segment_slope(segment_index(t, side)); }

    double value_at(double t) const {
        if (t < t_.front() || t > t_.back()) throw DomainError("hull value outside range");
        auto it = std::lower_bound(t_.begin(), t_.end(), t);
        std::size_t j = std::size_t(it - t_.begin());
        if (t_[j] == t) return v_[j];
        double w = (t - t_[j - 1]) / (t_[j] - t_[j - 1]);
        return v_[j - 1] + w * (v_[j] - v_[j - 1]);
    }

private:
    std::vector<double> t_, v_;
    Orientation orientation_;
};

namespace detail {

// Andrew's monotone chain, lower half. Points with b on or above segment ac
// are popped, so collinear middle points never become vertices.
inline ConvexHullFit lower_hull(const std::vector<double>& x, const std::vector<double>& y,
                                double sign, Orientation o) {
    std::vector<double> ht, hv;
    ht.reserve(16);
    hv.reserve(16);
    for (std::size_t i = 0; i < x.size(); ++i) {
        double yi = sign * y[i];
        while (ht.size() >= 2) {
            std::size_t k = ht.size();
            double ta = ht[k - 2], va = hv[k - 2], tb = ht[k - 1], vb = hv[k - 1];
            if ((vb - va) * (x[i] - tb) >= (yi - vb) * (tb - ta)) {
                ht.pop_back();
                hv.pop_back();
            } else {
                break;
            }
        }
        ht.push_back(x[i]);
        hv.push_back(yi);
    }
    if (sign < 0)
        for (double& v : hv) v = -v;
    return ConvexHullFit(std::move(ht), std::move(hv), o);
}

}  // namespace detail

inline ConvexHullFit gcm(const CumulativePath& path) {
    if (path.size() < 2) throw InvalidInput("gcm: fewer than 2 knots");
    return detail::lower_hull(path.knots(), path.values(), 1.0, Orientation::minorant);
}

inline ConvexHullFit lcm_majorant(const CumulativePath& path) {
    if (path.size() < 2) throw InvalidInput("lcm_majorant: fewer than 2 knots");
    return detail::lower_hull(path.knots(), path.values(), -1.0, Orientation::majorant);
}

inline double slope_at(const ConvexHullFit& fit, double t, Side side) {
    return fit.slope_at(t, side);
}

struct IsotonicFit {
    std::vector<double> levels;
    std::vector<std::pair<std::size_t, std::size_t>> blocks;  // [begin, end)
};

inline IsotonicFit pava(const std::vector<double>& values, const std::vector<double>& weights) {
    if (values.empty()) throw InvalidInput("pava: empty input");
    if (values.size() != weights.size()) throw InvalidInput("pava: length mismatch");
    struct Block {
        double mean, weight;
        std::size_t begin, end;
    };
    std::vector<Block> st;
    st.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!(weights[i] > 0)) throw InvalidInput("pava: weights must be positive");
        Block b{values[i], weights[i], i, i + 1};
        while (!st.empty() && st.back().mean >= b.mean) {
            Block& p = st.back();
            double w = p.weight + b.weight;
            b = Block{(p.mean * p.weight + b.mean * b.weight) / w, w, p.begin, b.end};
            st.pop_back();
        }
        st.push_back(b);
    }
    IsotonicFit fit;
    fit.levels.resize(values.size());
    for (const Block& b : st) {
        fit.blocks.emplace_back(b.begin, b.end);
        for (std::size_t i = b.begin; i < b.end; ++i) fit.levels[i] = b.mean;
    }
    return fit;
}

inline IsotonicFit pava(const std::vector<double>& values) {
    return pava(values, std::vector<double>(values.size(), 1.0));
}

// {left slope of gcm(path) at split >= a}, evaluated through infima of path - a t.
inline bool switch_event(const CumulativePath& path, double a, double split) {
    const auto& k = path.knots();
    const auto& v = path.values();
    if (split < k.front() || split > k.back())
        throw DomainError("switch_event: split outside knot range");
    double left = std::numeric_limits<double>::infinity();
    double right = left;
    for (std::size_t i = 0; i < k.size(); ++i) {
        double g = v[i] - a * k[i];
        if (k[i] < split) left = std::min(left, g);
        else right = std::min(right, g);
    }
    // A knot at split belongs to the right set: a hull vertex sitting exactly at
    // split with left slope < a must not count as an exceedance.
    if (!std::binary_search(k.begin(), k.end(), split))
        left = std::min(left, path(split) - a * split);
    return left <= right;
}

// Mirror for concave majorants: {right slope of lcm(path) at split >= c}.
inline bool switch_event_majorant(const CumulativePath& path, double c, double split) {
    const auto& k = path.knots();
    const auto& v = path.values();
    if (split < k.front() || split > k.back())
        throw DomainError("switch_event_majorant: split outside knot range");
    double left = -std::numeric_limits<double>::infinity();
    double right = left;
    for (std::size_t i = 0; i < k.size(); ++i) {
        double g = v[i] - c * k[i];
        if (k[i] <= split) left = std::max(left, g);
        else right = std::max(right, g);
    }
    return left <= right;
}

}  // namespace isorate
