#pragma once

// Direct re-implementations used as test oracles. Deliberately naive: no
// sorting helpers from the library, O(n^2) where that is the plain reading.

#include <cmath>
#include <utility>
#include <vector>

#include "fuelrec/far.hpp"

namespace fuelrec::oracle {

// k-th smallest (0-based) by counting.
inline double kth(const std::vector<double>& v, std::size_t k) {
    for (double x : v) {
        std::size_t less = 0, equal = 0;
        for (double y : v) {
            less += y < x;
            equal += y == x;
        }
        if (less <= k && k < less + equal) return x;
    }
    return NAN;
}

inline double quartile(const std::vector<double>& v, double p) {
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const double a = kth(v, lo);
    const double b = lo + 1 < v.size() ? kth(v, lo + 1) : a;
    return a + (h - static_cast<double>(lo)) * (b - a);
}

struct Fence {
    double lo, hi;
};

inline Fence fence(const std::vector<double>& v) {
    const double q1 = quartile(v, 0.25), q3 = quartile(v, 0.75);
    return {q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)};
}

// Two-pass labels for one key.
inline std::pair<std::vector<Label>, Fence> two_pass(const std::vector<double>& v, std::size_t min_points) {
    std::vector<Label> out(v.size(), Label::inlier);
    if (v.size() < min_points) return {out, fence(v)};
    const Fence f1 = fence(v);
    std::vector<double> kept;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] > f1.hi || v[i] < f1.lo) out[i] = Label::removed_data_quality;
        else kept.push_back(v[i]);
    }
    const Fence f2 = fence(kept);
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (out[i] == Label::removed_data_quality) continue;
        if (v[i] > f2.hi) out[i] = Label::outlier_high;
        else if (v[i] < f2.lo) out[i] = Label::outlier_low;
    }
    return {out, f2};
}

// Plain reading: dedupe, sort by (value, relevance), drop every entry whose
// relevance is below the previous entry, repeat until stable.
inline std::vector<std::pair<double, double>> monotone(std::vector<std::pair<double, double>> p, bool decreasing) {
    if (decreasing)
        for (auto& x : p) x.second = -x.second;
    std::vector<std::pair<double, double>> u;
    for (const auto& x : p) {
        bool seen = false;
        for (const auto& y : u) seen = seen || (y == x);
        if (!seen) u.push_back(x);
    }
    // insertion sort
    for (std::size_t i = 1; i < u.size(); ++i)
        for (std::size_t j = i; j > 0 && u[j] < u[j - 1]; --j) std::swap(u[j], u[j - 1]);
    for (;;) {
        std::vector<std::pair<double, double>> next;
        for (std::size_t i = 0; i < u.size(); ++i)
            if (i == 0 || u[i].second - u[i - 1].second >= 0) next.push_back(u[i]);
        if (next.size() == u.size()) break;
        u = std::move(next);
    }
    if (decreasing)
        for (auto& x : u) x.second = -x.second;
    return u;
}

}  // namespace fuelrec::oracle
