#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gb/error.hpp"

namespace gb {

inline constexpr double neg_inf = -std::numeric_limits<double>::infinity();
inline constexpr double pos_inf = std::numeric_limits<double>::infinity();

// log(sum(exp(x))), -inf-safe. Returns -inf for an empty span or all -inf.
inline double log_sum_exp(std::span<const double> x) {
    double m = neg_inf;
    for (double v : x) m = std::max(m, v);
    if (!std::isfinite(m)) return m;  // all -inf (or contains +inf, surfaced as-is)
    double s = 0.0;
    for (double v : x) s += std::exp(v - m);
    return m + std::log(s);
}

inline double log_add_exp(double a, double b) {
    if (a == neg_inf) return b;
    if (b == neg_inf) return a;
    const double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Running log-sum-exp accumulator with rescaling; fixed insertion order.
struct LogSumAcc {
    double max = neg_inf;
    double sum = 0.0;  // sum of exp(x - max)

    void add(double x) {
        if (x == neg_inf) return;
        if (x > max) {
            sum = (max == neg_inf) ? 1.0 : sum * std::exp(max - x) + 1.0;
            max = x;
        } else {
            sum += std::exp(x - max);
        }
    }
    double value() const { return (max == neg_inf) ? neg_inf : max + std::log(sum); }
};

// SplitMix64 step; used to derive disjoint RNG streams from a base seed.
inline std::uint64_t split_mix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t s = base ^ (0x6a09e667f3bcc909ULL + stream * 0x9e3779b97f4a7c15ULL);
    return split_mix64(s);
}

inline double mean(std::span<const double> x) {
    if (x.empty()) throw Error("mean: empty sample");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

// Unbiased sample variance (n-1 denominator).
inline double variance(std::span<const double> x) {
    if (x.size() < 2) throw Error("variance: need at least 2 values");
    const double m = mean(x);
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

inline double stddev(std::span<const double> x) { return std::sqrt(variance(x)); }

// Quantile with linear interpolation between order statistics (type-7):
// q(p) = x_((n-1)p) on the sorted sample, fractional index interpolated.
inline double quantile_type7(std::vector<double> sorted_or_not, double p, bool presorted = false) {
    if (sorted_or_not.empty()) throw Error("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw Error("quantile: level out of [0,1]");
    auto& v = sorted_or_not;
    if (!presorted) std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= v.size()) return v.back();
    const double frac = h - static_cast<double>(lo);
    return v[lo] + frac * (v[lo + 1] - v[lo]);
}

inline double sqr(double x) { return x * x; }

inline double pos_part(double x) { return x > 0.0 ? x : 0.0; }

}  // namespace gb
