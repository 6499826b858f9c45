#pragma once
// Small numeric/statistical utilities shared across the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfpanel {

// Kahan-Babuska compensated accumulator. Used for the global reductions that
// must be invariant to how work is chunked across threads.
struct KahanSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double x) {
        double t = sum + x;
        if (std::abs(sum) >= std::abs(x))
            comp += (sum - t) + x;
        else
            comp += (x - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

inline double compensated_sum(std::span<const double> xs) {
    KahanSum k;
    for (double x : xs) k.add(x);
    return k.value();
}

inline double mean(std::span<const double> xs) {
    if (xs.empty()) throw std::invalid_argument("mean: empty sample");
    return compensated_sum(xs) / static_cast<double>(xs.size());
}

// Sample standard deviation (n-1 denominator).
inline double stdev(std::span<const double> xs) {
    if (xs.size() < 2) throw std::invalid_argument("stdev: need at least 2 points");
    double m = mean(xs);
    KahanSum k;
    for (double x : xs) k.add((x - m) * (x - m));
    return std::sqrt(k.value() / static_cast<double>(xs.size() - 1));
}

inline double variance(std::span<const double> xs) {
    double s = stdev(xs);
    return s * s;
}

// Quantile with linear interpolation between order statistics: the estimate at
// probability p sits at fractional position (n-1)*p of the sorted sample.
// `sorted` must be ascending; validated cheaply at the ends.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile: empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("quantile: p outside [0,1]");
    if (sorted.front() > sorted.back())
        throw std::invalid_argument("quantile: sample not sorted");
    const size_t n = sorted.size();
    if (n == 1) return sorted[0];
    double h = p * static_cast<double>(n - 1);
    size_t lo = static_cast<size_t>(h);
    if (lo >= n - 1) return sorted[n - 1];
    double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double p) {
    for (double x : xs)
        if (!std::isfinite(x)) throw std::invalid_argument("quantile: non-finite value");
    std::sort(xs.begin(), xs.end());
    return quantile_sorted(xs, p);
}

// Clamp bounds for winsorization at the given percentile pair (e.g. 0.5/99.5).
struct WinsorBounds {
    double lo = 0.0;
    double hi = 0.0;
};

inline WinsorBounds winsor_bounds(std::vector<double> xs, double lo_pct, double hi_pct) {
    if (!(lo_pct < hi_pct)) throw std::invalid_argument("winsor_bounds: lo >= hi");
    for (double x : xs)
        if (!std::isfinite(x)) throw std::invalid_argument("winsor_bounds: non-finite value");
    std::sort(xs.begin(), xs.end());
    return {quantile_sorted(xs, lo_pct / 100.0), quantile_sorted(xs, hi_pct / 100.0)};
}

inline void winsorize_inplace(std::vector<double>& xs, double lo_pct = 0.5, double hi_pct = 99.5) {
    if (xs.empty()) return;
    WinsorBounds b = winsor_bounds(xs, lo_pct, hi_pct);
    for (double& x : xs) x = std::clamp(x, b.lo, b.hi);
}

// Standard normal CDF.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Survival function of a chi-square with one degree of freedom:
// P(Z^2 > s) = 2 (1 - Phi(sqrt(s))) = erfc(sqrt(s/2)).
inline double chisq1_sf(double stat) {
    if (stat < 0.0) throw std::invalid_argument("chisq1_sf: negative statistic");
    return std::erfc(std::sqrt(stat / 2.0));
}

// Deterministic scalar hash (FNV-1a, 64 bit) for file digests and run ids.
struct Fnv1a {
    static constexpr uint64_t kOffset = 14695981039346656037ull;
    static constexpr uint64_t kPrime = 1099511628211ull;
    uint64_t state = kOffset;

    void update(const void* data, size_t len) {
        const unsigned char* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            state ^= p[i];
            state *= kPrime;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    uint64_t digest() const { return state; }
};

inline std::string hex64(uint64_t v) {
    static const char* k = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = k[v & 0xf];
        v >>= 4;
    }
    return out;
}

}  // namespace hfpanel
