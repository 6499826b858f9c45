#pragma once
// Six-way partition of standardized returns by pooled percentile cutoffs:
//   G1: r < q5          G2: q5  <= r < q25   G3: q25 <= r < 0
//   G4: 0  <= r < q75   G5: q75 <= r < q95   G6: r >= q95

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "stats.hpp"

namespace hfpanel {

struct GroupCutoffs {
    double q5 = 0.0;
    double q25 = 0.0;
    double q75 = 0.0;
    double q95 = 0.0;
};

constexpr int kNumGroups = 6;

inline const char* group_label(int g) {
    static const char* k[] = {"G1", "G2", "G3", "G4", "G5", "G6"};
    if (g < 0 || g >= kNumGroups) throw std::invalid_argument("group_label: bad group");
    return k[g];
}

// Pooled cutoffs with linear-interpolation quantiles over the complete
// standardized-return sample (both observation kinds together).
inline GroupCutoffs compute_cutoffs(std::vector<double> std_returns) {
    if (std_returns.empty()) throw std::invalid_argument("compute_cutoffs: empty sample");
    for (double r : std_returns)
        if (!std::isfinite(r)) throw std::invalid_argument("compute_cutoffs: non-finite return");
    std::sort(std_returns.begin(), std_returns.end());
    GroupCutoffs c;
    c.q5 = quantile_sorted(std_returns, 0.05);
    c.q25 = quantile_sorted(std_returns, 0.25);
    c.q75 = quantile_sorted(std_returns, 0.75);
    c.q95 = quantile_sorted(std_returns, 0.95);
    return c;
}

// Group index in 0..5. Total over all finite inputs; non-finite is an error.
inline int assign_group(double r, const GroupCutoffs& c) {
    if (!std::isfinite(r)) throw std::domain_error("assign_group: non-finite return");
    if (r < c.q5) return 0;
    if (r < c.q25) return 1;
    if (r < 0.0) return 2;
    if (r < c.q75) return 3;
    if (r < c.q95) return 4;
    return 5;
}

}  // namespace hfpanel
