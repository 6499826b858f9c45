#pragma once
// Behavior proxies built as linear contrasts on fitted group coefficients.
//
// Each fitted specification carries one coefficient per response group (per
// subgroup level when the sample is split).  A proxy is a weighted sum of
// those coefficients; it is tested against zero with a one-degree-of-freedom
// Wald statistic on the cluster-robust covariance.  Contrasts that span two
// separate fits (the lag-speed proxy) treat the fits as independent, so the
// cross-fit covariance is zero by construction.

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfpanel/grouping.hpp"
#include "hfpanel/regression.hpp"
#include "hfpanel/stats.hpp"

namespace hfpanel {

// One weighted coefficient, addressed by its column label in the fit.
struct ContrastTerm {
    std::string label;
    double weight = 0.0;
};

struct ContrastResult {
    double estimate = 0.0;
    double variance = 0.0;
    double std_error = 0.0;
    double wald_stat = 0.0;
    double p_value = 1.0;
};

// Strict thresholds: a p-value exactly at a cutoff does not earn the star.
inline std::string significance_stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.10) return "*";
    return "";
}

namespace detail {

inline ContrastResult finish_contrast(double est, double var) {
    if (!std::isfinite(var) || var <= 0.0)
        throw std::runtime_error("contrast variance is not positive");
    ContrastResult r;
    r.estimate = est;
    r.variance = var;
    r.std_error = std::sqrt(var);
    r.wald_stat = est * est / var;
    r.p_value = chisq1_sf(r.wald_stat);
    return r;
}

}  // namespace detail

// w'beta with variance w'Vw, everything taken from a single fit.
inline ContrastResult contrast_within(const FitResult& fit,
                                      const std::vector<ContrastTerm>& terms) {
    std::vector<double> w(fit.beta.size(), 0.0);
    for (const ContrastTerm& t : terms) w[fit.coef_index(t.label)] += t.weight;
    double est = 0.0;
    for (size_t i = 0; i < w.size(); ++i) est += w[i] * fit.beta[i];
    double var = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        if (w[i] == 0.0) continue;
        for (size_t j = 0; j < w.size(); ++j) {
            if (w[j] == 0.0) continue;
            var += w[i] * fit.vcov.at(i, j) * w[j];
        }
    }
    return detail::finish_contrast(est, var);
}

// Difference of two contrasts from separate fits; variances add because the
// fits are treated as independent.
inline ContrastResult contrast_difference(const FitResult& fit_a,
                                          const std::vector<ContrastTerm>& terms_a,
                                          const FitResult& fit_b,
                                          const std::vector<ContrastTerm>& terms_b) {
    ContrastResult a = contrast_within(fit_a, terms_a);
    ContrastResult b = contrast_within(fit_b, terms_b);
    return detail::finish_contrast(a.estimate - b.estimate, a.variance + b.variance);
}

// ---- proxy definitions ----

enum class Behavior { extremeness, asymmetry, speed_extreme_negative };

inline const char* behavior_name(Behavior b) {
    switch (b) {
        case Behavior::extremeness: return "extremeness";
        case Behavior::asymmetry: return "asymmetry";
        case Behavior::speed_extreme_negative: return "speed_extreme_neg";
    }
    throw std::logic_error("behavior_name: bad value");
}

inline Behavior behavior_from_name(const std::string& s) {
    if (s == "extremeness") return Behavior::extremeness;
    if (s == "asymmetry") return Behavior::asymmetry;
    if (s == "speed_extreme_neg") return Behavior::speed_extreme_negative;
    throw std::invalid_argument("unknown behavior: " + s);
}

inline std::string group_coef_label(int group, const std::string& level = "") {
    std::string base = group_label(group);
    return level.empty() ? base : base + ":" + level;
}

// Point-estimate arithmetic, usable without a fit (e.g. on reported numbers).
inline double extremeness_point(double b_g1, double b_g3, double b_g4, double b_g6) {
    return 0.5 * (b_g1 + b_g6) - 0.5 * (b_g3 + b_g4);
}

inline double asymmetry_point(double b_g1, double b_g6) { return b_g1 - b_g6; }

// Coefficient weights for one proxy at one subgroup level.  For the speed
// proxy these are the weights applied at *each* of the two lags; the lag
// difference itself is taken by evaluate_behavior below.
inline std::vector<ContrastTerm> behavior_terms(Behavior b, const std::string& level = "") {
    switch (b) {
        case Behavior::extremeness:
            return {{group_coef_label(0, level), 0.5},
                    {group_coef_label(5, level), 0.5},
                    {group_coef_label(2, level), -0.5},
                    {group_coef_label(3, level), -0.5}};
        case Behavior::asymmetry:
            return {{group_coef_label(0, level), 1.0}, {group_coef_label(5, level), -1.0}};
        case Behavior::speed_extreme_negative:
            return {{group_coef_label(0, level), 1.0}};
    }
    throw std::logic_error("behavior_terms: bad value");
}

inline std::vector<ContrastTerm> scale_terms(std::vector<ContrastTerm> terms, double s) {
    for (ContrastTerm& t : terms) t.weight *= s;
    return terms;
}

inline std::vector<ContrastTerm> concat_terms(std::vector<ContrastTerm> a,
                                              const std::vector<ContrastTerm>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// Lags entering the speed proxy: immediate response minus the most delayed one.
constexpr int kSpeedFastLag = 1;
constexpr int kSpeedSlowLag = kMaxLag;

// Evaluate a term set for one behavior against a full lag suite (index = lag).
// Extremeness and asymmetry read a single fit; the speed proxy differences the
// same weights between the fast and slow lag fits.
inline ContrastResult evaluate_behavior(const std::vector<FitResult>& suite, Behavior b,
                                        const std::vector<ContrastTerm>& terms, int lag) {
    if (b == Behavior::speed_extreme_negative)
        return contrast_difference(suite.at(kSpeedFastLag), terms, suite.at(kSpeedSlowLag), terms);
    return contrast_within(suite.at(static_cast<size_t>(lag)), terms);
}

// Proxy at one level.  `level` must be empty when the fit has a single level
// (its coefficient labels carry no level suffix).
inline ContrastResult behavior_contrast(const std::vector<FitResult>& suite, Behavior b,
                                        const std::string& level = "", int lag = 1) {
    return evaluate_behavior(suite, b, behavior_terms(b, level), lag);
}

// Difference of one proxy between two levels of the same split sample.  Both
// levels live in the same regression, so the full covariance is available.
inline ContrastResult compare_levels(const std::vector<FitResult>& suite, Behavior b,
                                     const std::string& level_a, const std::string& level_b,
                                     int lag = 1) {
    std::vector<ContrastTerm> terms =
        concat_terms(behavior_terms(b, level_a), scale_terms(behavior_terms(b, level_b), -1.0));
    return evaluate_behavior(suite, b, terms, lag);
}

// One level against the unweighted average of all the others (used for the
// sector split: weight 1 on the named level, -1/(m-1) on each of the rest).
inline ContrastResult level_vs_rest(const std::vector<FitResult>& suite, Behavior b,
                                    const std::vector<std::string>& levels, size_t idx,
                                    int lag = 1) {
    if (levels.size() < 2) throw std::invalid_argument("level_vs_rest needs at least two levels");
    if (idx >= levels.size()) throw std::invalid_argument("level_vs_rest: bad level index");
    std::vector<ContrastTerm> terms = behavior_terms(b, levels[idx]);
    const double w = -1.0 / static_cast<double>(levels.size() - 1);
    for (size_t m = 0; m < levels.size(); ++m) {
        if (m == idx) continue;
        terms = concat_terms(std::move(terms), scale_terms(behavior_terms(b, levels[m]), w));
    }
    return evaluate_behavior(suite, b, terms, lag);
}

// ---- report assembly ----

struct BehaviorRow {
    std::string behavior;
    std::string level;   // subgroup level, or "all" for an unsplit sample
    int lag = 1;         // reading lag (fast lag for the speed proxy)
    ContrastResult value;
};

// All three proxies at every level of a fitted suite, at reading lag 1.
inline std::vector<BehaviorRow> behavior_table(const std::vector<FitResult>& suite) {
    const FitResult& base = suite.at(0);
    const bool split = base.levels.size() > 1;
    std::vector<BehaviorRow> rows;
    for (Behavior b : {Behavior::extremeness, Behavior::asymmetry,
                       Behavior::speed_extreme_negative}) {
        for (size_t c = 0; c < base.levels.size(); ++c) {
            BehaviorRow row;
            row.behavior = behavior_name(b);
            row.level = base.levels[c];
            row.lag = b == Behavior::speed_extreme_negative ? kSpeedFastLag : 1;
            row.value = behavior_contrast(suite, b, split ? base.levels[c] : "", row.lag);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

// Pairwise level differences (two levels) or each-vs-rest (three or more).
inline std::vector<BehaviorRow> behavior_comparisons(const std::vector<FitResult>& suite) {
    const FitResult& base = suite.at(0);
    const std::vector<std::string>& levels = base.levels;
    std::vector<BehaviorRow> rows;
    if (levels.size() < 2) return rows;
    for (Behavior b : {Behavior::extremeness, Behavior::asymmetry,
                       Behavior::speed_extreme_negative}) {
        const int lag = b == Behavior::speed_extreme_negative ? kSpeedFastLag : 1;
        if (levels.size() == 2) {
            BehaviorRow row;
            row.behavior = behavior_name(b);
            row.level = levels[0] + "-" + levels[1];
            row.lag = lag;
            row.value = compare_levels(suite, b, levels[0], levels[1], lag);
            rows.push_back(std::move(row));
        } else {
            for (size_t c = 0; c < levels.size(); ++c) {
                BehaviorRow row;
                row.behavior = behavior_name(b);
                row.level = levels[c] + "-rest";
                row.lag = lag;
                row.value = level_vs_rest(suite, b, levels, c, lag);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

}  // namespace hfpanel
