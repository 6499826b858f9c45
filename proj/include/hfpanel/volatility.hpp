#pragma once
// Volatility estimators used to standardize holdings-period returns:
//  - intraday: subsampled 5-minute realized variance over the trading session,
//    averaged over five 1-minute-offset grids, scaled to a full day;
//  - overnight / daily: GJR-GARCH(1,1) fitted per stock by Gaussian MLE on the
//    demeaned return series, with a plain-GARCH fallback on non-convergence.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "optim.hpp"
#include "stats.hpp"
#include "time.hpp"

namespace hfpanel {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr size_t kMinVolObs = 240;  // minimum series length for a GJR/GARCH fit

enum class VolSeriesKind : int8_t { overnight = 0, daily = 1 };

// Full-day scale factor for a sigma of the given series kind: an overnight
// half-period is scaled up by sqrt(2); a daily series already spans a day.
inline double full_day_scale(VolSeriesKind kind) {
    return kind == VolSeriesKind::overnight ? kSqrt2 : 1.0;
}

// ---- realized variance ----

struct LocalTick {
    int64_t tod = 0;  // microseconds since local (NY) midnight
    double price = 0.0;
};

struct RvSettings {
    int64_t grid_spacing = 5 * kMicrosPerMin;
    int64_t offset_step = 1 * kMicrosPerMin;
    int n_offsets = 5;
};

// Realized volatility of one session from in-session ticks (sorted by time),
// returned on the full-day scale: sqrt(mean grid RV) * sqrt(2).
// Grid points take the last tick at-or-before them; offsets with fewer than
// two reachable grid points contribute nothing; no usable offset -> nullopt.
inline std::optional<double> realized_vol_session(std::span<const LocalTick> ticks,
                                                  int64_t open_tod, int64_t close_tod,
                                                  const RvSettings& rv = {}) {
    if (ticks.size() < 2) return std::nullopt;  // one trade carries no return
    double rv_sum = 0.0;
    int usable = 0;
    for (int o = 0; o < rv.n_offsets; ++o) {
        int64_t t = open_tod + o * rv.offset_step;
        size_t pos = 0;
        double prev_log = 0.0;
        int pts = 0;
        double acc = 0.0;
        for (; t <= close_tod; t += rv.grid_spacing) {
            while (pos < ticks.size() && ticks[pos].tod <= t) ++pos;
            if (pos == 0) continue;  // no tick yet at this grid point
            double lp = std::log(ticks[pos - 1].price);
            if (pts > 0) {
                double d = lp - prev_log;
                acc += d * d;
            }
            prev_log = lp;
            ++pts;
        }
        if (pts >= 2) {
            rv_sum += acc;
            ++usable;
        }
    }
    if (usable == 0) return std::nullopt;
    return std::sqrt(rv_sum / usable) * kSqrt2;
}

// ---- GJR-GARCH(1,1) ----

// sigma^2_t = omega + (alpha + gamma * 1[eps_{t-1} < 0]) * eps^2_{t-1} + beta * sigma^2_{t-1}
struct GjrParams {
    double omega = 0.0;
    double alpha = 0.0;
    double gamma = 0.0;
    double beta = 0.0;
    double mean = 0.0;  // demeaning constant (sample mean of the fitted series)

    double persistence() const { return alpha + beta + 0.5 * gamma; }
    double uncond_var() const { return omega / (1.0 - persistence()); }
};

// Conditional variance recursion; sigma0_sq seeds sigma^2_1. Returns one
// variance per observation. `mean` is subtracted from the returns.
inline std::vector<double> gjr_variance_recursion(const GjrParams& p,
                                                  std::span<const double> returns,
                                                  double sigma0_sq) {
    std::vector<double> var(returns.size());
    double v = sigma0_sq;
    for (size_t t = 0; t < returns.size(); ++t) {
        if (t > 0) {
            double eps = returns[t - 1] - p.mean;
            double arch = p.alpha + (eps < 0.0 ? p.gamma : 0.0);
            v = p.omega + arch * eps * eps + p.beta * v;
        }
        var[t] = v;
    }
    return var;
}

namespace detail {

constexpr double kHugePenalty = 1e12;

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double u) { return std::log(u / (1.0 - u)); }

// Mean negative log-likelihood of the demeaned series under Gaussian GJR.
inline double gjr_mean_nll(const GjrParams& p, std::span<const double> returns) {
    if (!(p.omega > 0.0) || p.alpha < 0.0 || p.beta < 0.0 || p.alpha + p.gamma < 0.0 ||
        p.persistence() >= 1.0)
        return kHugePenalty;
    constexpr double kLog2Pi = 1.8378770664093453;
    double v = p.uncond_var();
    double acc = 0.0;
    for (size_t t = 0; t < returns.size(); ++t) {
        if (t > 0) {
            double eps_prev = returns[t - 1] - p.mean;
            double arch = p.alpha + (eps_prev < 0.0 ? p.gamma : 0.0);
            v = p.omega + arch * eps_prev * eps_prev + p.beta * v;
        }
        if (!(v > 0.0) || !std::isfinite(v)) return kHugePenalty;
        double eps = returns[t] - p.mean;
        acc += 0.5 * (kLog2Pi + std::log(v) + eps * eps / v);
    }
    double out = acc / static_cast<double>(returns.size());
    return std::isfinite(out) ? out : kHugePenalty;
}

// Unconstrained parameterization. theta = (a, b, c[, d]):
//   omega = exp(a); persistence u = logistic(b) in (0,1); beta = u * logistic(c);
//   the remainder u - beta splits into gamma/2 (share logistic(d)) and alpha.
// With gamma constrained to zero, theta has three entries and alpha = u - beta.
inline GjrParams theta_to_params(const std::vector<double>& th, double mean, bool fix_gamma) {
    GjrParams p;
    p.mean = mean;
    p.omega = std::exp(th[0]);
    double u = logistic(th[1]);
    double beta_share = logistic(th[2]);
    p.beta = u * beta_share;
    double rest = u - p.beta;
    if (fix_gamma) {
        p.alpha = rest;
        p.gamma = 0.0;
    } else {
        double gshare = logistic(th[3]);
        p.gamma = 2.0 * rest * gshare;
        p.alpha = rest * (1.0 - gshare);
    }
    return p;
}

}  // namespace detail

struct GjrFit {
    GjrParams params;
    double loglik = 0.0;     // total Gaussian log-likelihood at the optimum
    bool converged = false;
    std::string model;       // "gjr" or "garch" (fallback / constrained)
    int iterations = 0;
};

// Gaussian MLE of GJR-GARCH(1,1) on `returns` (demeaned internally; recursion
// seeded at the parameter-implied unconditional variance). Optimization runs
// in the unconstrained transform with a quasi-Newton ascent; convergence when
// the gradient infinity-norm of the mean NLL drops below 1e-6 (500 iters max).
// On non-convergence the gamma=0 fallback is attempted; `converged` reports
// the final outcome. Series shorter than `min_obs` is an error.
inline GjrFit fit_gjr_garch(std::span<const double> returns, bool constrain_gamma = false,
                            size_t min_obs = kMinVolObs) {
    if (returns.size() < min_obs)
        throw std::invalid_argument("fit_gjr_garch: series shorter than " +
                                    std::to_string(min_obs) + " observations");
    for (double r : returns)
        if (!std::isfinite(r)) throw std::invalid_argument("fit_gjr_garch: non-finite return");

    const double mu = mean(returns);
    double s2 = 0.0;
    for (double r : returns) s2 += (r - mu) * (r - mu);
    s2 /= static_cast<double>(returns.size());
    if (!(s2 > 0.0))
        throw std::invalid_argument("fit_gjr_garch: zero-variance series");

    auto run = [&](bool fix_gamma) {
        // Start at (alpha, gamma, beta) = (0.05, 0.05, 0.85), omega matching the
        // sample variance at that persistence.
        double u0 = fix_gamma ? 0.90 : 0.925;
        double beta0 = 0.85;
        std::vector<double> th;
        th.push_back(std::log(s2 * (1.0 - u0)));
        th.push_back(detail::logit(u0));
        th.push_back(detail::logit(beta0 / u0));
        if (!fix_gamma) th.push_back(detail::logit(0.025 / (u0 - beta0)));
        Objective obj = [&, fix_gamma](const std::vector<double>& t) {
            return detail::gjr_mean_nll(detail::theta_to_params(t, mu, fix_gamma), returns);
        };
        OptimResult res = bfgs_minimize(obj, th, 500, 1e-6);
        GjrFit fit;
        fit.params = detail::theta_to_params(res.x, mu, fix_gamma);
        fit.loglik = -res.f * static_cast<double>(returns.size());
        fit.converged = res.converged;
        fit.model = fix_gamma ? "garch" : "gjr";
        fit.iterations = res.iterations;
        return fit;
    };

    GjrFit fit = run(constrain_gamma);
    if (!fit.converged && !constrain_gamma) {
        GjrFit fallback = run(true);
        if (fallback.converged) return fallback;
        // Keep the better of the two non-converged attempts for diagnostics.
        return fallback.loglik > fit.loglik ? fallback : fit;
    }
    return fit;
}

inline double gjr_loglik(const GjrParams& p, std::span<const double> returns) {
    return -detail::gjr_mean_nll(p, returns) * static_cast<double>(returns.size());
}

// Per-observation sigma series on the full-day scale, aligned to each return's
// own position (in-sample filtered values).
inline std::vector<double> gjr_sigma_series(const GjrParams& p, std::span<const double> returns,
                                            VolSeriesKind kind) {
    std::vector<double> var = gjr_variance_recursion(p, returns, p.uncond_var());
    double scale = full_day_scale(kind);
    std::vector<double> sig(var.size());
    for (size_t i = 0; i < var.size(); ++i) sig[i] = std::sqrt(var[i]) * scale;
    return sig;
}

// Asymptotic standard errors of (omega, alpha, gamma, beta) from the inverse
// numerical Hessian of the total negative log-likelihood at the optimum.
inline std::vector<double> gjr_param_stderrs(const GjrParams& p, std::span<const double> returns);

// ---- standardization ----

inline double standardize_return(double raw_return, double sigma) {
    if (!std::isfinite(sigma) || sigma <= 0.0)
        throw std::domain_error("standardize_return: sigma not positive");
    return raw_return / sigma;
}

}  // namespace hfpanel

#include "linalg.hpp"

namespace hfpanel {

inline std::vector<double> gjr_param_stderrs(const GjrParams& p, std::span<const double> returns) {
    const double n = static_cast<double>(returns.size());
    auto nll = [&](const std::vector<double>& v) {
        GjrParams q = p;
        q.omega = v[0];
        q.alpha = v[1];
        q.gamma = v[2];
        q.beta = v[3];
        return detail::gjr_mean_nll(q, returns) * n;
    };
    std::vector<double> x = {p.omega, p.alpha, p.gamma, p.beta};
    Mat H(4, 4);
    double f0 = nll(x);
    std::vector<double> h(4);
    for (size_t i = 0; i < 4; ++i) h[i] = 1e-4 * std::max(0.01, std::abs(x[i]));
    for (size_t i = 0; i < 4; ++i) {
        for (size_t j = i; j < 4; ++j) {
            std::vector<double> v = x;
            if (i == j) {
                v[i] = x[i] + h[i];
                double fp = nll(v);
                v[i] = x[i] - h[i];
                double fm = nll(v);
                H.at(i, i) = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            } else {
                v[i] = x[i] + h[i];
                v[j] = x[j] + h[j];
                double fpp = nll(v);
                v[j] = x[j] - h[j];
                double fpm = nll(v);
                v[i] = x[i] - h[i];
                v[j] = x[j] + h[j];
                double fmp = nll(v);
                v[j] = x[j] - h[j];
                double fmm = nll(v);
                double val = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j]);
                H.at(i, j) = val;
                H.at(j, i) = val;
            }
        }
    }
    Mat cov = gauss_inverse(H);
    std::vector<double> se(4);
    for (size_t i = 0; i < 4; ++i)
        se[i] = cov.at(i, i) > 0.0 ? std::sqrt(cov.at(i, i)) :
                                     std::numeric_limits<double>::quiet_NaN();
    return se;
}

}  // namespace hfpanel
