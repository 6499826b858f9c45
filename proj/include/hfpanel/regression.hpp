#pragma once
// Pooled no-intercept OLS of holder-count changes on lagged return-group
// indicators (optionally interacted with a subgroup partition) plus own- and
// market-return controls, with cluster-robust (by stock) standard errors.
//
// Design for lag L over eligible rows k (all six lags 0..5 present):
//   6*C indicator columns  1[group(r_{k-L}) = g] * 1[level(k-L) = c]
//   own r_{k-j}, r^2_{k-j} for j != L          (10 columns)
//   market r_{k-j}, r^2_{k-j} for j = 0..5     (12 columns)

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "grouping.hpp"
#include "linalg.hpp"
#include "parallel.hpp"
#include "stats.hpp"
#include "types.hpp"

namespace hfpanel {

constexpr int kMaxLag = 5;

// Flattened per-observation view shared by the high-frequency and daily paths.
struct RegRow {
    int32_t stock = 0;
    ObsKind kind = ObsKind::intraday;
    int32_t day = 0;
    int8_t group = -1;
    double y = 0.0;    // dependent (delta_n or a variant)
    double r = 0.0;    // standardized own return
    double mkt = 0.0;  // standardized market return, same timestamp pair
    double cap = 0.0;  // market capitalization on `day`
};

struct RegSample {
    std::vector<RegRow> rows;          // grouped by stock, chronological
    std::vector<size_t> stock_first;   // size n_stocks+1 (sentinel end)
    std::vector<int32_t> stock_sector;
    std::vector<std::string> stock_ticker;
    std::vector<std::string> sectors;

    size_t n_stocks() const { return stock_ticker.size(); }
};

enum class SubgroupScheme { none, kind, covid, size, sector };

inline const char* subgroup_name(SubgroupScheme s) {
    switch (s) {
        case SubgroupScheme::none: return "none";
        case SubgroupScheme::kind: return "kind";
        case SubgroupScheme::covid: return "covid";
        case SubgroupScheme::size: return "size";
        case SubgroupScheme::sector: return "sector";
    }
    return "?";
}

inline SubgroupScheme subgroup_from_name(const std::string& name) {
    if (name == "none") return SubgroupScheme::none;
    if (name == "kind") return SubgroupScheme::kind;
    if (name == "covid") return SubgroupScheme::covid;
    if (name == "size") return SubgroupScheme::size;
    if (name == "sector") return SubgroupScheme::sector;
    throw std::invalid_argument("unknown subgroup scheme: " + name);
}

// Partition of observations by an attribute of the lagged return.
struct SubgroupSpec {
    SubgroupScheme scheme = SubgroupScheme::none;
    std::vector<std::string> levels = {"all"};
    int32_t covid_boundary = 0;   // civil day; pre = day < boundary
    double small_cap = 2e9;
    double large_cap = 1e10;

    size_t n_levels() const { return levels.size(); }

    // Level of the lagged observation; -1 excludes the row from this fit.
    int level_of(const RegRow& lagged, int32_t sector_of_stock) const {
        switch (scheme) {
            case SubgroupScheme::none:
                return 0;
            case SubgroupScheme::kind:
                return lagged.kind == ObsKind::overnight ? 0 : 1;
            case SubgroupScheme::covid:
                return lagged.day < covid_boundary ? 0 : 1;
            case SubgroupScheme::size:
                if (!(lagged.cap > 0.0)) return -1;
                if (lagged.cap < small_cap) return 0;
                if (lagged.cap <= large_cap) return 1;
                return 2;
            case SubgroupScheme::sector:
                return sector_of_stock;
        }
        return -1;
    }
};

inline SubgroupSpec make_subgroup(SubgroupScheme scheme, const RegSample& sample,
                                  int32_t covid_boundary_day = days_from_civil(2020, 3, 11),
                                  double small_cap = 2e9, double large_cap = 1e10) {
    SubgroupSpec s;
    s.scheme = scheme;
    s.covid_boundary = covid_boundary_day;
    s.small_cap = small_cap;
    s.large_cap = large_cap;
    switch (scheme) {
        case SubgroupScheme::none: s.levels = {"all"}; break;
        case SubgroupScheme::kind: s.levels = {"overnight", "intraday"}; break;
        case SubgroupScheme::covid: s.levels = {"pre", "post"}; break;
        case SubgroupScheme::size: s.levels = {"small", "mid", "large"}; break;
        case SubgroupScheme::sector:
            if (sample.sectors.empty())
                throw std::invalid_argument("sector subgroup: sample has no sector labels");
            s.levels = sample.sectors;
            break;
    }
    return s;
}

struct OlsOptions {
    bool cluster_small_sample = true;  // G/(G-1) * (N-1)/(N-K) on the sandwich
    int workers = 0;
};

struct FitResult {
    int lag = 0;
    std::string subgroup;                // scheme name
    std::vector<std::string> levels;     // level labels (C of them)
    std::vector<std::string> labels;     // column labels (K of them)
    std::vector<double> beta;            // natural (daily log) units
    Mat vcov;
    double adj_r2 = 0.0;
    double rss = 0.0;
    double tss = 0.0;
    size_t n_obs = 0;
    size_t n_clusters = 0;

    size_t coef_index(const std::string& label) const {
        for (size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == label) return i;
        throw std::invalid_argument("fit has no coefficient labelled '" + label + "'");
    }
    double se(size_t i) const { return std::sqrt(vcov.at(i, i)); }
};

namespace detail {

struct DesignLayout {
    int lag = 0;
    size_t n_levels = 1;
    size_t n_cols = 0;
    std::vector<std::string> labels;

    static DesignLayout make(int lag, const SubgroupSpec& sub) {
        if (lag < 0 || lag > kMaxLag) throw std::invalid_argument("lag must be in 0..5");
        DesignLayout d;
        d.lag = lag;
        d.n_levels = sub.n_levels();
        d.n_cols = 6 * d.n_levels + 2 * kMaxLag + 2 * (kMaxLag + 1);
        for (size_t c = 0; c < d.n_levels; ++c)
            for (int g = 0; g < kNumGroups; ++g)
                d.labels.push_back(d.n_levels == 1
                                       ? std::string(group_label(g))
                                       : std::string(group_label(g)) + ":" + sub.levels[c]);
        for (int j = 0; j <= kMaxLag; ++j) {
            if (j == lag) continue;
            d.labels.push_back("r_lag" + std::to_string(j));
            d.labels.push_back("r2_lag" + std::to_string(j));
        }
        for (int j = 0; j <= kMaxLag; ++j) {
            d.labels.push_back("mkt_r_lag" + std::to_string(j));
            d.labels.push_back("mkt_r2_lag" + std::to_string(j));
        }
        return d;
    }
};

// A row is usable when its whole lag window exists within the stock and every
// needed value is finite; identical across the six lag specifications.
inline bool window_ok(std::span<const RegRow> stock_rows, size_t k) {
    if (k < static_cast<size_t>(kMaxLag)) return false;
    if (!std::isfinite(stock_rows[k].y)) return false;
    for (int j = 0; j <= kMaxLag; ++j) {
        const RegRow& rr = stock_rows[k - static_cast<size_t>(j)];
        if (!std::isfinite(rr.r) || !std::isfinite(rr.mkt)) return false;
        if (rr.group < 0 || rr.group >= kNumGroups) return false;
    }
    return true;
}

// Fills the design vector for row k of one stock; returns false when the row
// is excluded (missing window or undefined subgroup level at the lag).
inline bool design_row(std::span<const RegRow> stock_rows, size_t k, const DesignLayout& lay,
                       const SubgroupSpec& sub, int32_t sector, std::span<double> x,
                       double& y) {
    if (!window_ok(stock_rows, k)) return false;
    const RegRow& lagged = stock_rows[k - static_cast<size_t>(lay.lag)];
    int level = sub.level_of(lagged, sector);
    if (level < 0) return false;
    std::fill(x.begin(), x.end(), 0.0);
    x[static_cast<size_t>(level) * 6 + static_cast<size_t>(lagged.group)] = 1.0;
    size_t c = 6 * lay.n_levels;
    for (int j = 0; j <= kMaxLag; ++j) {
        if (j == lay.lag) continue;
        double r = stock_rows[k - static_cast<size_t>(j)].r;
        x[c++] = r;
        x[c++] = r * r;
    }
    for (int j = 0; j <= kMaxLag; ++j) {
        double m = stock_rows[k - static_cast<size_t>(j)].mkt;
        x[c++] = m;
        x[c++] = m * m;
    }
    y = stock_rows[k].y;
    return true;
}

struct StockAccum {
    std::vector<double> xtx;  // upper triangle, row-major packed
    std::vector<double> xty;
    double sum_y = 0.0;
    double sum_y2 = 0.0;
    uint64_t count = 0;
};

inline size_t packed_size(size_t k) { return k * (k + 1) / 2; }

}  // namespace detail

// One pooled fit. Rows stream through fixed-size accumulators; per-stock
// partial sums merge in ticker order with compensated addition, so results do
// not depend on the worker count.
inline FitResult pooled_ols(const RegSample& sample, int lag, const SubgroupSpec& sub,
                            const OlsOptions& opt = {}) {
    const detail::DesignLayout lay = detail::DesignLayout::make(lag, sub);
    const size_t K = lay.n_cols;
    const size_t S = sample.n_stocks();

    // Pass 1: cross-products.
    std::vector<detail::StockAccum> acc(S);
    parallel_for(S, opt.workers, [&](size_t s) {
        std::span<const RegRow> rows(sample.rows.data() + sample.stock_first[s],
                                     sample.stock_first[s + 1] - sample.stock_first[s]);
        detail::StockAccum a;
        a.xtx.assign(detail::packed_size(K), 0.0);
        a.xty.assign(K, 0.0);
        std::vector<double> x(K);
        double y = 0.0;
        for (size_t k = 0; k < rows.size(); ++k) {
            if (!detail::design_row(rows, k, lay, sub, sample.stock_sector[s], x, y)) continue;
            size_t p = 0;
            for (size_t i = 0; i < K; ++i) {
                double xi = x[i];
                a.xty[i] += xi * y;
                if (xi == 0.0) {
                    p += K - i;
                    continue;
                }
                for (size_t j = i; j < K; ++j) a.xtx[p + (j - i)] += xi * x[j];
                p += K - i;
            }
            a.sum_y += y;
            a.sum_y2 += y * y;
            ++a.count;
        }
        acc[s] = std::move(a);
    });

    std::vector<KahanSum> xtx_sum(detail::packed_size(K)), xty_sum(K);
    KahanSum y_sum, y2_sum;
    uint64_t n_obs = 0;
    size_t n_clusters = 0;
    for (const detail::StockAccum& a : acc) {
        if (a.count == 0) continue;
        ++n_clusters;
        n_obs += a.count;
        for (size_t p = 0; p < a.xtx.size(); ++p) xtx_sum[p].add(a.xtx[p]);
        for (size_t i = 0; i < K; ++i) xty_sum[i].add(a.xty[i]);
        y_sum.add(a.sum_y);
        y2_sum.add(a.sum_y2);
    }
    if (n_obs == 0) throw std::runtime_error("pooled_ols: no eligible observations");
    if (n_obs <= K) throw std::runtime_error("pooled_ols: fewer observations than parameters");
    if (n_clusters < 2) throw std::runtime_error("pooled_ols: need at least two clusters");

    Mat xtx(K, K);
    std::vector<double> xty(K);
    {
        size_t p = 0;
        for (size_t i = 0; i < K; ++i)
            for (size_t j = i; j < K; ++j) {
                double v = xtx_sum[p++].value();
                xtx.at(i, j) = v;
                xtx.at(j, i) = v;
            }
        for (size_t i = 0; i < K; ++i) xty[i] = xty_sum[i].value();
    }

    Mat L = cholesky(xtx, &lay.labels);
    std::vector<double> beta = cholesky_solve(L, xty);
    Mat bread = cholesky_inverse(L);

    // Pass 2: per-cluster score sums and residual sum of squares.
    std::vector<std::vector<double>> scores(S);
    std::vector<double> rss_part(S, 0.0);
    parallel_for(S, opt.workers, [&](size_t s) {
        if (acc[s].count == 0) return;
        std::span<const RegRow> rows(sample.rows.data() + sample.stock_first[s],
                                     sample.stock_first[s + 1] - sample.stock_first[s]);
        std::vector<double> sc(K, 0.0), x(K);
        double y = 0.0, rss = 0.0;
        for (size_t k = 0; k < rows.size(); ++k) {
            if (!detail::design_row(rows, k, lay, sub, sample.stock_sector[s], x, y)) continue;
            double fit = 0.0;
            for (size_t i = 0; i < K; ++i) fit += x[i] * beta[i];
            double u = y - fit;
            rss += u * u;
            for (size_t i = 0; i < K; ++i)
                if (x[i] != 0.0) sc[i] += x[i] * u;
        }
        scores[s] = std::move(sc);
        rss_part[s] = rss;
    });

    Mat meat(K, K);
    double rss = 0.0;
    {
        std::vector<KahanSum> meat_sum(detail::packed_size(K));
        KahanSum rss_sum;
        for (size_t s = 0; s < S; ++s) {
            if (acc[s].count == 0) continue;
            const std::vector<double>& sc = scores[s];
            size_t p = 0;
            for (size_t i = 0; i < K; ++i)
                for (size_t j = i; j < K; ++j) meat_sum[p++].add(sc[i] * sc[j]);
            rss_sum.add(rss_part[s]);
        }
        size_t p = 0;
        for (size_t i = 0; i < K; ++i)
            for (size_t j = i; j < K; ++j) {
                double v = meat_sum[p++].value();
                meat.at(i, j) = v;
                meat.at(j, i) = v;
            }
        rss = rss_sum.value();
    }
    double n = static_cast<double>(n_obs);
    double ybar = y_sum.value() / n;
    double tss = y2_sum.value() - n * ybar * ybar;

    Mat V = mat_mul(mat_mul(bread, meat), bread);
    if (opt.cluster_small_sample) {
        double G = static_cast<double>(n_clusters);
        double corr = G / (G - 1.0) * (n - 1.0) / (n - static_cast<double>(K));
        for (double& v : V.a) v *= corr;
    }
    for (size_t i = 0; i < K; ++i)
        for (size_t j = i + 1; j < K; ++j) {
            double v = 0.5 * (V.at(i, j) + V.at(j, i));
            V.at(i, j) = v;
            V.at(j, i) = v;
        }

    FitResult out;
    out.lag = lag;
    out.subgroup = subgroup_name(sub.scheme);
    out.levels = sub.levels;
    out.labels = lay.labels;
    out.beta = std::move(beta);
    out.vcov = std::move(V);
    out.rss = rss;
    out.tss = tss;
    out.adj_r2 = 1.0 - (rss / (n - static_cast<double>(K))) / (tss / (n - 1.0));
    out.n_obs = n_obs;
    out.n_clusters = n_clusters;
    return out;
}

// The six lag specifications on the same estimation sample.
inline std::vector<FitResult> run_spec_suite(const RegSample& sample, const SubgroupSpec& sub,
                                             const OlsOptions& opt = {}) {
    std::vector<FitResult> fits;
    fits.reserve(kMaxLag + 1);
    for (int lag = 0; lag <= kMaxLag; ++lag) fits.push_back(pooled_ols(sample, lag, sub, opt));
    for (const FitResult& f : fits)
        if (f.n_obs != fits[0].n_obs)
            throw std::runtime_error("spec suite: estimation samples differ across lags");
    return fits;
}

// ---- sample construction ----

enum class Dependent { dn, dn_detrended };

inline Dependent dependent_from_name(const std::string& name) {
    if (name == "dn") return Dependent::dn;
    if (name == "dn_detrended") return Dependent::dn_detrended;
    throw std::invalid_argument("unknown dependent: " + name);
}

inline RegSample make_sample(const Panel& panel, Dependent dep = Dependent::dn) {
    RegSample s;
    s.rows.reserve(panel.rows.size());
    s.sectors = panel.sectors;
    s.stock_first.reserve(panel.stocks.size() + 1);
    for (const StockInfo& st : panel.stocks) {
        s.stock_first.push_back(s.rows.size());
        s.stock_ticker.push_back(st.ticker);
        s.stock_sector.push_back(st.sector);
        for (size_t r = 0; r < st.n_rows; ++r) {
            const PanelRow& pr = panel.rows[st.first_row + r];
            RegRow rr;
            rr.stock = pr.stock;
            rr.kind = pr.kind;
            rr.day = pr.day;
            rr.group = pr.group;
            rr.y = dep == Dependent::dn ? pr.delta_n : pr.delta_n_detrended;
            rr.r = pr.std_return;
            rr.mkt = pr.mkt_std;
            rr.cap = pr.market_cap;
            s.rows.push_back(rr);
        }
    }
    s.stock_first.push_back(s.rows.size());
    return s;
}

inline RegSample make_sample(const DailyPanel& panel) {
    RegSample s;
    s.rows.reserve(panel.rows.size());
    s.sectors = panel.sectors;
    for (const StockInfo& st : panel.stocks) {
        s.stock_first.push_back(s.rows.size());
        s.stock_ticker.push_back(st.ticker);
        s.stock_sector.push_back(st.sector);
        for (size_t r = 0; r < st.n_rows; ++r) {
            const DailyRow& dr = panel.rows[st.first_row + r];
            RegRow rr;
            rr.stock = dr.stock;
            rr.kind = ObsKind::intraday;  // kind is undefined at daily frequency
            rr.day = dr.day;
            rr.group = dr.group;
            rr.y = dr.delta_n;
            rr.r = dr.std_return;
            rr.mkt = dr.mkt_std;
            rr.cap = dr.market_cap;
            s.rows.push_back(rr);
        }
    }
    s.stock_first.push_back(s.rows.size());
    return s;
}

}  // namespace hfpanel
