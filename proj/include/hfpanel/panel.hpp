#pragma once
// Panel construction: scaled holder-count changes and returns over intraday /
// overnight observation pairs, trade-price matching, winsorization, the
// daily-frequency variant, per-stock detrending, and summary statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "stats.hpp"
#include "types.hpp"

namespace hfpanel {

constexpr double kSessionHours = 6.5;
constexpr double kMaxIntradayMinutes = 200.0;

// Scale factor bringing a per-period change to a daily magnitude: an intraday
// hour-ish gap of `mnt` minutes scales by (60/mnt) * 6.5 * 2 (a trading day
// being a 6.5-hour session plus an overnight half of equal weight); an
// overnight change scales by 2.
inline double scaling_factor(ObsKind kind, double mnt = 0.0) {
    if (kind == ObsKind::overnight) return 2.0;
    if (!(mnt > 0.0)) throw std::domain_error("scaling_factor: mnt must be positive");
    if (mnt > kMaxIntradayMinutes)
        throw std::domain_error("scaling_factor: intraday gap exceeds 200 minutes");
    return (60.0 / mnt) * kSessionHours * 2.0;
}

// Scaled log change in holder counts, with the plus-one guard for zero counts.
inline double position_openings(int64_t n_prev, int64_t n_curr, ObsKind kind, double mnt = 0.0) {
    if (n_prev < 0 || n_curr < 0)
        throw std::domain_error("position_openings: negative holder count");
    return std::log(static_cast<double>(n_curr + 1) / static_cast<double>(n_prev + 1)) *
           scaling_factor(kind, mnt);
}

// Scaled log price return over the same observation pair.
inline double raw_return(double p_prev, double p_curr, ObsKind kind, double mnt = 0.0) {
    if (!(p_prev > 0.0) || !(p_curr > 0.0))
        throw std::domain_error("raw_return: non-positive price");
    return std::log(p_curr / p_prev) * scaling_factor(kind, mnt);
}

// Unscaled daily variants (close-to-close).
inline double daily_change(int64_t n_prev, int64_t n_curr) {
    if (n_prev < 0 || n_curr < 0) throw std::domain_error("daily_change: negative holder count");
    return std::log(static_cast<double>(n_curr + 1) / static_cast<double>(n_prev + 1));
}

inline double daily_return(double p_prev, double p_curr) {
    if (!(p_prev > 0.0) || !(p_curr > 0.0))
        throw std::domain_error("daily_return: non-positive price");
    return std::log(p_curr / p_prev);
}

// Price of the last trade strictly before `t` (a print exactly at `t` does not
// count). `ticks` must be time-ascending. nullopt when nothing precedes `t`.
inline std::optional<double> match_last_trade(std::span<const TradeTick> ticks, UtcMicros t) {
    auto it = std::lower_bound(ticks.begin(), ticks.end(), t,
                               [](const TradeTick& a, UtcMicros b) { return a.at < b; });
    if (it == ticks.begin()) return std::nullopt;
    return (it - 1)->price;
}

// Cumulative split adjustment: dividing by the ratios of all splits dated
// after `day` states historical prices on the current post-split basis.
inline double split_adjust(double price, int32_t day, std::span<const SplitEvent> splits) {
    double f = 1.0;
    for (const SplitEvent& s : splits)
        if (s.day > day) f *= s.ratio;
    return price / f;
}

// Market capitalization on `day` from a day-ascending (day, cap) table,
// forward-filled; 0 when the table starts after `day`.
inline double cap_on_day(std::span<const std::pair<int32_t, double>> caps, int32_t day) {
    auto it = std::upper_bound(caps.begin(), caps.end(), day,
                               [](int32_t d, const std::pair<int32_t, double>& c) {
                                   return d < c.first;
                               });
    if (it == caps.begin()) return 0.0;
    return (it - 1)->second;
}

// ---- panel assembly ----

// Builds the observation-pair panel from clean per-stock series. delta_n is
// NOT yet winsorized (pooled bounds need the complete panel; see
// finalize_panel). std_return / mkt_std stay NaN until standardization.
inline Panel build_panel(const CleanData& data) {
    Panel panel;
    std::map<std::string, int32_t> sector_ids;
    std::map<int32_t, size_t> market_by_day;
    for (size_t i = 0; i < data.market.size(); ++i) market_by_day[data.market[i].day] = i;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const CleanStock& st : data.stocks) {
        StockInfo info;
        info.ticker = st.ticker;
        auto sec = sector_ids.find(st.sector);
        if (sec == sector_ids.end()) {
            sec = sector_ids.emplace(st.sector, static_cast<int32_t>(panel.sectors.size())).first;
            panel.sectors.push_back(st.sector);
        }
        info.sector = sec->second;
        info.first_row = panel.rows.size();

        int32_t slot = 0;
        for (size_t j = 1; j < st.obs.size(); ++j) {
            const CleanObservation& prev = st.obs[j - 1];
            const CleanObservation& curr = st.obs[j];
            PanelRow row;
            row.stock = static_cast<int32_t>(panel.stocks.size());
            row.kind = prev.day == curr.day ? ObsKind::intraday : ObsKind::overnight;
            row.day = curr.day;
            row.t_prev = prev.at;
            row.t_curr = curr.at;
            row.n_prev = prev.holders;
            row.n_curr = curr.holders;
            row.p_prev = prev.price;
            row.p_curr = curr.price;
            if (row.kind == ObsKind::intraday) {
                row.mnt = static_cast<double>(curr.at - prev.at) / kMicrosPerMin;
                if (!(row.mnt > 0.0) || row.mnt > kMaxIntradayMinutes)
                    continue;  // defensive: completeness filtering keeps gaps under 200 min
            }
            row.obs_idx = static_cast<int32_t>(j);
            row.delta_n = position_openings(row.n_prev, row.n_curr, row.kind, row.mnt);
            row.raw_return = raw_return(row.p_prev, row.p_curr, row.kind, row.mnt);

            double mp_prev = st.mkt_price[j - 1];
            double mp_curr = st.mkt_price[j];
            row.mkt_raw = mp_prev > 0.0 && mp_curr > 0.0
                              ? raw_return(mp_prev, mp_curr, row.kind, row.mnt)
                              : nan;
            row.std_return = nan;
            row.mkt_std = nan;
            row.market_cap = cap_on_day(st.caps, row.day);
            row.slot = slot++;
            panel.rows.push_back(row);
        }
        info.n_rows = panel.rows.size() - info.first_row;
        panel.stocks.push_back(std::move(info));
    }
    return panel;
}

// Per-stock least-squares trend of log(holders+1) against time (in days);
// returns the detrended level series aligned to the stock's observations.
struct DetrendResult {
    std::vector<double> residuals;
    double slope = 0.0;      // per day
    double intercept = 0.0;
};

inline DetrendResult detrend_log_holders(std::span<const int64_t> holders,
                                         std::span<const UtcMicros> times) {
    if (holders.size() != times.size() || holders.size() < 2)
        throw std::invalid_argument("detrend_log_holders: need >= 2 aligned points");
    const size_t n = holders.size();
    DetrendResult out;
    out.residuals.resize(n);
    std::vector<double> t(n), y(n);
    const double t0 = static_cast<double>(times[0]);
    for (size_t i = 0; i < n; ++i) {
        if (holders[i] < 0) throw std::domain_error("detrend_log_holders: negative count");
        t[i] = (static_cast<double>(times[i]) - t0) / static_cast<double>(kMicrosPerDay);
        y[i] = std::log(static_cast<double>(holders[i] + 1));
    }
    double tm = mean(t), ym = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxx += (t[i] - tm) * (t[i] - tm);
        sxy += (t[i] - tm) * (y[i] - ym);
    }
    if (!(sxx > 0.0))
        throw std::domain_error("detrend_log_holders: degenerate time variable");
    out.slope = sxy / sxx;
    out.intercept = ym - out.slope * tm;
    for (size_t i = 0; i < n; ++i) out.residuals[i] = y[i] - (out.intercept + out.slope * t[i]);
    return out;
}

// Fills delta_n_detrended from per-stock detrended log-holder levels, then
// winsorizes both dependents at the pooled 0.5 / 99.5 percentiles (each on its
// own distribution). Standardized returns are never winsorized.
inline void finalize_panel(Panel& panel, const CleanData& data) {
    // Detrended changes need the full observation series, including each
    // stock's first snapshot (which heads no row).
    for (size_t s = 0; s < panel.stocks.size(); ++s) {
        const StockInfo& info = panel.stocks[s];
        if (info.n_rows == 0) continue;
        const CleanStock& st = data.stocks[s];
        std::vector<int64_t> holders(st.obs.size());
        std::vector<UtcMicros> times(st.obs.size());
        for (size_t j = 0; j < st.obs.size(); ++j) {
            holders[j] = st.obs[j].holders;
            times[j] = st.obs[j].at;
        }
        DetrendResult dt = detrend_log_holders(holders, times);
        for (size_t r = 0; r < info.n_rows; ++r) {
            PanelRow& row = panel.rows[info.first_row + r];
            double d = dt.residuals[row.obs_idx] - dt.residuals[row.obs_idx - 1];
            row.delta_n_detrended = d * scaling_factor(row.kind, row.mnt);
        }
    }

    auto winsorize_field = [&](auto get) {
        std::vector<double> xs;
        xs.reserve(panel.rows.size());
        for (const PanelRow& r : panel.rows) xs.push_back(get(const_cast<PanelRow&>(r)));
        if (xs.empty()) return;
        WinsorBounds b = winsor_bounds(std::move(xs), 0.5, 99.5);
        for (PanelRow& r : panel.rows) get(r) = std::clamp(get(r), b.lo, b.hi);
    };
    winsorize_field([](PanelRow& r) -> double& { return r.delta_n; });
    winsorize_field([](PanelRow& r) -> double& { return r.delta_n_detrended; });
}

// ---- daily variant ----

// One row per stock per retained day from the last observation of each day
// (the cleaning keeps only in-session snapshots, so that is the last one
// before the close). Changes span consecutive retained days. delta_n not yet
// winsorized; std_return NaN until the daily estimates exist.
inline DailyPanel build_daily_panel(const CleanData& data) {
    DailyPanel dp;
    std::map<std::string, int32_t> sector_ids;
    std::map<int32_t, size_t> market_by_day;
    for (size_t i = 0; i < data.market.size(); ++i) market_by_day[data.market[i].day] = i;
    const double nan = std::numeric_limits<double>::quiet_NaN();

    for (const CleanStock& st : data.stocks) {
        StockInfo info;
        info.ticker = st.ticker;
        auto sec = sector_ids.find(st.sector);
        if (sec == sector_ids.end()) {
            sec = sector_ids.emplace(st.sector, static_cast<int32_t>(dp.sectors.size())).first;
            dp.sectors.push_back(st.sector);
        }
        info.sector = sec->second;
        info.first_row = dp.rows.size();

        // Last observation per day.
        std::vector<size_t> closes;
        for (size_t j = 0; j < st.obs.size(); ++j) {
            if (j + 1 == st.obs.size() || st.obs[j + 1].day != st.obs[j].day) closes.push_back(j);
        }
        int32_t slot = 0;
        for (size_t c = 1; c < closes.size(); ++c) {
            const CleanObservation& prev = st.obs[closes[c - 1]];
            const CleanObservation& curr = st.obs[closes[c]];
            DailyRow row;
            row.stock = static_cast<int32_t>(dp.stocks.size());
            row.slot = slot++;
            row.day = curr.day;
            row.day_prev = prev.day;
            row.n_prev = prev.holders;
            row.n_curr = curr.holders;
            row.p_prev = prev.price;
            row.p_curr = curr.price;
            row.delta_n = daily_change(row.n_prev, row.n_curr);
            row.raw_return = daily_return(row.p_prev, row.p_curr);
            row.std_return = nan;
            // Market leg over the same day pair, from market session closes.
            auto mp = market_by_day.find(prev.day);
            auto mc = market_by_day.find(curr.day);
            row.mkt_raw = mp != market_by_day.end() && mc != market_by_day.end() &&
                                  data.market[mp->second].close > 0.0 &&
                                  data.market[mc->second].close > 0.0
                              ? daily_return(data.market[mp->second].close,
                                             data.market[mc->second].close)
                              : nan;
            row.mkt_std = nan;
            row.market_cap = cap_on_day(st.caps, row.day);
            dp.rows.push_back(row);
        }
        info.n_rows = dp.rows.size() - info.first_row;
        dp.stocks.push_back(std::move(info));
    }
    return dp;
}

inline void winsorize_daily(DailyPanel& dp) {
    if (dp.rows.empty()) return;
    std::vector<double> xs;
    xs.reserve(dp.rows.size());
    for (const DailyRow& r : dp.rows) xs.push_back(r.delta_n);
    WinsorBounds b = winsor_bounds(std::move(xs), 0.5, 99.5);
    for (DailyRow& r : dp.rows) r.delta_n = std::clamp(r.delta_n, b.lo, b.hi);
}

// ---- summary statistics ----

struct SummaryRow {
    std::string series;   // "delta_n" | "std_return"
    std::string sample;   // "intraday" | "overnight" | "all"
    double mean = 0.0;
    double sd = 0.0;
    double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
    uint64_t n_obs = 0;
};

inline SummaryRow summarize_series(std::vector<double> xs, const std::string& series,
                                   const std::string& sample) {
    SummaryRow row;
    row.series = series;
    row.sample = sample;
    row.n_obs = xs.size();
    if (xs.empty()) return row;
    row.mean = mean(xs);
    row.sd = xs.size() > 1 ? stdev(xs) : 0.0;
    std::sort(xs.begin(), xs.end());
    row.p5 = quantile_sorted(xs, 0.05);
    row.p25 = quantile_sorted(xs, 0.25);
    row.p50 = quantile_sorted(xs, 0.50);
    row.p75 = quantile_sorted(xs, 0.75);
    row.p95 = quantile_sorted(xs, 0.95);
    return row;
}

// delta_n rows are reported in basis points; std_return rows unitless.
inline std::vector<SummaryRow> summarize_panel(const Panel& panel) {
    std::vector<SummaryRow> out;
    auto gather = [&](auto value, ObsKind kind, bool all) {
        std::vector<double> xs;
        for (const PanelRow& r : panel.rows)
            if (all || r.kind == kind) {
                double v = value(r);
                if (std::isfinite(v)) xs.push_back(v);
            }
        return xs;
    };
    auto dn = [](const PanelRow& r) { return r.delta_n * 1e4; };
    auto sr = [](const PanelRow& r) { return r.std_return; };
    for (auto [kind, name] : {std::pair{ObsKind::intraday, "intraday"},
                              std::pair{ObsKind::overnight, "overnight"}}) {
        out.push_back(summarize_series(gather(dn, kind, false), "delta_n_bps", name));
    }
    out.push_back(summarize_series(gather(dn, ObsKind::intraday, true), "delta_n_bps", "all"));
    for (auto [kind, name] : {std::pair{ObsKind::intraday, "intraday"},
                              std::pair{ObsKind::overnight, "overnight"}}) {
        out.push_back(summarize_series(gather(sr, kind, false), "std_return", name));
    }
    out.push_back(summarize_series(gather(sr, ObsKind::intraday, true), "std_return", "all"));
    return out;
}

}  // namespace hfpanel
