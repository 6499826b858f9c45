#pragma once
// Standardization glue: fill the std_return / mkt_std columns of a built
// panel from stored per-stock volatility estimates and the market proxy
// series, then assign response groups from pooled cutoffs.
//
// Stock-leg volatility is an internal invariant — every retained observation
// day has an estimate by construction (the estimability filter dropped the
// rest), so a missing value throws.  The market leg is data: a day without a
// usable market sigma yields NaN, which later drops the row from estimation.

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "hfpanel/grouping.hpp"
#include "hfpanel/types.hpp"
#include "hfpanel/volatility.hpp"

namespace hfpanel {

namespace detail {

struct StockVol {
    std::map<int32_t, double> rv;         // intraday sigma by day
    std::map<int32_t, double> overnight;  // overnight sigma by day
};

inline double require_sigma(const std::map<int32_t, double>& by_day, int32_t day,
                            const std::string& ticker, const char* what) {
    auto it = by_day.find(day);
    if (it == by_day.end())
        throw std::runtime_error("missing " + std::string(what) + " volatility for " + ticker +
                                 " on day " + format_date(day));
    return it->second;
}

}  // namespace detail

inline void fill_std_returns(Panel& panel, const CleanData& clean) {
    std::unordered_map<std::string, detail::StockVol> vol;
    for (const VolEstimate& e : clean.estimates) {
        detail::StockVol& v = vol[e.ticker];
        (e.kind == ObsKind::intraday ? v.rv : v.overnight)[e.day] = e.sigma;
    }
    std::unordered_map<int32_t, const MarketDay*> market;
    for (const MarketDay& d : clean.market) market[d.day] = &d;

    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const StockInfo& si : panel.stocks) {
        auto vit = vol.find(si.ticker);
        if (vit == vol.end())
            throw std::runtime_error("no volatility estimates for " + si.ticker);
        const detail::StockVol& v = vit->second;
        for (size_t i = si.first_row; i < si.first_row + si.n_rows; ++i) {
            PanelRow& row = panel.rows[i];
            const bool intraday = row.kind == ObsKind::intraday;
            double sigma = detail::require_sigma(intraday ? v.rv : v.overnight, row.day,
                                                 si.ticker, intraday ? "intraday" : "overnight");
            row.std_return = standardize_return(row.raw_return, sigma);
            double mkt_sigma = 0.0;
            if (auto it = market.find(row.day); it != market.end())
                mkt_sigma = intraday ? it->second->sigma_rv : it->second->sigma_on;
            row.mkt_std = std::isfinite(row.mkt_raw) && mkt_sigma > 0.0 ? row.mkt_raw / mkt_sigma
                                                                        : nan;
        }
    }
}

// Daily variant: per-stock conditional sigmas come from the daily-frequency
// model fits (keyed ticker -> day), the market leg from sigma_daily.
inline void fill_std_daily(DailyPanel& panel,
                           const std::unordered_map<std::string, std::map<int32_t, double>>& vol,
                           const std::vector<MarketDay>& market_days) {
    std::unordered_map<int32_t, const MarketDay*> market;
    for (const MarketDay& d : market_days) market[d.day] = &d;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (const StockInfo& si : panel.stocks) {
        auto vit = vol.find(si.ticker);
        if (vit == vol.end())
            throw std::runtime_error("no daily volatility estimates for " + si.ticker);
        for (size_t i = si.first_row; i < si.first_row + si.n_rows; ++i) {
            DailyRow& row = panel.rows[i];
            double sigma = detail::require_sigma(vit->second, row.day, si.ticker, "daily");
            row.std_return = standardize_return(row.raw_return, sigma);
            double mkt_sigma = 0.0;
            if (auto it = market.find(row.day); it != market.end())
                mkt_sigma = it->second->sigma_daily;
            row.mkt_std = std::isfinite(row.mkt_raw) && mkt_sigma > 0.0 ? row.mkt_raw / mkt_sigma
                                                                        : nan;
        }
    }
}

// Pooled cutoffs over every finite standardized return (both observation
// kinds together), then per-row group labels; rows without a standardized
// return keep group -1 and never enter estimation.
inline GroupCutoffs assign_panel_groups(Panel& panel) {
    std::vector<double> sample;
    sample.reserve(panel.rows.size());
    for (const PanelRow& row : panel.rows)
        if (std::isfinite(row.std_return)) sample.push_back(row.std_return);
    GroupCutoffs cuts = compute_cutoffs(std::move(sample));
    for (PanelRow& row : panel.rows)
        row.group = std::isfinite(row.std_return)
                        ? static_cast<int8_t>(assign_group(row.std_return, cuts))
                        : static_cast<int8_t>(-1);
    return cuts;
}

inline GroupCutoffs assign_daily_groups(DailyPanel& panel) {
    std::vector<double> sample;
    sample.reserve(panel.rows.size());
    for (const DailyRow& row : panel.rows)
        if (std::isfinite(row.std_return)) sample.push_back(row.std_return);
    GroupCutoffs cuts = compute_cutoffs(std::move(sample));
    for (DailyRow& row : panel.rows)
        row.group = std::isfinite(row.std_return)
                        ? static_cast<int8_t>(assign_group(row.std_return, cuts))
                        : static_cast<int8_t>(-1);
    return cuts;
}

}  // namespace hfpanel
