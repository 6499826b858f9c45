#pragma once
// Core data records shared across the pipeline stages.

#include <cstdint>
#include <string>
#include <vector>

#include "time.hpp"

namespace hfpanel {

// One raw holdings snapshot as it arrives from the input file (timestamp still
// unadjusted, UTC).
struct RawSnapshot {
    UtcMicros at = 0;
    int64_t holders = 0;
};

struct TradeTick {
    UtcMicros at = 0;
    double price = 0.0;
};

struct SplitEvent {
    int32_t day = 0;   // effective date (NY civil day number)
    double ratio = 1.0;  // 2.0 means a 2-for-1 split on `day`
};

struct SecurityMeta {
    std::string ticker;
    int share_code = 0;       // common shares are 10 / 11
    std::string sector;       // GICS-style label
    bool dual_class = false;
    std::vector<SplitEvent> splits;
};

// A snapshot that survived cleaning: delay-adjusted, inside regular trading
// hours, deduplicated, with the last trade price strictly before it.
struct CleanObservation {
    UtcMicros at = 0;       // adjusted event time, UTC
    int32_t day = 0;        // NY civil day number of `at`
    int64_t holders = 0;
    double price = 0.0;     // split-adjusted; 0 until price matching (step 10)
};

enum class ObsKind : int8_t { intraday = 0, overnight = 1 };

inline const char* obs_kind_name(ObsKind k) {
    return k == ObsKind::intraday ? "intraday" : "overnight";
}

// One holdings-change observation: the pair (t_prev, t_curr) within a stock's
// chronological series, either consecutive same-day snapshots (intraday) or
// last-of-previous-day to first-of-day (overnight).
struct PanelRow {
    int32_t stock = 0;      // index into the panel's stock table
    int32_t slot = 0;       // chronological index within the stock (lag unit)
    int32_t obs_idx = 0;    // index of t_curr within the stock's clean series
    ObsKind kind = ObsKind::intraday;
    int32_t day = 0;        // NY civil day number of t_curr
    UtcMicros t_prev = 0;
    UtcMicros t_curr = 0;
    double mnt = 0.0;       // elapsed minutes, intraday rows only
    int64_t n_prev = 0;
    int64_t n_curr = 0;
    double p_prev = 0.0;
    double p_curr = 0.0;
    double delta_n = 0.0;        // scaled log holder change, winsorized
    double delta_n_detrended = 0.0;
    double raw_return = 0.0;     // scaled log price change (not winsorized)
    double std_return = 0.0;     // raw_return / sigma-hat
    double mkt_raw = 0.0;        // market return over the same timestamp pair
    double mkt_std = 0.0;
    double market_cap = 0.0;     // stock's cap on `day` (0 when unknown)
    int8_t group = -1;           // six-way return group, assigned pre-regression
};

struct StockInfo {
    std::string ticker;
    int32_t sector = -1;       // index into Panel::sectors
    size_t first_row = 0;      // rows are contiguous per stock, in slot order
    size_t n_rows = 0;
};

struct Panel {
    std::vector<StockInfo> stocks;
    std::vector<std::string> sectors;
    std::vector<PanelRow> rows;  // grouped by stock, slot-ascending
};

// Daily-frequency variant: one observation per stock per retained day, built
// from the last snapshot before the 4 pm close.
struct DailyRow {
    int32_t stock = 0;
    int32_t slot = 0;
    int32_t day = 0;
    int32_t day_prev = 0;
    int64_t n_prev = 0;
    int64_t n_curr = 0;
    double p_prev = 0.0;
    double p_curr = 0.0;
    double delta_n = 0.0;
    double raw_return = 0.0;
    double std_return = 0.0;
    double mkt_raw = 0.0;
    double mkt_std = 0.0;
    double market_cap = 0.0;
    int8_t group = -1;
};

struct DailyPanel {
    std::vector<StockInfo> stocks;
    std::vector<std::string> sectors;
    std::vector<DailyRow> rows;
};

// Attrition ledger: observation/security counts remaining after each cleaning
// step, mirroring the audit-table layout.
struct FilterStep {
    int step = 0;
    std::string name;
    uint64_t observations = 0;
    uint64_t securities = 0;
};

using FilterLedger = std::vector<FilterStep>;

// Per-stock-day (realized-variance) or per-stock-series (GJR) volatility
// estimates, persisted for audit and reused by the standardization stage.
struct VolEstimate {
    std::string ticker;
    int32_t day = 0;          // -1 for whole-series (GJR parameter) records
    ObsKind kind = ObsKind::intraday;
    double sigma = 0.0;       // full-day-scaled sigma for this (stock, day, kind)
    std::string model;        // "rv" | "gjr" | "garch"
    bool converged = true;
};

// One stock's data after the full cleaning pipeline. Observations are
// time-ascending with the last strictly-before split-adjusted trade price and
// the market proxy's price at the same instant attached.
struct CleanStock {
    std::string ticker;
    std::string sector;
    std::vector<CleanObservation> obs;
    std::vector<double> mkt_price;               // parallel to obs
    std::vector<std::pair<int32_t, double>> caps;  // (day, market cap), day-ascending
};

// Per-trading-day market proxy record: session open/close prices plus the
// market's own volatility estimates used to standardize the market legs.
struct MarketDay {
    int32_t day = 0;
    double open = 0.0;
    double close = 0.0;
    double sigma_rv = 0.0;     // full-day scale; 0 = inestimable
    double sigma_on = 0.0;     // overnight GJR sigma, full-day scale
    double sigma_daily = 0.0;  // daily GJR sigma
};

struct CleanData {
    std::vector<CleanStock> stocks;   // ticker-ascending
    std::vector<MarketDay> market;    // day-ascending
    std::string market_ticker;
    FilterLedger ledger;
    std::vector<VolEstimate> estimates;  // stock RV per day + GJR sigma per overnight day
};

}  // namespace hfpanel
