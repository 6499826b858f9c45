#pragma once
// Cleaning pipeline: timestamp adjustment followed by the twelve-step filter
// cascade, with an attrition ledger (observations / securities remaining after
// each step). Steps, in order:
//   1 original sample          2 sample window (first-month drop)
//   3 trading hours            4 ticker matching
//   5 share codes              6 dual-class removal
//   7 hourly dedupe            8 daily completeness
//   9 series continuity       10 price matching (+ re-run of 8 and 9)
//  11 volatility estimability 12 constant and flagged series

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "panel.hpp"
#include "time.hpp"
#include "types.hpp"
#include "volatility.hpp"

namespace hfpanel {

struct RawStock {
    std::string ticker;
    std::vector<RawSnapshot> snaps;  // unadjusted UTC, file order
    std::vector<TradeTick> ticks;    // raw prices, sorted by time after load
    SecurityMeta meta;
    bool has_meta = false;
    std::vector<std::pair<int32_t, double>> caps;  // (day, cap), day-ascending
};

struct RawData {
    std::vector<RawStock> stocks;      // ticker-ascending, market excluded
    std::vector<TradeTick> market_ticks;
    std::string market_ticker;
};

struct IngestSettings {
    int delay_minutes = 45;
    int32_t sample_start = 0;          // civil day; keep day >= start
    int32_t sample_end = 0x3fffffff;   // keep day <= end
    int64_t near_hour_epsilon = 2 * kMicrosPerMin;
    size_t min_vol_obs = kMinVolObs;
    int points_required_full = 6;      // per full 6.5h session; scaled on half days
    int max_gap_trading_days = 7;
    ExclusionList exclusions;
    TradingCalendar calendar = TradingCalendar::usual();

    static IngestSettings from_config(const Config& cfg) {
        IngestSettings s;
        s.delay_minutes = static_cast<int>(cfg.get_int("delay_minutes", 45));
        if (s.delay_minutes <= 0)
            throw std::runtime_error("ingest: delay_minutes must be positive");
        auto start = parse_date(cfg.get_str("sample_start", "2018-06-01"));
        if (!start) throw std::runtime_error("ingest: bad sample_start");
        s.sample_start = *start;
        if (cfg.has("sample_end")) {
            auto end = parse_date(cfg.require_str("sample_end"));
            if (!end) throw std::runtime_error("ingest: bad sample_end");
            s.sample_end = *end;
        }
        s.near_hour_epsilon = cfg.get_int("near_hour_epsilon_minutes", 2) * kMicrosPerMin;
        s.min_vol_obs = static_cast<size_t>(cfg.get_int("min_vol_obs", 240));
        s.points_required_full = static_cast<int>(cfg.get_int("points_required_full", 6));
        s.max_gap_trading_days = static_cast<int>(cfg.get_int("max_gap_trading_days", 7));
        if (cfg.has("exclusions")) s.exclusions = ExclusionList::from_file(cfg.require_str("exclusions"));
        return s;
    }

    int points_required(double session_hours) const {
        int p = static_cast<int>(std::floor(points_required_full * session_hours / kSessionHours + 0.5));
        return std::max(2, p);
    }
};

namespace detail {

// Working observation during filtering.
struct WorkObs {
    UtcMicros at = 0;    // adjusted UTC
    int32_t day = 0;     // NY civil day
    int hour = 0;        // NY hour of day
    int64_t tod = 0;     // NY micros since midnight
    int64_t holders = 0;
    double price = 0.0;
};

struct StockCounts {
    // Observations remaining after steps 1..12 (index 0 = step 1).
    std::array<uint64_t, 12> obs{};
};

}  // namespace detail

// Subtracts the recording delay from raw snapshot timestamps.
inline UtcMicros adjust_timestamp(UtcMicros raw, int delay_minutes) {
    if (delay_minutes <= 0) throw std::domain_error("adjust_timestamp: delay must be positive");
    return raw - static_cast<int64_t>(delay_minutes) * kMicrosPerMin;
}

// Hourly dedupe: at most one observation per NY clock hour (keeping the last),
// then the near-hour rule: of two consecutive retained observations in
// adjacent hours of the same day no more than epsilon apart, the later one is
// dropped (it repeats the almost-on-the-hour reading).
inline void dedupe_hourly(std::vector<detail::WorkObs>& obs, int64_t epsilon) {
    std::vector<detail::WorkObs> kept;
    kept.reserve(obs.size());
    for (size_t i = 0; i < obs.size(); ++i) {
        bool last_of_hour = i + 1 == obs.size() || obs[i + 1].day != obs[i].day ||
                            obs[i + 1].hour != obs[i].hour;
        if (last_of_hour) kept.push_back(obs[i]);
    }
    std::vector<detail::WorkObs> out;
    out.reserve(kept.size());
    for (const detail::WorkObs& o : kept) {
        if (!out.empty()) {
            const detail::WorkObs& p = out.back();
            if (p.day == o.day && o.hour == p.hour + 1 && o.at - p.at <= epsilon) continue;
        }
        out.push_back(o);
    }
    obs = std::move(out);
}

namespace detail {

inline void drop_incomplete_days(std::vector<WorkObs>& obs, const IngestSettings& st) {
    std::vector<WorkObs> out;
    out.reserve(obs.size());
    size_t i = 0;
    while (i < obs.size()) {
        size_t j = i;
        while (j < obs.size() && obs[j].day == obs[i].day) ++j;
        int need = st.points_required(st.calendar.session_hours(obs[i].day));
        if (static_cast<int>(j - i) >= need)
            out.insert(out.end(), obs.begin() + i, obs.begin() + j);
        i = j;
    }
    obs = std::move(out);
}

inline bool has_wide_gap(const std::vector<WorkObs>& obs, const IngestSettings& st) {
    int32_t prev_day = -1;
    for (const WorkObs& o : obs) {
        if (o.day != prev_day) {
            if (prev_day >= 0 &&
                st.calendar.trading_days_between(prev_day, o.day) > st.max_gap_trading_days)
                return true;
            prev_day = o.day;
        }
    }
    return false;
}

// In-session ticks of one NY day, with split-adjusted prices in local time.
inline std::vector<LocalTick> session_ticks(const std::vector<TradeTick>& ticks, int32_t day,
                                            const TradingCalendar& cal,
                                            std::span<const SplitEvent> splits) {
    std::vector<LocalTick> out;
    UtcMicros lo = utc_from_ny(civil_from_days(day), 9, 30);
    UtcMicros hi = utc_from_ny(civil_from_days(day), 0, 0) + cal.session_close(day);
    auto it = std::lower_bound(ticks.begin(), ticks.end(), lo,
                               [](const TradeTick& t, UtcMicros v) { return t.at < v; });
    for (; it != ticks.end() && it->at <= hi; ++it) {
        NyTime ny = ny_time(it->at);
        out.push_back({ny.micros_since_midnight, split_adjust(it->price, day, splits)});
    }
    return out;
}

}  // namespace detail

// Per-stock filter outcome plus attrition checkpoints.
struct StockFilterResult {
    CleanStock clean;
    std::array<uint64_t, 12> obs_after{};  // counts after steps 1..12
    std::vector<VolEstimate> estimates;
    std::vector<double> overnight_returns;  // diagnostic
};

// Runs steps 1..12 for a single stock. Market ticks provide the per-obs
// market price; market estimation happens separately.
inline StockFilterResult filter_stock(const RawStock& raw, const IngestSettings& st,
                                      const std::vector<TradeTick>& market_ticks) {
    StockFilterResult out;
    out.clean.ticker = raw.ticker;
    out.clean.sector = raw.has_meta ? raw.meta.sector : "";
    out.clean.caps = raw.caps;

    // Step 1: original sample.
    out.obs_after[0] = raw.snaps.size();

    // Timestamp adjustment (a correction, not a filter), then step 2 window.
    std::vector<detail::WorkObs> obs;
    obs.reserve(raw.snaps.size());
    for (const RawSnapshot& s : raw.snaps) {
        detail::WorkObs w;
        w.at = adjust_timestamp(s.at, st.delay_minutes);
        NyTime ny = ny_time(w.at);
        w.day = ny.day_number;
        w.hour = ny.hour;
        w.tod = ny.micros_since_midnight;
        w.holders = s.holders;
        if (w.day < st.sample_start || w.day > st.sample_end) continue;
        obs.push_back(w);
    }
    std::stable_sort(obs.begin(), obs.end(),
                     [](const detail::WorkObs& a, const detail::WorkObs& b) { return a.at < b.at; });
    out.obs_after[1] = obs.size();

    // Step 3: regular trading hours [09:30, close) on trading days.
    std::erase_if(obs, [&](const detail::WorkObs& o) {
        if (!st.calendar.is_trading_day(o.day)) return true;
        return o.tod < TradingCalendar::session_open() || o.tod >= st.calendar.session_close(o.day);
    });
    out.obs_after[2] = obs.size();

    // Step 4: ticker matching (reference data and a tick history must exist).
    if (!raw.has_meta || raw.ticks.empty()) obs.clear();
    out.obs_after[3] = obs.size();

    // Step 5: common-share codes.
    if (raw.has_meta && raw.meta.share_code != 10 && raw.meta.share_code != 11) obs.clear();
    out.obs_after[4] = obs.size();

    // Step 6: dual-class listings.
    if (raw.has_meta && raw.meta.dual_class) obs.clear();
    out.obs_after[5] = obs.size();

    // Step 7: hourly dedupe + near-hour rule.
    dedupe_hourly(obs, st.near_hour_epsilon);
    out.obs_after[6] = obs.size();

    // Step 8: per-day completeness.
    detail::drop_incomplete_days(obs, st);
    out.obs_after[7] = obs.size();

    // Step 9: continuity (drop the stock on any wide trading-day gap).
    if (detail::has_wide_gap(obs, st)) obs.clear();
    out.obs_after[8] = obs.size();

    // Step 10: price matching (strictly-before trade, split-adjusted), then
    // completeness and continuity again on what survives.
    std::span<const SplitEvent> splits =
        raw.has_meta ? std::span<const SplitEvent>(raw.meta.splits) : std::span<const SplitEvent>();
    std::erase_if(obs, [&](detail::WorkObs& o) {
        auto p = match_last_trade(raw.ticks, o.at);
        if (!p) return true;
        o.price = split_adjust(*p, o.day, splits);
        return false;
    });
    detail::drop_incomplete_days(obs, st);
    if (detail::has_wide_gap(obs, st)) obs.clear();
    out.obs_after[9] = obs.size();

    // Step 11: volatility estimability. First drop days whose realized
    // variance cannot be estimated, then require enough overnight returns and
    // a converging GJR (or fallback GARCH) fit for the stock.
    {
        std::vector<int32_t> days;
        for (const detail::WorkObs& o : obs)
            if (days.empty() || days.back() != o.day) days.push_back(o.day);
        std::map<int32_t, double> rv;
        for (int32_t d : days) {
            std::vector<LocalTick> ticks = detail::session_ticks(raw.ticks, d, st.calendar, splits);
            auto sigma = realized_vol_session(ticks, TradingCalendar::session_open(),
                                              st.calendar.session_close(d));
            if (sigma && *sigma > 0.0) rv[d] = *sigma;
        }
        std::erase_if(obs, [&](const detail::WorkObs& o) { return rv.count(o.day) == 0; });

        // Overnight return series over consecutive retained days.
        std::vector<double> on_returns;
        std::vector<int32_t> on_days;
        for (size_t i = 0, start = 0; i < obs.size(); ++i) {
            bool day_end = i + 1 == obs.size() || obs[i + 1].day != obs[i].day;
            if (!day_end) continue;
            size_t day_first = start;
            if (day_first > 0) {
                const detail::WorkObs& prev_last = obs[day_first - 1];
                const detail::WorkObs& curr_first = obs[day_first];
                on_returns.push_back(raw_return(prev_last.price, curr_first.price,
                                                ObsKind::overnight));
                on_days.push_back(curr_first.day);
            }
            start = i + 1;
        }
        if (on_returns.size() < st.min_vol_obs) {
            obs.clear();
        } else {
            GjrFit fit = fit_gjr_garch(on_returns, false, st.min_vol_obs);
            if (!fit.converged) {
                obs.clear();
            } else {
                std::vector<double> sig =
                    gjr_sigma_series(fit.params, on_returns, VolSeriesKind::overnight);
                for (size_t i = 0; i < on_days.size(); ++i)
                    out.estimates.push_back({raw.ticker, on_days[i], ObsKind::overnight, sig[i],
                                             fit.model, true});
                for (const auto& [d, sigma] : rv)
                    out.estimates.push_back({raw.ticker, d, ObsKind::intraday, sigma, "rv", true});
                out.overnight_returns = std::move(on_returns);
            }
        }
    }
    out.obs_after[10] = obs.size();

    // Step 12: constant holder series and manually flagged tickers.
    for (const auto& [ticker, cutoff] : st.exclusions.truncate)
        if (ticker == raw.ticker)
            std::erase_if(obs, [&](const detail::WorkObs& o) { return o.day >= cutoff; });
    for (const std::string& ticker : st.exclusions.exclude)
        if (ticker == raw.ticker) obs.clear();
    if (!obs.empty()) {
        bool constant = true;
        for (const detail::WorkObs& o : obs)
            if (o.holders != obs.front().holders) {
                constant = false;
                break;
            }
        if (constant) obs.clear();
    }
    out.obs_after[11] = obs.size();

    // Materialize, attaching the market price at each observation instant.
    out.clean.obs.reserve(obs.size());
    out.clean.mkt_price.reserve(obs.size());
    for (const detail::WorkObs& o : obs) {
        out.clean.obs.push_back({o.at, o.day, o.holders, o.price});
        auto mp = match_last_trade(market_ticks, o.at);
        out.clean.mkt_price.push_back(mp ? *mp : 0.0);
    }
    if (out.clean.obs.empty()) {
        out.estimates.clear();
        out.overnight_returns.clear();
    }
    return out;
}

inline const char* filter_step_name(int step) {
    static const char* names[12] = {
        "original sample",   "sample window",      "trading hours",  "ticker matching",
        "share codes",       "dual-class removal", "hourly dedupe",  "daily completeness",
        "series continuity", "price matching",     "volatility estimability",
        "constant and flagged series"};
    if (step < 1 || step > 12) throw std::invalid_argument("filter_step_name: step out of range");
    return names[step - 1];
}

// Market proxy preparation: per-trading-day open/close, realized vol, GJR on
// the overnight and daily series. Fatal if the market series is unusable —
// every regression needs the market controls.
inline std::vector<MarketDay> prepare_market(const std::vector<TradeTick>& ticks,
                                             const IngestSettings& st) {
    if (ticks.empty()) throw std::runtime_error("market proxy: no ticks");
    std::vector<MarketDay> days;
    int32_t lo = ny_time(ticks.front().at).day_number;
    int32_t hi = ny_time(ticks.back().at).day_number;
    lo = std::max(lo, st.sample_start);
    hi = std::min(hi, st.sample_end);
    for (int32_t d = lo; d <= hi; ++d) {
        if (!st.calendar.is_trading_day(d)) continue;
        std::vector<LocalTick> sess = detail::session_ticks(ticks, d, st.calendar, {});
        if (sess.empty()) continue;
        MarketDay md;
        md.day = d;
        md.open = sess.front().price;
        md.close = sess.back().price;
        auto sigma = realized_vol_session(sess, TradingCalendar::session_open(),
                                          st.calendar.session_close(d));
        md.sigma_rv = sigma ? *sigma : 0.0;
        days.push_back(md);
    }
    if (days.size() < 2) throw std::runtime_error("market proxy: fewer than two trading days");

    std::vector<double> on_returns(days.size() - 1), dly_returns(days.size() - 1);
    for (size_t i = 1; i < days.size(); ++i) {
        on_returns[i - 1] = raw_return(days[i - 1].close, days[i].open, ObsKind::overnight);
        dly_returns[i - 1] = daily_return(days[i - 1].close, days[i].close);
    }
    GjrFit on_fit = fit_gjr_garch(on_returns, false, std::min(st.min_vol_obs, on_returns.size()));
    GjrFit dly_fit = fit_gjr_garch(dly_returns, false, std::min(st.min_vol_obs, dly_returns.size()));
    if (!on_fit.converged || !dly_fit.converged)
        throw std::runtime_error("market proxy: volatility estimation failed");
    std::vector<double> on_sig = gjr_sigma_series(on_fit.params, on_returns, VolSeriesKind::overnight);
    std::vector<double> dly_sig = gjr_sigma_series(dly_fit.params, dly_returns, VolSeriesKind::daily);
    for (size_t i = 1; i < days.size(); ++i) {
        days[i].sigma_on = on_sig[i - 1];
        days[i].sigma_daily = dly_sig[i - 1];
    }
    return days;
}

// Full pipeline over all stocks. Throws when everything is filtered away,
// naming the first step that emptied the sample.
inline CleanData apply_filters(const RawData& raw, const IngestSettings& st, int workers = 1);

}  // namespace hfpanel

#include "parallel.hpp"

namespace hfpanel {

inline CleanData apply_filters(const RawData& raw, const IngestSettings& st, int workers) {
    CleanData out;
    out.market_ticker = raw.market_ticker;
    out.market = prepare_market(raw.market_ticks, st);

    std::vector<StockFilterResult> results(raw.stocks.size());
    parallel_for(raw.stocks.size(), workers, [&](size_t i) {
        results[i] = filter_stock(raw.stocks[i], st, raw.market_ticks);
    });

    std::array<uint64_t, 12> obs_total{};
    std::array<uint64_t, 12> sec_total{};
    for (const StockFilterResult& r : results)
        for (size_t s = 0; s < 12; ++s) {
            obs_total[s] += r.obs_after[s];
            sec_total[s] += r.obs_after[s] > 0 ? 1 : 0;
        }
    for (int s = 1; s <= 12; ++s)
        out.ledger.push_back({s, filter_step_name(s), obs_total[s - 1], sec_total[s - 1]});

    if (obs_total[11] == 0) {
        int first_empty = 1;
        for (int s = 0; s < 12; ++s)
            if (obs_total[s] == 0) {
                first_empty = s + 1;
                break;
            }
        throw std::runtime_error(std::string("all observations removed by filtering at step ") +
                                 std::to_string(first_empty) + " (" +
                                 filter_step_name(first_empty) + ")");
    }

    for (StockFilterResult& r : results) {
        if (r.clean.obs.empty()) continue;
        out.stocks.push_back(std::move(r.clean));
        for (VolEstimate& e : r.estimates) out.estimates.push_back(std::move(e));
    }
    return out;
}

}  // namespace hfpanel
