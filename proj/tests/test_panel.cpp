#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "hfpanel/panel.hpp"

using namespace hfpanel;

TEST_CASE("scaling factors") {
    CHECK(scaling_factor(ObsKind::intraday, 60.0) == 13.0);   // (60/60) * 6.5 * 2
    CHECK(scaling_factor(ObsKind::intraday, 65.0) == Catch::Approx(12.0).margin(1e-12));
    CHECK(scaling_factor(ObsKind::overnight) == 2.0);
    CHECK_THROWS(scaling_factor(ObsKind::intraday, 0.0));
    CHECK_THROWS(scaling_factor(ObsKind::intraday, 201.0));
    CHECK_NOTHROW(scaling_factor(ObsKind::intraday, 200.0));
}

TEST_CASE("holder changes use the plus-one guard and the interval scale") {
    // 99 -> 101 holders overnight: log(102/100) * 2
    CHECK(position_openings(99, 101, ObsKind::overnight) ==
          Catch::Approx(2.0 * std::log(1.02)).margin(1e-15));
    // 100 -> 102 holders over one hour: log(103/101) * 13
    CHECK(position_openings(100, 102, ObsKind::intraday, 60.0) ==
          Catch::Approx(13.0 * std::log(103.0 / 101.0)).margin(1e-15));
    CHECK(position_openings(0, 0, ObsKind::overnight) == 0.0);  // guard handles zero counts
    CHECK_THROWS(position_openings(-1, 5, ObsKind::overnight));

    CHECK(daily_change(200, 202) == Catch::Approx(std::log(203.0 / 201.0)).margin(1e-15));
    CHECK(daily_change(0, 0) == 0.0);
}

TEST_CASE("price returns scale the same way") {
    CHECK(raw_return(100.0, 101.0, ObsKind::intraday, 60.0) ==
          Catch::Approx(13.0 * std::log(1.01)).margin(1e-14));
    CHECK(raw_return(100.0, 101.0, ObsKind::overnight) ==
          Catch::Approx(2.0 * std::log(1.01)).margin(1e-15));
    CHECK(daily_return(100.0, 101.0) == Catch::Approx(std::log(1.01)).margin(1e-15));
    CHECK_THROWS(raw_return(0.0, 101.0, ObsKind::overnight));
    CHECK_THROWS(daily_return(100.0, -1.0));
}

TEST_CASE("last trade strictly before the observation") {
    std::vector<TradeTick> ticks = {{100, 10.0}, {200, 11.0}, {300, 12.0}};
    CHECK_FALSE(match_last_trade(ticks, 100).has_value());  // print at t does not count
    CHECK(*match_last_trade(ticks, 101) == 10.0);
    CHECK(*match_last_trade(ticks, 300) == 11.0);
    CHECK(*match_last_trade(ticks, 1000) == 12.0);
    CHECK_FALSE(match_last_trade({}, 50).has_value());
}

TEST_CASE("split adjustment divides by ratios of later splits") {
    std::vector<SplitEvent> splits = {{100, 2.0}, {200, 5.0}};
    CHECK(split_adjust(70.0, 50, splits) == Catch::Approx(7.0));    // both ahead
    CHECK(split_adjust(70.0, 100, splits) == Catch::Approx(14.0));  // split day itself is adjusted
    CHECK(split_adjust(70.0, 150, splits) == Catch::Approx(14.0));
    CHECK(split_adjust(70.0, 200, splits) == Catch::Approx(70.0));
    CHECK(split_adjust(70.0, 50, {}) == 70.0);
}

TEST_CASE("market capitalization forward-fills") {
    std::vector<std::pair<int32_t, double>> caps = {{100, 1e9}, {110, 2e9}};
    CHECK(cap_on_day(caps, 99) == 0.0);
    CHECK(cap_on_day(caps, 100) == 1e9);
    CHECK(cap_on_day(caps, 105) == 1e9);
    CHECK(cap_on_day(caps, 110) == 2e9);
    CHECK(cap_on_day(caps, 500) == 2e9);
}

namespace {

CleanData two_day_fixture() {
    CleanData data;
    CleanStock st;
    st.ticker = "AAA";
    st.sector = "Tech";
    // two hours on day 100, then the first hour of day 101
    st.obs = {{0 * kMicrosPerMin, 100, 100, 10.0},
              {60 * kMicrosPerMin, 100, 102, 10.1},
              {120 * kMicrosPerMin, 100, 101, 10.05},
              {1560 * kMicrosPerMin, 101, 103, 10.2}};
    st.mkt_price = {400.0, 402.0, 0.0, 403.0};  // one missing market quote
    st.caps = {{100, 5e9}};
    data.stocks.push_back(std::move(st));
    data.market = {{100, 399.0, 401.0, 0.01, 0.0, 0.0}, {101, 402.5, 403.5, 0.011, 0.009, 0.012}};
    data.market_ticker = "MKT";
    return data;
}

}  // namespace

TEST_CASE("panel rows pair consecutive observations") {
    CleanData data = two_day_fixture();
    Panel panel = build_panel(data);

    REQUIRE(panel.stocks.size() == 1);
    REQUIRE(panel.rows.size() == 3);
    CHECK(panel.sectors == std::vector<std::string>{"Tech"});
    CHECK(panel.stocks[0].first_row == 0);
    CHECK(panel.stocks[0].n_rows == 3);

    const PanelRow& r0 = panel.rows[0];
    CHECK(r0.kind == ObsKind::intraday);
    CHECK(r0.mnt == Catch::Approx(60.0));
    CHECK(r0.obs_idx == 1);
    CHECK(r0.slot == 0);
    CHECK(r0.delta_n == Catch::Approx(13.0 * std::log(103.0 / 101.0)).margin(1e-14));
    CHECK(r0.raw_return == Catch::Approx(13.0 * std::log(10.1 / 10.0)).margin(1e-14));
    CHECK(r0.mkt_raw == Catch::Approx(13.0 * std::log(402.0 / 400.0)).margin(1e-14));
    CHECK(std::isnan(r0.std_return));
    CHECK(r0.market_cap == 5e9);
    CHECK(r0.day == 100);

    const PanelRow& r1 = panel.rows[1];
    CHECK(r1.kind == ObsKind::intraday);
    CHECK(r1.delta_n == Catch::Approx(13.0 * std::log(102.0 / 103.0)).margin(1e-14));
    CHECK(std::isnan(r1.mkt_raw));  // missing market quote at the right endpoint

    const PanelRow& r2 = panel.rows[2];
    CHECK(r2.kind == ObsKind::overnight);
    CHECK(r2.obs_idx == 3);
    CHECK(r2.day == 101);
    CHECK(r2.delta_n == Catch::Approx(2.0 * std::log(104.0 / 102.0)).margin(1e-14));
    CHECK(r2.raw_return == Catch::Approx(2.0 * std::log(10.2 / 10.05)).margin(1e-14));
    CHECK(std::isnan(r2.mkt_raw));  // missing quote at the left endpoint
}

TEST_CASE("log holder detrending recovers an exact linear trend") {
    // holders + 1 = 2^j at one-day spacing: slope is log(2) per day, residuals 0
    std::vector<int64_t> holders;
    std::vector<UtcMicros> times;
    for (int j = 0; j < 6; ++j) {
        holders.push_back((1ll << j) - 1);
        times.push_back(static_cast<UtcMicros>(j) * kMicrosPerDay);
    }
    DetrendResult dt = detrend_log_holders(holders, times);
    CHECK(dt.slope == Catch::Approx(std::log(2.0)).margin(1e-12));
    for (double r : dt.residuals) CHECK(r == Catch::Approx(0.0).margin(1e-12));
    CHECK_THROWS(detrend_log_holders(std::vector<int64_t>{5}, std::vector<UtcMicros>{0}));
}

TEST_CASE("finalize removes the trend component and winsorizes the dependents") {
    CleanData data;
    CleanStock st;
    st.ticker = "TTT";
    st.sector = "Tech";
    for (int j = 0; j < 8; ++j)
        st.obs.push_back({static_cast<UtcMicros>(j) * kMicrosPerDay, 100 + j, (1ll << j) - 1,
                          50.0 + j});
    st.mkt_price.assign(8, 100.0);
    data.stocks.push_back(std::move(st));
    data.market_ticker = "MKT";

    Panel panel = build_panel(data);
    REQUIRE(panel.rows.size() == 7);
    finalize_panel(panel, data);
    for (const PanelRow& r : panel.rows) {
        CHECK(r.delta_n_detrended == Catch::Approx(0.0).margin(1e-11));
        // pure-trend delta_n is the same for every row, so winsorizing is a no-op
        CHECK(r.delta_n == Catch::Approx(2.0 * std::log(2.0)).margin(1e-12));
    }
}

TEST_CASE("winsorization clips the pooled tails of the dependent") {
    CleanData data;
    CleanStock st;
    st.ticker = "WWW";
    st.sector = "Tech";
    // holder counts with one extreme jump in the middle
    int64_t h = 10000;
    for (int j = 0; j < 400; ++j) {
        if (j == 200) h *= 3;       // the outlier interval
        else h += (j % 2) ? 7 : -3;
        st.obs.push_back({static_cast<UtcMicros>(j) * kMicrosPerDay, 100 + j, h, 50.0});
    }
    st.mkt_price.assign(st.obs.size(), 100.0);
    data.stocks.push_back(std::move(st));

    Panel panel = build_panel(data);
    std::vector<double> before;
    for (const PanelRow& r : panel.rows) before.push_back(r.delta_n);
    WinsorBounds b = winsor_bounds(before, 0.5, 99.5);

    finalize_panel(panel, data);
    double max_after = -1e300;
    for (const PanelRow& r : panel.rows) {
        CHECK(r.delta_n >= b.lo);
        CHECK(r.delta_n <= b.hi);
        max_after = std::max(max_after, r.delta_n);
    }
    CHECK(max_after == Catch::Approx(b.hi).margin(1e-12));  // the outlier was clipped to the bound
}

TEST_CASE("daily panel pairs the last observation of consecutive kept days") {
    CleanData data = two_day_fixture();
    DailyPanel dp = build_daily_panel(data);
    REQUIRE(dp.rows.size() == 1);
    const DailyRow& r = dp.rows[0];
    CHECK(r.day_prev == 100);
    CHECK(r.day == 101);
    CHECK(r.n_prev == 101);  // last reading of day 100
    CHECK(r.n_curr == 103);
    CHECK(r.delta_n == Catch::Approx(std::log(104.0 / 102.0)).margin(1e-14));
    CHECK(r.raw_return == Catch::Approx(std::log(10.2 / 10.05)).margin(1e-14));
    // market leg from market close to close
    CHECK(r.mkt_raw == Catch::Approx(std::log(403.5 / 401.0)).margin(1e-14));
    CHECK(r.market_cap == 5e9);
}

TEST_CASE("panel summary splits by interval kind") {
    CleanData data = two_day_fixture();
    Panel panel = build_panel(data);  // unwinsorized: tiny samples would clip visibly
    std::vector<SummaryRow> rows = summarize_panel(panel);
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].series == "delta_n_bps");
    CHECK(rows[0].sample == "intraday");
    CHECK(rows[0].n_obs == 2);
    CHECK(rows[1].sample == "overnight");
    CHECK(rows[1].n_obs == 1);
    CHECK(rows[2].sample == "all");
    CHECK(rows[2].n_obs == 3);
    // standardized returns are still NaN, so those samples are empty
    CHECK(rows[3].n_obs == 0);
    CHECK(rows[5].n_obs == 0);
    // bps units: mean of the intraday delta_n rows
    double d0 = 13.0 * std::log(103.0 / 101.0) * 1e4;
    double d1 = 13.0 * std::log(102.0 / 103.0) * 1e4;
    CHECK(rows[0].mean == Catch::Approx(0.5 * (d0 + d1)).margin(1e-8));
}
