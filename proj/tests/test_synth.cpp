#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "hfpanel/config.hpp"
#include "hfpanel/csv.hpp"
#include "hfpanel/grouping.hpp"
#include "hfpanel/ingest.hpp"
#include "hfpanel/io.hpp"
#include "hfpanel/panel.hpp"
#include "hfpanel/standardize.hpp"
#include "hfpanel/stats.hpp"
#include "hfpanel/synth.hpp"
#include "hfpanel/time.hpp"
#include "hfpanel/volatility.hpp"

using namespace hfpanel;

namespace {

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("hfpanel_synth_test_" + std::to_string(counter.fetch_add(1)));
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

// Small generator setup that keeps every stock through its own pipeline pass.
DgpConfig small_dgp() {
    DgpConfig cfg;
    cfg.n_stocks = 4;
    cfg.n_days = 60;
    cfg.min_vol_obs = 30;
    cfg.seed = 7;
    return cfg;
}

}  // namespace

TEST_CASE("deterministic random streams") {
    SECTION("identical seeds give identical draws") {
        Rng a(42), b(42);
        for (int i = 0; i < 100; ++i) {
            CHECK(a.uniform() == b.uniform());
            CHECK(a.normal() == b.normal());
        }
    }
    SECTION("uniform draws live in [0, 1)") {
        Rng r(1);
        for (int i = 0; i < 1000; ++i) {
            double u = r.uniform();
            CHECK(u >= 0.0);
            CHECK(u < 1.0);
        }
    }
    SECTION("substreams are distinct but reproducible") {
        Rng a = Rng::substream(7, 0);
        Rng b = Rng::substream(7, 1);
        Rng a2 = Rng::substream(7, 0);
        double ua = a.uniform();
        CHECK(ua != b.uniform());
        CHECK(ua == a2.uniform());
    }
    SECTION("splitmix64 is a pure function of its state") {
        uint64_t s1 = 99, s2 = 99;
        CHECK(splitmix64(s1) == splitmix64(s2));
        CHECK(s1 == s2);
        CHECK(splitmix64(s1) != splitmix64(s2) + 1);  // state advanced identically
    }
    SECTION("normal draws have roughly standard moments") {
        Rng r(2024);
        KahanSum sum, sumsq;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            double z = r.normal();
            sum.add(z);
            sumsq.add(z * z);
        }
        CHECK(sum.value() / n == Catch::Approx(0.0).margin(0.03));
        CHECK(sumsq.value() / n == Catch::Approx(1.0).margin(0.05));
    }
}

TEST_CASE("oracle matrix inverse") {
    // [[4,7],[2,6]] has determinant 10
    std::vector<long double> a = {4.0L, 7.0L, 2.0L, 6.0L};
    std::vector<long double> inv = oracle::invert(a, 2);
    CHECK(static_cast<double>(inv[0]) == Catch::Approx(0.6).margin(1e-15));
    CHECK(static_cast<double>(inv[1]) == Catch::Approx(-0.7).margin(1e-15));
    CHECK(static_cast<double>(inv[2]) == Catch::Approx(-0.2).margin(1e-15));
    CHECK(static_cast<double>(inv[3]) == Catch::Approx(0.4).margin(1e-15));

    CHECK_THROWS_WITH(oracle::invert({1.0L, 2.0L, 2.0L, 4.0L}, 2),
                      Catch::Matchers::ContainsSubstring("singular"));
}

TEST_CASE("oracle least squares recovers an exact system") {
    std::vector<std::vector<double>> X = {{1, 0}, {0, 2}, {1, 1}, {1, 3}};
    std::vector<double> beta_true = {2.0, -1.0};
    std::vector<double> y;
    for (const auto& row : X) y.push_back(beta_true[0] * row[0] + beta_true[1] * row[1]);
    std::vector<double> beta = oracle::ols(X, y);
    REQUIRE(beta.size() == 2);
    CHECK(beta[0] == Catch::Approx(2.0).margin(1e-13));
    CHECK(beta[1] == Catch::Approx(-1.0).margin(1e-13));
    CHECK_THROWS(oracle::ols({}, {}));
    CHECK_THROWS(oracle::ols(X, {1.0}));
}

TEST_CASE("oracle cluster covariance") {
    SECTION("zero residuals mean zero covariance") {
        std::vector<std::vector<double>> X = {{1, 0}, {0, 1}, {1, 1}, {2, 1}};
        std::vector<double> y = {3, -1, 2, 5};  // exactly 3*x1 - x2
        Mat v = oracle::cluster_cov(X, y, {0, 0, 1, 1}, true);
        for (size_t i = 0; i < 2; ++i)
            for (size_t j = 0; j < 2; ++j)
                CHECK(std::fabs(v.at(i, j)) < 1e-20);
    }
    SECTION("hand-computed intercept-only case") {
        // beta = mean(y) = 3; cluster scores -2 and +2; bread = 1/4
        std::vector<std::vector<double>> X = {{1}, {1}, {1}, {1}};
        std::vector<double> y = {1, 3, 2, 6};
        Mat plain = oracle::cluster_cov(X, y, {0, 0, 1, 1}, false);
        CHECK(plain.at(0, 0) == Catch::Approx(0.5).margin(1e-15));
        // G/(G-1) * (N-1)/(N-K) = 2 * 1 doubles it
        Mat adj = oracle::cluster_cov(X, y, {0, 0, 1, 1}, true);
        CHECK(adj.at(0, 0) == Catch::Approx(1.0).margin(1e-15));
    }
}

TEST_CASE("oracle quantile mirrors the production quantile") {
    std::vector<double> xs(100);
    for (int i = 0; i < 100; ++i) xs[static_cast<size_t>(i)] = i + 1.0;
    CHECK(oracle::quantile(xs, 0.25) == 25.75);

    Rng r(5);
    std::vector<double> noise;
    for (int i = 0; i < 257; ++i) noise.push_back(r.normal());
    for (double p : {0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0})
        CHECK(oracle::quantile(noise, p) == Catch::Approx(quantile(noise, p)).margin(1e-12));
    CHECK_THROWS(oracle::quantile({}, 0.5));
}

TEST_CASE("oracle variance recursion mirrors production") {
    GjrParams p{0.1, 0.05, 0.1, 0.8, 0.02};
    std::vector<double> returns = {1.0, -1.1, 0.97, 0.5, -0.25};
    double v0 = p.uncond_var();
    CHECK(v0 == Catch::Approx(1.0).margin(1e-15));  // 0.1 / (1 - 0.05 - 0.8 - 0.05)

    std::vector<double> prod = gjr_variance_recursion(p, returns, v0);
    std::vector<double> orac = oracle::gjr_recursion(p, returns, v0);
    REQUIRE(prod.size() == orac.size());
    for (size_t t = 0; t < prod.size(); ++t)
        CHECK(prod[t] == Catch::Approx(orac[t]).margin(1e-12));

    // frozen first steps: eps_1 = 0.98 (positive), eps_2 = -1.12 (negative arm)
    CHECK(orac[1] == Catch::Approx(0.1 + 0.05 * 0.98 * 0.98 + 0.8 * 1.0).margin(1e-12));
    CHECK(orac[2] ==
          Catch::Approx(0.1 + 0.15 * 1.12 * 1.12 + 0.8 * orac[1]).margin(1e-12));
}

TEST_CASE("generator configuration validation") {
    CHECK_NOTHROW(small_dgp().validate());

    DgpConfig c = small_dgp();
    c.n_days = 5;
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("too small"));

    c = small_dgp();
    c.overnight_gjr.beta = 0.95;  // alpha 0.06 + beta 0.95 >= 1
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("overnight"));

    c = small_dgp();
    c.market_gjr.omega = 0.0;
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("market"));

    c = small_dgp();
    c.session_sd_hi = c.session_sd_lo / 2.0;
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("bad volatility"));

    c = small_dgp();
    c.snapshot_hours.clear();
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("bad sampling"));

    c = small_dgp();
    c.delay_minutes = 0;
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("delay"));

    c = small_dgp();
    c.effect[2][3] = std::nan("");
    CHECK_THROWS_WITH(c.validate(), Catch::Matchers::ContainsSubstring("non-finite effect"));
}

TEST_CASE("generator configuration from key-value settings") {
    DgpConfig dflt;
    Config cfg = Config::from_string(
        "dgp_stocks = 7\n"
        "dgp_days = 30\n"
        "dgp_seed = 99\n"
        "dgp_start = 2020-01-06\n"
        "dgp_trend_per_day = 0.001\n"
        "dgp_noise_sd = 0.01\n"
        "dgp_boundary_multiplier = 0.5\n"
        "delay_minutes = 30\n"
        "min_vol_obs = 50\n"
        "dgp_effect_lag0_g1 = 0.5\n"
        "dgp_effect_lag5_g6 = 0.125\n");
    DgpConfig d = DgpConfig::from_config(cfg);
    CHECK(d.n_stocks == 7);
    CHECK(d.n_days == 30);
    CHECK(d.seed == 99);
    CHECK(d.start_day == days_from_civil(2020, 1, 6));
    CHECK(d.trend_per_day == 0.001);
    CHECK(d.noise_sd == 0.01);
    CHECK(d.boundary_multiplier == 0.5);
    CHECK(d.delay_minutes == 30);
    CHECK(d.min_vol_obs == 50);
    CHECK(d.effect[0][0] == 0.5);
    CHECK(d.effect[5][5] == 0.125);
    CHECK(d.effect[1][1] == dflt.effect[1][1]);  // untouched entries keep defaults
    CHECK(d.base_holders == dflt.base_holders);

    CHECK_THROWS_WITH(DgpConfig::from_config(Config::from_string("dgp_start = soon\n")),
                      Catch::Matchers::ContainsSubstring("bad dgp_start"));
}

TEST_CASE("generated sample aligns its truth manifest with the production panel") {
    DgpConfig cfg = small_dgp();
    SynthResult res = generate_dgp(cfg);

    REQUIRE(res.raw.stocks.size() == 4);
    CHECK(res.raw.market_ticker == "MKT");
    CHECK_FALSE(res.raw.market_ticks.empty());
    CHECK(res.first_day == days_from_civil(2021, 1, 4));
    CHECK(res.last_day > res.first_day);
    CHECK(res.boundary_day > res.first_day);
    CHECK(res.boundary_day < res.last_day);

    // the stated keys identify rows uniquely
    std::set<std::pair<std::string, UtcMicros>> keys;
    for (const TruthRow& t : res.truth) {
        CHECK(t.group >= 0);
        CHECK(t.group < 6);
        CHECK(std::isfinite(t.mu));
        CHECK(keys.emplace(t.ticker, t.t_curr).second);
    }

    // holder counts stayed positive and non-constant for every stock
    for (const RawStock& st : res.raw.stocks) {
        int64_t lo = st.snaps.front().holders, hi = lo;
        for (const RawSnapshot& s : st.snaps) {
            lo = std::min(lo, s.holders);
            hi = std::max(hi, s.holders);
        }
        CHECK(lo > 0);
        CHECK(hi > lo);
    }

    // replaying the production pipeline on the generated raw data reproduces
    // the truth manifest row for row (same survivors, same kinds, same groups)
    CleanData clean = apply_filters(res.raw, res.settings, 1);
    Panel panel = build_panel(clean);
    finalize_panel(panel, clean);
    fill_std_returns(panel, clean);
    assign_panel_groups(panel);
    REQUIRE(panel.rows.size() == res.truth.size());
    size_t i = 0;
    for (const StockInfo& info : panel.stocks) {
        for (size_t k = 0; k < info.n_rows; ++k, ++i) {
            const PanelRow& row = panel.rows[info.first_row + k];
            const TruthRow& t = res.truth[i];
            REQUIRE(t.ticker == info.ticker);
            REQUIRE(t.t_curr == row.t_curr);
            CHECK(t.kind == row.kind);
            CHECK(t.group == row.group);
        }
    }

    // injected parameters are all on the record
    auto param = [&](const std::string& key) {
        for (const auto& [k, v] : res.params)
            if (k == key) return v;
        throw std::runtime_error("missing param " + key);
    };
    CHECK(param("seed") == "7");
    CHECK(param("n_stocks") == "4");
    CHECK(param("effect_lag0_g1") == fmt_double(cfg.effect[0][0]));
    CHECK(param("boundary_day") == format_date(res.boundary_day));
}

TEST_CASE("generator files round-trip") {
    DgpConfig cfg = small_dgp();
    SynthResult res = generate_dgp(cfg);
    TempDir tmp;
    write_dgp_files(res, tmp.path);

    for (const char* name : {"snapshots.csv", "ticks.csv", "metadata.csv", "splits.csv",
                             "caps.csv", "truth.tsv", "truth_params.txt", "pipeline.cfg"})
        CHECK(std::filesystem::exists(tmp.path / name));

    SECTION("csv headers and first rows") {
        std::vector<std::string> snap_lines;
        for_each_line((tmp.path / "snapshots.csv").string(),
                      [&](size_t, std::string_view l) {
                          if (snap_lines.size() < 2) snap_lines.emplace_back(l);
                      });
        REQUIRE(snap_lines.size() == 2);
        CHECK(snap_lines[0] == "ticker,timestamp,users_holding");
        auto f = split_any(snap_lines[1], ',');
        REQUIRE(f.size() == 3);
        CHECK(f[0] == res.raw.stocks[0].ticker);
        CHECK(parse_int(f[2]).value() == res.raw.stocks[0].snaps[0].holders);

        std::vector<std::string> tick_lines;
        for_each_line((tmp.path / "ticks.csv").string(), [&](size_t, std::string_view l) {
            if (tick_lines.size() < 2) tick_lines.emplace_back(l);
        });
        CHECK(tick_lines[0] == "ticker,timestamp,price,exchange");
        auto tf = split_any(tick_lines[1], ',');
        REQUIRE(tf.size() == 4);
        // shortest round-trip formatting: the written price is bit-identical
        CHECK(parse_double(tf[2]).value() == res.raw.stocks[0].ticks[0].price);
    }

    SECTION("truth table round-trips the conditional means") {
        TextTable t = read_table(tmp.path / "truth.tsv");
        REQUIRE(t.rows.size() == res.truth.size());
        size_t mu_col = t.column("mu");
        size_t tick_col = t.column("ticker");
        size_t time_col = t.column("t_curr_us");
        for (size_t i : {size_t{0}, t.rows.size() / 2, t.rows.size() - 1}) {
            CHECK(t.rows[i][tick_col] == res.truth[i].ticker);
            CHECK(parse_int(t.rows[i][time_col]).value() == res.truth[i].t_curr);
            CHECK(parse_double(t.rows[i][mu_col]).value() == res.truth[i].mu);
        }
    }

    SECTION("emitted stage configuration reproduces the generator's settings") {
        Config pc = Config::from_file((tmp.path / "pipeline.cfg").string());
        CHECK(pc.get_str("snapshots", "") == "snapshots.csv");
        CHECK(pc.get_str("ticks", "") == "ticks.csv");
        CHECK(pc.get_str("metadata", "") == "metadata.csv");
        CHECK(pc.get_str("splits", "") == "splits.csv");
        CHECK(pc.get_str("caps", "") == "caps.csv");
        CHECK(pc.get_str("market_ticker", "") == "MKT");
        CHECK(pc.get_date("boundary_date", 0) == res.boundary_day);
        IngestSettings st = IngestSettings::from_config(pc);
        CHECK(st.delay_minutes == res.settings.delay_minutes);
        CHECK(st.sample_start == res.settings.sample_start);
        CHECK(st.sample_end == res.settings.sample_end);
        CHECK(st.min_vol_obs == res.settings.min_vol_obs);
    }

    SECTION("parameter manifest reads back") {
        KvPairs params = read_kv(tmp.path / "truth_params.txt");
        CHECK(params == res.params);
    }
}
