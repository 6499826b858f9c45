#pragma once
// Synthetic data-generating process and brute-force oracles.
//
// The generator simulates per-stock price paths (geometric diffusion within
// the session, an asymmetric-GARCH-driven gap overnight), runs the real
// cleaning/matching/volatility/grouping code over those prices to learn which
// observations survive and which response group each reading lands in, then
// draws holder counts whose conditional mean follows a configured per-lag
// group-effect profile plus trend.  The truth manifest records that mean for
// every holdings change, so a fit of the mean column through the production
// estimator gives the exact finite-sample target the noisy fit must recover.
//
// Counts are integers: each target log change is applied to holders+1 and
// rounded, so realized changes differ from the target by a quantization error
// that is orders of magnitude below the injected noise.
//
// The oracles at the bottom re-derive production results by direct summation
// (long double, explicit inverses) for use in tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hfpanel/config.hpp"
#include "hfpanel/csv.hpp"
#include "hfpanel/grouping.hpp"
#include "hfpanel/ingest.hpp"
#include "hfpanel/io.hpp"
#include "hfpanel/linalg.hpp"
#include "hfpanel/panel.hpp"
#include "hfpanel/standardize.hpp"
#include "hfpanel/time.hpp"
#include "hfpanel/types.hpp"
#include "hfpanel/volatility.hpp"

namespace hfpanel {

// ---- deterministic RNG -------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// mt19937_64 with explicit uniform/normal transforms: the standard pins the
// engine's output sequence, and doing our own Box-Muller keeps the stream
// identical across standard-library implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Independent deterministic stream (seed, stream) -> engine seed.
    static Rng substream(uint64_t seed, uint64_t stream) {
        uint64_t s = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
        return Rng(splitmix64(s));
    }

    double uniform() {  // [0, 1)
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double t = 2.0 * 3.141592653589793238462643383279502884 * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// ---- configuration ------------------------------------------------------

inline const std::array<const char*, 11>& gics_sectors() {
    static const std::array<const char*, 11> k = {
        "Energy",      "Materials",  "Industrials",            "Consumer Discretionary",
        "Consumer Staples", "Health Care", "Financials",       "Information Technology",
        "Communication Services", "Utilities", "Real Estate"};
    return k;
}

struct DgpConfig {
    int n_stocks = 200;
    int n_days = 250;
    uint64_t seed = 20210104ull;
    int32_t start_day = 0;  // first candidate calendar day; 0 -> 2021-01-04

    // True per-lag, per-group effects on the holdings change, daily log units.
    // effect[j][g] is the contribution of the reading j observations back
    // landing in group g+1.
    std::array<std::array<double, 6>, 6> effect = {{
        {{0.0150, 0.0040, 0.0010, 0.0015, 0.0045, 0.0090}},
        {{0.0120, 0.0030, 0.0008, 0.0012, 0.0035, 0.0060}},
        {{0.0060, 0.0015, 0.0005, 0.0006, 0.0018, 0.0030}},
        {{0.0030, 0.0008, 0.0002, 0.0003, 0.0009, 0.0015}},
        {{0.0015, 0.0004, 0.0001, 0.0002, 0.0005, 0.0008}},
        {{0.0008, 0.0002, 0.0000, 0.0001, 0.0002, 0.0004}},
    }};
    double trend_per_day = 2e-4;  // deterministic drift of log holders
    double noise_sd = 0.05;      // sd of the holdings-change disturbance

    // Effects after the regime boundary are scaled by this factor (1 = no
    // regime change); the boundary defaults to the middle of the sample.
    double boundary_multiplier = 1.0;

    // Price processes.
    double session_sd_lo = 0.008;  // per-stock full-session diffusion sd range
    double session_sd_hi = 0.020;
    GjrParams overnight_gjr{5.76e-6, 0.06, 0.08, 0.86, 0.0};
    double market_session_sd = 0.010;
    GjrParams market_gjr{2.5e-6, 0.05, 0.06, 0.88, 0.0};
    int tick_step_min = 5;         // stock tick spacing within the session
    int market_tick_step_min = 1;  // market proxy tick spacing

    std::vector<int> snapshot_hours = {10, 11, 12, 13, 14, 15};  // NY clock
    int delay_minutes = 45;
    size_t min_vol_obs = kMinVolObs;

    int64_t base_holders = 8000;

    void validate() const {
        if (n_stocks < 1 || n_days < 10) throw std::invalid_argument("dgp: too small");
        auto check_gjr = [](const GjrParams& p, const char* what) {
            if (!(p.omega > 0.0) || p.alpha < 0.0 || p.beta < 0.0 || p.alpha + p.gamma < 0.0 ||
                p.persistence() >= 1.0)
                throw std::invalid_argument(std::string("dgp: non-stationary ") + what +
                                            " variance process");
        };
        check_gjr(overnight_gjr, "overnight");
        check_gjr(market_gjr, "market");
        if (noise_sd < 0.0 || session_sd_lo <= 0.0 || session_sd_hi < session_sd_lo)
            throw std::invalid_argument("dgp: bad volatility settings");
        if (snapshot_hours.empty() || tick_step_min <= 0 || market_tick_step_min <= 0)
            throw std::invalid_argument("dgp: bad sampling settings");
        for (const auto& row : effect)
            for (double v : row)
                if (!std::isfinite(v)) throw std::invalid_argument("dgp: non-finite effect");
        if (delay_minutes <= 0) throw std::invalid_argument("dgp: delay must be positive");
    }

    static DgpConfig from_config(const Config& cfg) {
        DgpConfig d;
        d.n_stocks = static_cast<int>(cfg.get_int("dgp_stocks", d.n_stocks));
        d.n_days = static_cast<int>(cfg.get_int("dgp_days", d.n_days));
        d.seed = static_cast<uint64_t>(cfg.get_int("dgp_seed", static_cast<int64_t>(d.seed)));
        if (cfg.has("dgp_start")) {
            auto day = parse_date(cfg.require_str("dgp_start"));
            if (!day) throw std::runtime_error("dgp: bad dgp_start");
            d.start_day = *day;
        }
        d.trend_per_day = cfg.get_double("dgp_trend_per_day", d.trend_per_day);
        d.noise_sd = cfg.get_double("dgp_noise_sd", d.noise_sd);
        d.boundary_multiplier = cfg.get_double("dgp_boundary_multiplier", d.boundary_multiplier);
        d.delay_minutes = static_cast<int>(cfg.get_int("delay_minutes", d.delay_minutes));
        d.min_vol_obs =
            static_cast<size_t>(cfg.get_int("min_vol_obs", static_cast<int64_t>(d.min_vol_obs)));
        for (int j = 0; j < 6; ++j)
            for (int g = 0; g < 6; ++g) {
                std::string key =
                    "dgp_effect_lag" + std::to_string(j) + "_g" + std::to_string(g + 1);
                d.effect[static_cast<size_t>(j)][static_cast<size_t>(g)] =
                    cfg.get_double(key, d.effect[static_cast<size_t>(j)][static_cast<size_t>(g)]);
            }
        return d;
    }
};

// True conditional mean of one holdings change, keyed for joining back onto
// pipeline rows: (ticker, t_curr in adjusted UTC micros) is unique.
struct TruthRow {
    std::string ticker;
    UtcMicros t_curr = 0;
    int32_t slot = 0;
    ObsKind kind = ObsKind::intraday;
    int group = -1;  // generator-side group of the current reading
    double mu = 0.0;  // full conditional mean: effects + regime scale + trend
};

struct SynthResult {
    RawData raw;                 // ready for apply_filters / file export
    std::vector<TruthRow> truth;  // one per holdings change, stock-major
    IngestSettings settings;      // the settings the generator itself used
    Config pipeline_cfg;          // equivalent file-based stage configuration
    KvPairs params;               // every injected parameter, for the manifest
    int32_t first_day = 0;
    int32_t last_day = 0;
    int32_t boundary_day = 0;    // regime boundary (middle of the sample)
};

namespace detail {

// One stock's simulated session ticks over all days, log-price driven.
inline void simulate_price_path(Rng& rng, const std::vector<int32_t>& days,
                                const TradingCalendar& cal, double session_sd,
                                const GjrParams& gjr, int tick_step_min, double p0,
                                std::vector<TradeTick>& out) {
    const double steps_full = kSessionHours * 60.0 / tick_step_min;  // 78 at 5 min
    const double tick_sd = session_sd / std::sqrt(steps_full);
    double log_p = std::log(p0);
    double var = gjr.uncond_var();
    bool first = true;
    for (int32_t day : days) {
        if (!first) {
            double gap = std::sqrt(var) * rng.normal();
            log_p += gap;
            double arch = gjr.alpha + (gap < 0.0 ? gjr.gamma : 0.0);
            var = gjr.omega + arch * gap * gap + gjr.beta * var;
        }
        first = false;
        CivilDate date = civil_from_days(day);
        int64_t close_tod = cal.session_close(day);
        for (int64_t tod = TradingCalendar::session_open(); tod <= close_tod;
             tod += static_cast<int64_t>(tick_step_min) * kMicrosPerMin) {
            if (tod != TradingCalendar::session_open()) log_p += tick_sd * rng.normal();
            int hour = static_cast<int>(tod / kMicrosPerHour);
            int minute = static_cast<int>((tod % kMicrosPerHour) / kMicrosPerMin);
            out.push_back({utc_from_ny(date, hour, minute), std::exp(log_p)});
        }
    }
}

}  // namespace detail

inline SynthResult generate_dgp(const DgpConfig& cfg) {
    cfg.validate();
    SynthResult res;
    TradingCalendar cal = TradingCalendar::usual();

    // Trading days covered by the sample.
    int32_t probe = cfg.start_day != 0 ? cfg.start_day : *parse_date("2021-01-04");
    std::vector<int32_t> days;
    while (static_cast<int>(days.size()) < cfg.n_days) {
        if (cal.is_trading_day(probe)) days.push_back(probe);
        ++probe;
        if (probe - days.front() > 4 * cfg.n_days + 400)
            throw std::runtime_error("dgp: calendar walk failed");
    }
    res.first_day = days.front();
    res.last_day = days.back();
    res.boundary_day = days[days.size() / 2];

    // Market proxy: denser ticks, its own variance process.
    res.raw.market_ticker = "MKT";
    {
        Rng rng = Rng::substream(cfg.seed, 2 * static_cast<uint64_t>(cfg.n_stocks));
        detail::simulate_price_path(rng, days, cal, cfg.market_session_sd, cfg.market_gjr,
                                    cfg.market_tick_step_min, 400.0, res.raw.market_ticks);
    }

    // Stocks: prices now, holder counts after the pipeline pass.
    const int64_t delay_us = static_cast<int64_t>(cfg.delay_minutes) * kMicrosPerMin;
    res.raw.stocks.resize(static_cast<size_t>(cfg.n_stocks));
    for (int i = 0; i < cfg.n_stocks; ++i) {
        RawStock& st = res.raw.stocks[static_cast<size_t>(i)];
        char name[16];
        std::snprintf(name, sizeof name, "S%04d", i + 1);
        st.ticker = name;
        st.meta.ticker = st.ticker;
        st.meta.share_code = i % 2 == 0 ? 10 : 11;
        st.meta.sector = gics_sectors()[static_cast<size_t>(i) % gics_sectors().size()];
        st.meta.dual_class = false;
        st.has_meta = true;
        double cap_base = i % 3 == 0 ? 1e9 : (i % 3 == 1 ? 5e9 : 2e10);
        st.caps.emplace_back(days.front(), cap_base * (1.0 + i / 500.0));

        Rng price_rng = Rng::substream(cfg.seed, 2 * static_cast<uint64_t>(i));
        double frac = cfg.n_stocks > 1 ? static_cast<double>(i) / (cfg.n_stocks - 1) : 0.0;
        double session_sd = cfg.session_sd_lo + (cfg.session_sd_hi - cfg.session_sd_lo) * frac;
        detail::simulate_price_path(price_rng, days, cal, session_sd, cfg.overnight_gjr,
                                    cfg.tick_step_min, 100.0 * (1.0 + i / 37.0), st.ticks);

        // Placeholder counts: non-constant so the generator's own pipeline
        // pass keeps every stock; real counts are assigned below.
        for (int32_t day : days) {
            CivilDate date = civil_from_days(day);
            for (size_t h = 0; h < cfg.snapshot_hours.size(); ++h) {
                UtcMicros adjusted = utc_from_ny(date, cfg.snapshot_hours[h], 0);
                st.snaps.push_back({adjusted + delay_us, 1000 + static_cast<int64_t>(h % 7)});
            }
        }
    }

    // Generator-side pipeline pass: exactly the code the estimation side
    // runs, so survival, matched prices, volatilities, and groups coincide.
    res.settings.delay_minutes = cfg.delay_minutes;
    res.settings.sample_start = days.front();
    res.settings.sample_end = days.back();
    res.settings.min_vol_obs = cfg.min_vol_obs;
    res.settings.calendar = cal;

    CleanData clean = apply_filters(res.raw, res.settings, 1);
    if (clean.stocks.size() != static_cast<size_t>(cfg.n_stocks))
        throw std::runtime_error("dgp: configuration eliminates stocks in its own pipeline pass");
    Panel panel = build_panel(clean);
    finalize_panel(panel, clean);
    fill_std_returns(panel, clean);
    assign_panel_groups(panel);

    // Draw holder counts along each stock's surviving observation sequence.
    const double day_us = static_cast<double>(kMicrosPerDay);
    for (size_t s = 0; s < panel.stocks.size(); ++s) {
        const StockInfo& info = panel.stocks[s];
        const CleanStock& cs = clean.stocks[s];
        RawStock& st = res.raw.stocks[s];
        if (info.ticker != st.ticker || cs.ticker != st.ticker)
            throw std::logic_error("dgp: stock order mismatch");

        Rng count_rng = Rng::substream(cfg.seed, 2 * s + 1);
        std::vector<int64_t> counts(cs.obs.size(), 0);
        counts[0] = cfg.base_holders + 37 * static_cast<int64_t>(s);

        std::span<const PanelRow> rows(panel.rows.data() + info.first_row, info.n_rows);
        for (size_t k = 0; k < rows.size(); ++k) {
            const PanelRow& row = rows[k];
            if (row.obs_idx != static_cast<int32_t>(k) + 1)
                throw std::logic_error("dgp: non-contiguous observation rows");
            double scale = row.day >= res.boundary_day ? cfg.boundary_multiplier : 1.0;
            double mu = 0.0;
            for (size_t j = 0; j <= std::min<size_t>(k, 5); ++j) {
                int g = rows[k - j].group;
                if (g < 0) throw std::logic_error("dgp: ungrouped observation");
                mu += cfg.effect[j][static_cast<size_t>(g)];
            }
            mu *= scale;
            double sf = scaling_factor(row.kind, row.mnt);
            mu += cfg.trend_per_day * (static_cast<double>(row.t_curr - row.t_prev) / day_us) * sf;

            double y = mu + cfg.noise_sd * count_rng.normal();
            double next = (static_cast<double>(counts[k]) + 1.0) * std::exp(y / sf) - 1.0;
            counts[k + 1] = std::max<int64_t>(0, std::llround(next));

            res.truth.push_back(
                {info.ticker, row.t_curr, static_cast<int32_t>(k), row.kind, row.group, mu});
        }

        // Map counts back to the raw snapshots; readings the filters discard
        // carry the latest surviving count forward.
        std::map<UtcMicros, int64_t> by_time;
        for (size_t j = 0; j < cs.obs.size(); ++j) by_time[cs.obs[j].at] = counts[j];
        int64_t current = counts[0];
        for (RawSnapshot& snap : st.snaps) {
            auto it = by_time.find(snap.at - delay_us);
            if (it != by_time.end()) current = it->second;
            snap.holders = current;
        }
    }

    // Equivalent file-based configuration (paths filled in by write_dgp_files).
    Config& pc = res.pipeline_cfg;
    pc.set("delay_minutes", std::to_string(cfg.delay_minutes));
    pc.set("sample_start", format_date(days.front()));
    pc.set("sample_end", format_date(days.back()));
    pc.set("min_vol_obs", std::to_string(cfg.min_vol_obs));
    pc.set("market_ticker", res.raw.market_ticker);
    pc.set("boundary_date", format_date(res.boundary_day));

    res.params.emplace_back("seed", std::to_string(cfg.seed));
    res.params.emplace_back("n_stocks", std::to_string(cfg.n_stocks));
    res.params.emplace_back("n_days", std::to_string(cfg.n_days));
    res.params.emplace_back("first_day", format_date(res.first_day));
    res.params.emplace_back("last_day", format_date(res.last_day));
    res.params.emplace_back("boundary_day", format_date(res.boundary_day));
    res.params.emplace_back("boundary_multiplier", fmt_double(cfg.boundary_multiplier));
    res.params.emplace_back("trend_per_day", fmt_double(cfg.trend_per_day));
    res.params.emplace_back("noise_sd", fmt_double(cfg.noise_sd));
    res.params.emplace_back("session_sd_lo", fmt_double(cfg.session_sd_lo));
    res.params.emplace_back("session_sd_hi", fmt_double(cfg.session_sd_hi));
    res.params.emplace_back("market_session_sd", fmt_double(cfg.market_session_sd));
    res.params.emplace_back("delay_minutes", std::to_string(cfg.delay_minutes));
    res.params.emplace_back("base_holders", std::to_string(cfg.base_holders));
    auto gjr_params = [&](const char* prefix, const GjrParams& p) {
        std::string pre(prefix);
        res.params.emplace_back(pre + "_omega", fmt_double(p.omega));
        res.params.emplace_back(pre + "_alpha", fmt_double(p.alpha));
        res.params.emplace_back(pre + "_gamma", fmt_double(p.gamma));
        res.params.emplace_back(pre + "_beta", fmt_double(p.beta));
    };
    gjr_params("overnight_gjr", cfg.overnight_gjr);
    gjr_params("market_gjr", cfg.market_gjr);
    for (int j = 0; j < 6; ++j)
        for (int g = 0; g < 6; ++g)
            res.params.emplace_back(
                "effect_lag" + std::to_string(j) + "_g" + std::to_string(g + 1),
                fmt_double(cfg.effect[static_cast<size_t>(j)][static_cast<size_t>(g)]));
    return res;
}

// ---- file export ---------------------------------------------------------

namespace detail {

inline void write_lines(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << content;
    if (!out) throw std::runtime_error("short write: " + path.string());
}

}  // namespace detail

// Writes the raw input files, the truth manifest, and a ready-to-run stage
// configuration into `dir`.  Paths in the config are directory-relative.
inline void write_dgp_files(SynthResult& res, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);

    {
        std::string out = "ticker,timestamp,users_holding\n";
        for (const RawStock& st : res.raw.stocks)
            for (const RawSnapshot& s : st.snaps)
                out += st.ticker + "," + format_timestamp_utc(s.at) + "," +
                       std::to_string(s.holders) + "\n";
        detail::write_lines(dir / "snapshots.csv", out);
    }
    {
        std::string out = "ticker,timestamp,price,exchange\n";
        out.reserve(1 << 22);
        auto emit = [&](const std::string& ticker, const std::vector<TradeTick>& ticks) {
            for (const TradeTick& t : ticks)
                out += ticker + "," + format_timestamp_utc(t.at) + "," + fmt_double(t.price) +
                       ",Q\n";
        };
        for (const RawStock& st : res.raw.stocks) emit(st.ticker, st.ticks);
        emit(res.raw.market_ticker, res.raw.market_ticks);
        detail::write_lines(dir / "ticks.csv", out);
    }
    {
        std::string out = "ticker,share_code,sector,dual_class\n";
        for (const RawStock& st : res.raw.stocks)
            out += st.ticker + "," + std::to_string(st.meta.share_code) + "," + st.meta.sector +
                   "," + (st.meta.dual_class ? "1" : "0") + "\n";
        detail::write_lines(dir / "metadata.csv", out);
    }
    {
        std::string out = "ticker,date,ratio\n";
        for (const RawStock& st : res.raw.stocks)
            for (const SplitEvent& sp : st.meta.splits)
                out += st.ticker + "," + format_date(sp.day) + "," + fmt_double(sp.ratio) + "\n";
        detail::write_lines(dir / "splits.csv", out);
    }
    {
        std::string out = "ticker,date,market_cap\n";
        for (const RawStock& st : res.raw.stocks)
            for (const auto& [day, cap] : st.caps)
                out += st.ticker + "," + format_date(day) + "," + fmt_double(cap) + "\n";
        detail::write_lines(dir / "caps.csv", out);
    }
    {
        TextTable t;
        t.header = {"ticker", "t_curr_us", "time_utc", "slot", "kind", "group", "mu"};
        t.rows.reserve(res.truth.size());
        for (const TruthRow& r : res.truth)
            t.rows.push_back({r.ticker, std::to_string(r.t_curr), format_timestamp_utc(r.t_curr),
                              std::to_string(r.slot), obs_kind_name(r.kind),
                              std::to_string(r.group), fmt_double(r.mu)});
        write_table(dir / "truth.tsv", t);
    }
    write_kv(dir / "truth_params.txt", res.params);

    res.pipeline_cfg.set("snapshots", "snapshots.csv");
    res.pipeline_cfg.set("ticks", "ticks.csv");
    res.pipeline_cfg.set("metadata", "metadata.csv");
    res.pipeline_cfg.set("splits", "splits.csv");
    res.pipeline_cfg.set("caps", "caps.csv");
    detail::write_lines(dir / "pipeline.cfg", res.pipeline_cfg.canonical());
}

// ---- oracles ---------------------------------------------------------------

namespace oracle {

// Gauss-Jordan inverse with partial pivoting, long double throughout.
inline std::vector<long double> invert(std::vector<long double> a, size_t n) {
    std::vector<long double> inv(n * n, 0.0L);
    for (size_t i = 0; i < n; ++i) inv[i * n + i] = 1.0L;
    for (size_t col = 0; col < n; ++col) {
        size_t pivot = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::fabs(static_cast<double>(a[r * n + col])) >
                std::fabs(static_cast<double>(a[pivot * n + col])))
                pivot = r;
        if (a[pivot * n + col] == 0.0L) throw std::runtime_error("oracle: singular matrix");
        if (pivot != col)
            for (size_t c = 0; c < n; ++c) {
                std::swap(a[pivot * n + c], a[col * n + c]);
                std::swap(inv[pivot * n + c], inv[col * n + c]);
            }
        long double d = a[col * n + col];
        for (size_t c = 0; c < n; ++c) {
            a[col * n + c] /= d;
            inv[col * n + c] /= d;
        }
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            long double f = a[r * n + col];
            if (f == 0.0L) continue;
            for (size_t c = 0; c < n; ++c) {
                a[r * n + c] -= f * a[col * n + c];
                inv[r * n + c] -= f * inv[col * n + c];
            }
        }
    }
    return inv;
}

// Normal equations by explicit inverse; rows-major X.
inline std::vector<double> ols(const std::vector<std::vector<double>>& X,
                               const std::vector<double>& y) {
    size_t n = X.size();
    if (n == 0 || n != y.size()) throw std::invalid_argument("oracle ols: bad shapes");
    size_t k = X[0].size();
    std::vector<long double> xtx(k * k, 0.0L), xty(k, 0.0L);
    for (size_t i = 0; i < n; ++i) {
        for (size_t a = 0; a < k; ++a) {
            for (size_t b = 0; b < k; ++b)
                xtx[a * k + b] += static_cast<long double>(X[i][a]) * X[i][b];
            xty[a] += static_cast<long double>(X[i][a]) * y[i];
        }
    }
    std::vector<long double> inv = invert(std::move(xtx), k);
    std::vector<double> beta(k, 0.0);
    for (size_t a = 0; a < k; ++a) {
        long double s = 0.0L;
        for (size_t b = 0; b < k; ++b) s += inv[a * k + b] * xty[b];
        beta[a] = static_cast<double>(s);
    }
    return beta;
}

// Cluster-robust sandwich by direct summation around the oracle fit.
inline Mat cluster_cov(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                       const std::vector<int>& cluster, bool small_sample) {
    size_t n = X.size();
    size_t k = X[0].size();
    if (cluster.size() != n) throw std::invalid_argument("oracle cluster: bad shapes");
    std::vector<double> beta = ols(X, y);

    std::vector<long double> xtx(k * k, 0.0L);
    for (size_t i = 0; i < n; ++i)
        for (size_t a = 0; a < k; ++a)
            for (size_t b = 0; b < k; ++b)
                xtx[a * k + b] += static_cast<long double>(X[i][a]) * X[i][b];
    std::vector<long double> bread = invert(std::move(xtx), k);

    std::map<int, std::vector<long double>> scores;
    for (size_t i = 0; i < n; ++i) {
        long double u = y[i];
        for (size_t a = 0; a < k; ++a) u -= static_cast<long double>(beta[a]) * X[i][a];
        auto& s = scores.try_emplace(cluster[i], std::vector<long double>(k, 0.0L)).first->second;
        for (size_t a = 0; a < k; ++a) s[a] += X[i][a] * u;
    }
    std::vector<long double> meat(k * k, 0.0L);
    for (const auto& [id, s] : scores)
        for (size_t a = 0; a < k; ++a)
            for (size_t b = 0; b < k; ++b) meat[a * k + b] += s[a] * s[b];

    long double factor = 1.0L;
    if (small_sample) {
        long double g = static_cast<long double>(scores.size());
        factor = g / (g - 1.0L) * (static_cast<long double>(n) - 1.0L) /
                 (static_cast<long double>(n) - static_cast<long double>(k));
    }
    Mat v(k, k);
    for (size_t a = 0; a < k; ++a)
        for (size_t b = 0; b < k; ++b) {
            long double s = 0.0L;
            for (size_t p = 0; p < k; ++p)
                for (size_t q = 0; q < k; ++q)
                    s += bread[a * k + p] * meat[p * k + q] * bread[q * k + b];
            v.at(a, b) = static_cast<double>(factor * s);
        }
    return v;
}

// Linear-interpolation quantile at rank (n-1)p, long double arithmetic.
inline double quantile(std::vector<double> v, double p) {
    if (v.empty()) throw std::invalid_argument("oracle quantile: empty");
    std::sort(v.begin(), v.end());
    long double h = static_cast<long double>(v.size() - 1) * static_cast<long double>(p);
    size_t lo = static_cast<size_t>(h);
    if (lo >= v.size() - 1) return v.back();
    long double frac = h - static_cast<long double>(lo);
    return static_cast<double>((1.0L - frac) * v[lo] + frac * v[lo + 1]);
}

// Conditional-variance recursion by direct evaluation.
inline std::vector<double> gjr_recursion(const GjrParams& p, std::span<const double> returns,
                                         double sigma0_sq) {
    std::vector<double> var(returns.size());
    long double v = sigma0_sq;
    for (size_t t = 0; t < returns.size(); ++t) {
        if (t > 0) {
            long double eps = static_cast<long double>(returns[t - 1]) - p.mean;
            long double arch = p.alpha + (eps < 0.0L ? p.gamma : 0.0L);
            v = p.omega + arch * eps * eps + p.beta * v;
        }
        var[t] = static_cast<double>(v);
    }
    return var;
}

}  // namespace oracle

}  // namespace hfpanel
