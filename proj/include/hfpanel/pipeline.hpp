#pragma once
// Stage drivers: each pipeline stage reads its predecessor's files out of the
// run directory (verified against the manifest), does its work through the
// library, and writes delimited tables plus an updated manifest.  The command
// line binary and the end-to-end tests share these functions.
//
// Every output is written deterministically (ordered iteration, shortest
// round-trip number formatting), so a re-run with unchanged inputs and
// configuration reproduces identical bytes regardless of worker count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hfpanel/behaviors.hpp"
#include "hfpanel/config.hpp"
#include "hfpanel/csv.hpp"
#include "hfpanel/grouping.hpp"
#include "hfpanel/ingest.hpp"
#include "hfpanel/io.hpp"
#include "hfpanel/manifest.hpp"
#include "hfpanel/panel.hpp"
#include "hfpanel/parallel.hpp"
#include "hfpanel/regression.hpp"
#include "hfpanel/standardize.hpp"
#include "hfpanel/types.hpp"
#include "hfpanel/volatility.hpp"

namespace hfpanel {

struct StageOptions {
    std::filesystem::path config_path;
    std::filesystem::path out_root = "runs";
    int workers = 0;  // 0 = hardware default
    std::string subgroup = "none";
    std::string dependent = "dn";
    std::string frequency = "hf";
    int delay_override = 0;  // 0 = value from the config file
    std::string figure = "main";
    bool quiet = false;
};

// Specification tag used in regression/behavior output file names.
inline std::string spec_tag(const StageOptions& opt) {
    return opt.subgroup + "_" + opt.dependent + "_" + opt.frequency;
}

struct StageContext {
    Config cfg;        // effective configuration (delay override applied)
    std::filesystem::path cfg_dir;
    std::filesystem::path run_dir;
    RunManifest manifest;
    StageTimings timings;
    int workers = 1;
    bool quiet = false;

    std::filesystem::path input_path(const std::string& key) const {
        std::filesystem::path p = cfg.require_str(key);
        return p.is_absolute() ? p : cfg_dir / p;
    }
    std::filesystem::path optional_input_path(const std::string& key) const {
        if (!cfg.has(key)) return {};
        return input_path(key);
    }
};

namespace detail {

inline const std::vector<std::string>& raw_input_keys() {
    static const std::vector<std::string> k = {"snapshots", "ticks",      "metadata",
                                               "splits",    "caps",       "exclusions"};
    return k;
}

}  // namespace detail

// Loads the config, digests the raw inputs, and opens (or creates) the run
// directory named by the run id.
inline StageContext open_run(const StageOptions& opt) {
    StageContext ctx;
    ctx.quiet = opt.quiet;
    ctx.cfg = Config::from_file(opt.config_path.string());
    ctx.cfg_dir = std::filesystem::absolute(opt.config_path).parent_path();
    if (opt.delay_override != 0) ctx.cfg.set("delay_minutes", std::to_string(opt.delay_override));

    std::map<std::string, std::string> input_digests;
    for (const std::string& key : detail::raw_input_keys()) {
        std::filesystem::path p = ctx.optional_input_path(key);
        if (!p.empty()) input_digests[key] = digest_file(p);
    }

    ctx.run_dir = opt.out_root / ("run-" + compute_run_id(ctx.cfg, input_digests));
    std::filesystem::create_directories(ctx.run_dir);
    if (std::filesystem::exists(ctx.run_dir / "manifest.txt"))
        ctx.manifest = RunManifest::load(ctx.run_dir);
    else
        ctx.manifest = RunManifest::start(ctx.cfg, input_digests);
    ctx.timings = StageTimings::load_or_empty(ctx.run_dir);
    ctx.workers = resolve_workers(opt.workers);
    return ctx;
}

namespace detail {

// True (and says so) when every listed output of `stage` is already on disk
// with the digest the manifest recorded — the stage is a no-op then.
inline bool stage_current(const StageContext& ctx, const std::string& stage,
                          const std::vector<std::string>& outputs) {
    auto it = ctx.manifest.stages.find(stage);
    if (it == ctx.manifest.stages.end()) return false;
    for (const std::string& f : outputs) {
        auto rec = it->second.find(f);
        if (rec == it->second.end()) return false;
        std::filesystem::path p = ctx.run_dir / f;
        if (!std::filesystem::exists(p) || digest_file(p) != rec->second) return false;
    }
    if (!ctx.quiet)
        std::cout << stage << ": up to date in " << ctx.run_dir.string() << "\n";
    return true;
}

inline void commit_stage(StageContext& ctx, const std::string& stage,
                         const std::vector<std::string>& outputs,
                         std::chrono::steady_clock::time_point started) {
    for (const std::string& f : outputs)
        ctx.manifest.record_output(stage, f, digest_file(ctx.run_dir / f));
    ctx.manifest.save(ctx.run_dir);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          started)
                    .count();
    ctx.timings.set(stage, ms);
    ctx.timings.save(ctx.run_dir);
    if (!ctx.quiet)
        std::cout << stage << ": wrote " << outputs.size() << " file(s) to "
                  << ctx.run_dir.string() << "\n";
}

}  // namespace detail

// ---- raw input loading -----------------------------------------------------

namespace detail {

inline void expect_header(const std::filesystem::path& path, std::string_view line,
                          std::string_view want) {
    if (line != want)
        throw std::runtime_error(path.string() + ": expected header '" + std::string(want) +
                                 "', found '" + std::string(line) + "'");
}

}  // namespace detail

inline RawData load_raw_data(const StageContext& ctx) {
    RawData raw;
    raw.market_ticker = ctx.cfg.get_str("market_ticker", "MKT");
    std::set<std::string> venues;
    for (const std::string& v : ctx.cfg.get_list("venues")) venues.insert(v);
    if (venues.empty()) venues = {"N", "Q", "A"};

    std::map<std::string, RawStock> stocks;

    {
        std::filesystem::path p = ctx.input_path("snapshots");
        std::vector<std::string_view> f(3);
        for_each_line(p.string(), [&](size_t no, std::string_view line) {
            if (no == 1) {
                detail::expect_header(p, line, "ticker,timestamp,users_holding");
                return;
            }
            if (line.empty()) return;
            if (!split_fields(line, ',', f))
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad row");
            auto at = parse_timestamp(f[1]);
            auto holders = parse_int(f[2]);
            if (!at || !holders)
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad values");
            std::string ticker(f[0]);
            if (ticker == raw.market_ticker) return;  // proxy holdings unused
            RawStock& st = stocks[ticker];
            st.ticker = ticker;
            st.snaps.push_back({*at, *holders});
        });
    }
    {
        std::filesystem::path p = ctx.input_path("ticks");
        std::vector<std::string_view> f(4);
        for_each_line(p.string(), [&](size_t no, std::string_view line) {
            if (no == 1) {
                detail::expect_header(p, line, "ticker,timestamp,price,exchange");
                return;
            }
            if (line.empty()) return;
            if (!split_fields(line, ',', f))
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad row");
            if (!venues.count(std::string(f[3]))) return;
            auto at = parse_timestamp(f[1]);
            auto price = parse_double(f[2]);
            if (!at || !price)
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad values");
            std::string ticker(f[0]);
            if (ticker == raw.market_ticker)
                raw.market_ticks.push_back({*at, *price});
            else
                stocks[ticker].ticks.push_back({*at, *price});
        });
    }
    {
        std::filesystem::path p = ctx.input_path("metadata");
        std::vector<std::string_view> f(4);
        for_each_line(p.string(), [&](size_t no, std::string_view line) {
            if (no == 1) {
                detail::expect_header(p, line, "ticker,share_code,sector,dual_class");
                return;
            }
            if (line.empty()) return;
            if (!split_fields(line, ',', f))
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad row");
            std::string ticker(f[0]);
            if (ticker == raw.market_ticker) return;
            auto it = stocks.find(ticker);
            if (it == stocks.end()) return;  // metadata for an unobserved ticker
            auto code = parse_int(f[1]);
            if (!code)
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad code");
            it->second.meta.ticker = ticker;
            it->second.meta.share_code = static_cast<int>(*code);
            it->second.meta.sector = std::string(f[2]);
            it->second.meta.dual_class = f[3] == "1" || f[3] == "true";
            it->second.has_meta = true;
        });
    }
    if (std::filesystem::path p = ctx.optional_input_path("splits"); !p.empty()) {
        std::vector<std::string_view> f(3);
        for_each_line(p.string(), [&](size_t no, std::string_view line) {
            if (no == 1) {
                detail::expect_header(p, line, "ticker,date,ratio");
                return;
            }
            if (line.empty()) return;
            if (!split_fields(line, ',', f))
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad row");
            auto it = stocks.find(std::string(f[0]));
            if (it == stocks.end()) return;
            auto day = parse_date(f[1]);
            auto ratio = parse_double(f[2]);
            if (!day || !ratio || *ratio <= 0.0)
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad split");
            it->second.meta.splits.push_back({*day, *ratio});
        });
    }
    if (std::filesystem::path p = ctx.optional_input_path("caps"); !p.empty()) {
        std::vector<std::string_view> f(3);
        for_each_line(p.string(), [&](size_t no, std::string_view line) {
            if (no == 1) {
                detail::expect_header(p, line, "ticker,date,market_cap");
                return;
            }
            if (line.empty()) return;
            if (!split_fields(line, ',', f))
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad row");
            auto it = stocks.find(std::string(f[0]));
            if (it == stocks.end()) return;
            auto day = parse_date(f[1]);
            auto cap = parse_double(f[2]);
            if (!day || !cap)
                throw std::runtime_error(p.string() + ":" + std::to_string(no) + ": bad cap");
            it->second.caps.emplace_back(*day, *cap);
        });
    }

    raw.stocks.reserve(stocks.size());
    for (auto& [ticker, st] : stocks) {
        std::stable_sort(st.ticks.begin(), st.ticks.end(),
                         [](const TradeTick& a, const TradeTick& b) { return a.at < b.at; });
        std::stable_sort(st.meta.splits.begin(), st.meta.splits.end(),
                         [](const SplitEvent& a, const SplitEvent& b) { return a.day < b.day; });
        std::stable_sort(st.caps.begin(), st.caps.end());
        raw.stocks.push_back(std::move(st));
    }
    std::stable_sort(raw.market_ticks.begin(), raw.market_ticks.end(),
                     [](const TradeTick& a, const TradeTick& b) { return a.at < b.at; });
    return raw;
}

inline IngestSettings ingest_settings(const StageContext& ctx) {
    Config cfg = ctx.cfg;  // resolve the exclusion list path before parsing
    if (cfg.has("exclusions")) cfg.set("exclusions", ctx.input_path("exclusions").string());
    return IngestSettings::from_config(cfg);
}

// ---- clean data serialization ----------------------------------------------

inline void write_clean_data(const std::filesystem::path& dir, const CleanData& clean,
                             const std::string& run_id) {
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"step", "name", "observations", "securities"};
        for (const FilterStep& s : clean.ledger)
            t.rows.push_back({std::to_string(s.step), s.name, std::to_string(s.observations),
                              std::to_string(s.securities)});
        write_table(dir / "ledger.tsv", t);
    }
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"ticker", "sector", "at_us", "day", "holders", "price", "mkt_price"};
        for (const CleanStock& st : clean.stocks)
            for (size_t j = 0; j < st.obs.size(); ++j) {
                const CleanObservation& o = st.obs[j];
                t.rows.push_back({st.ticker, st.sector, std::to_string(o.at),
                                  std::to_string(o.day), std::to_string(o.holders),
                                  fmt_double(o.price), fmt_double(st.mkt_price[j])});
            }
        write_table(dir / "clean_obs.tsv", t);
    }
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"ticker", "day", "market_cap"};
        for (const CleanStock& st : clean.stocks)
            for (const auto& [day, cap] : st.caps)
                t.rows.push_back({st.ticker, std::to_string(day), fmt_double(cap)});
        write_table(dir / "clean_caps.tsv", t);
    }
    {
        TextTable t;
        t.comments = {"run " + run_id, "market proxy: " + clean.market_ticker};
        t.header = {"day", "date", "open", "close", "sigma_rv", "sigma_on", "sigma_daily"};
        for (const MarketDay& d : clean.market)
            t.rows.push_back({std::to_string(d.day), format_date(d.day), fmt_double(d.open),
                              fmt_double(d.close), fmt_double(d.sigma_rv), fmt_double(d.sigma_on),
                              fmt_double(d.sigma_daily)});
        write_table(dir / "market_series.tsv", t);
    }
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"ticker", "day", "kind", "sigma", "model", "converged"};
        for (const VolEstimate& e : clean.estimates)
            t.rows.push_back({e.ticker, std::to_string(e.day), obs_kind_name(e.kind),
                              fmt_double(e.sigma), e.model, e.converged ? "1" : "0"});
        write_table(dir / "vol_estimates.tsv", t);
    }
}

inline CleanData read_clean_data(const std::filesystem::path& dir) {
    CleanData clean;
    {
        TextTable t = read_table(dir / "ledger.tsv");
        for (const auto& r : t.rows)
            clean.ledger.push_back({static_cast<int>(*parse_int(r[0])), r[1],
                                    static_cast<uint64_t>(*parse_int(r[2])),
                                    static_cast<uint64_t>(*parse_int(r[3]))});
    }
    {
        TextTable t = read_table(dir / "clean_obs.tsv");
        CleanStock* cur = nullptr;
        for (const auto& r : t.rows) {
            if (!cur || cur->ticker != r[0]) {
                clean.stocks.emplace_back();
                cur = &clean.stocks.back();
                cur->ticker = r[0];
                cur->sector = r[1];
            }
            cur->obs.push_back({*parse_int(r[2]), static_cast<int32_t>(*parse_int(r[3])),
                                *parse_int(r[4]), *parse_double(r[5])});
            cur->mkt_price.push_back(*parse_double(r[6]));
        }
    }
    {
        TextTable t = read_table(dir / "clean_caps.tsv");
        std::map<std::string, size_t> index;
        for (size_t i = 0; i < clean.stocks.size(); ++i) index[clean.stocks[i].ticker] = i;
        for (const auto& r : t.rows) {
            auto it = index.find(r[0]);
            if (it == index.end()) continue;
            clean.stocks[it->second].caps.emplace_back(static_cast<int32_t>(*parse_int(r[1])),
                                                       *parse_double(r[2]));
        }
    }
    {
        TextTable t = read_table(dir / "market_series.tsv");
        for (const std::string& c : t.comments)
            if (c.starts_with("market proxy: ")) clean.market_ticker = c.substr(14);
        for (const auto& r : t.rows) {
            MarketDay d;
            d.day = static_cast<int32_t>(*parse_int(r[0]));
            d.open = *parse_double(r[2]);
            d.close = *parse_double(r[3]);
            d.sigma_rv = *parse_double(r[4]);
            d.sigma_on = *parse_double(r[5]);
            d.sigma_daily = *parse_double(r[6]);
            clean.market.push_back(d);
        }
    }
    {
        TextTable t = read_table(dir / "vol_estimates.tsv");
        for (const auto& r : t.rows)
            clean.estimates.push_back({r[0], static_cast<int32_t>(*parse_int(r[1])),
                                       r[2] == "intraday" ? ObsKind::intraday
                                                          : ObsKind::overnight,
                                       *parse_double(r[3]), r[4], r[5] == "1"});
    }
    return clean;
}

// ---- panel serialization -----------------------------------------------------

inline void write_panel(const std::filesystem::path& dir, const Panel& panel,
                        const std::string& file, const std::string& run_id) {
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"stock", "ticker", "sector"};
        for (size_t i = 0; i < panel.stocks.size(); ++i) {
            const StockInfo& st = panel.stocks[i];
            t.rows.push_back({std::to_string(i), st.ticker,
                              st.sector >= 0 ? panel.sectors[static_cast<size_t>(st.sector)]
                                             : ""});
        }
        write_table(dir / "panel_stocks.tsv", t);
    }
    TextTable t;
    t.comments = {"run " + run_id};
    t.header = {"stock", "slot",   "obs_idx", "kind",    "day",     "t_prev_us", "t_curr_us",
                "mnt",   "n_prev", "n_curr",  "p_prev",  "p_curr",  "delta_n",   "delta_n_detrended",
                "raw_return", "std_return", "mkt_raw", "mkt_std", "market_cap"};
    t.rows.reserve(panel.rows.size());
    for (const PanelRow& r : panel.rows)
        t.rows.push_back({std::to_string(r.stock), std::to_string(r.slot),
                          std::to_string(r.obs_idx), obs_kind_name(r.kind), std::to_string(r.day),
                          std::to_string(r.t_prev), std::to_string(r.t_curr), fmt_double(r.mnt),
                          std::to_string(r.n_prev), std::to_string(r.n_curr), fmt_double(r.p_prev),
                          fmt_double(r.p_curr), fmt_double(r.delta_n),
                          fmt_double(r.delta_n_detrended), fmt_double(r.raw_return),
                          fmt_double(r.std_return), fmt_double(r.mkt_raw), fmt_double(r.mkt_std),
                          fmt_double(r.market_cap)});
    write_table(dir / file, t);
}

inline Panel read_panel(const std::filesystem::path& dir, const std::string& file) {
    Panel panel;
    {
        TextTable t = read_table(dir / "panel_stocks.tsv");
        std::map<std::string, int32_t> sector_ids;
        for (const auto& r : t.rows) {
            StockInfo st;
            st.ticker = r[1];
            if (!r[2].empty()) {
                auto [it, inserted] =
                    sector_ids.try_emplace(r[2], static_cast<int32_t>(panel.sectors.size()));
                if (inserted) panel.sectors.push_back(r[2]);
                st.sector = it->second;
            }
            panel.stocks.push_back(std::move(st));
        }
    }
    TextTable t = read_table(dir / file);
    panel.rows.reserve(t.rows.size());
    for (const auto& r : t.rows) {
        PanelRow row;
        row.stock = static_cast<int32_t>(*parse_int(r[0]));
        row.slot = static_cast<int32_t>(*parse_int(r[1]));
        row.obs_idx = static_cast<int32_t>(*parse_int(r[2]));
        row.kind = r[3] == "intraday" ? ObsKind::intraday : ObsKind::overnight;
        row.day = static_cast<int32_t>(*parse_int(r[4]));
        row.t_prev = *parse_int(r[5]);
        row.t_curr = *parse_int(r[6]);
        row.mnt = *parse_double(r[7]);
        row.n_prev = *parse_int(r[8]);
        row.n_curr = *parse_int(r[9]);
        row.p_prev = *parse_double(r[10]);
        row.p_curr = *parse_double(r[11]);
        row.delta_n = *parse_double(r[12]);
        row.delta_n_detrended = *parse_double(r[13]);
        row.raw_return = *parse_double(r[14]);
        row.std_return = *parse_double(r[15]);
        row.mkt_raw = *parse_double(r[16]);
        row.mkt_std = *parse_double(r[17]);
        row.market_cap = *parse_double(r[18]);
        panel.rows.push_back(row);
    }
    // Rebuild the per-stock row ranges (rows are stock-major, slot-ascending).
    for (size_t i = 0; i < panel.rows.size(); ++i) {
        StockInfo& st = panel.stocks.at(static_cast<size_t>(panel.rows[i].stock));
        if (st.n_rows == 0) st.first_row = i;
        ++st.n_rows;
    }
    return panel;
}

inline void write_summary(const std::filesystem::path& dir, const std::string& file,
                          const std::vector<SummaryRow>& rows, const std::string& run_id) {
    TextTable t;
    t.comments = {"run " + run_id, "delta_n in basis points of daily log units"};
    t.header = {"series", "sample", "n_obs", "mean", "sd", "p5", "p25", "p50", "p75", "p95"};
    for (const SummaryRow& s : rows)
        t.rows.push_back({s.series, s.sample, std::to_string(s.n_obs), fmt_double(s.mean),
                          fmt_double(s.sd), fmt_double(s.p5), fmt_double(s.p25), fmt_double(s.p50),
                          fmt_double(s.p75), fmt_double(s.p95)});
    write_table(dir / file, t);
}

// ---- daily panel serialization -----------------------------------------------

inline void write_daily_panel(const std::filesystem::path& dir, const DailyPanel& panel,
                              const std::string& run_id) {
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"stock", "ticker", "sector"};
        for (size_t i = 0; i < panel.stocks.size(); ++i) {
            const StockInfo& st = panel.stocks[i];
            t.rows.push_back({std::to_string(i), st.ticker,
                              st.sector >= 0 ? panel.sectors[static_cast<size_t>(st.sector)]
                                             : ""});
        }
        write_table(dir / "daily_stocks.tsv", t);
    }
    TextTable t;
    t.comments = {"run " + run_id};
    t.header = {"stock",  "slot",   "day",     "day_prev", "n_prev",  "n_curr",  "p_prev",
                "p_curr", "delta_n", "raw_return", "std_return", "mkt_raw", "mkt_std",
                "market_cap"};
    for (const DailyRow& r : panel.rows)
        t.rows.push_back({std::to_string(r.stock), std::to_string(r.slot), std::to_string(r.day),
                          std::to_string(r.day_prev), std::to_string(r.n_prev),
                          std::to_string(r.n_curr), fmt_double(r.p_prev), fmt_double(r.p_curr),
                          fmt_double(r.delta_n), fmt_double(r.raw_return),
                          fmt_double(r.std_return), fmt_double(r.mkt_raw), fmt_double(r.mkt_std),
                          fmt_double(r.market_cap)});
    write_table(dir / "panel_daily_std.tsv", t);
}

inline DailyPanel read_daily_panel(const std::filesystem::path& dir) {
    DailyPanel panel;
    {
        TextTable t = read_table(dir / "daily_stocks.tsv");
        std::map<std::string, int32_t> sector_ids;
        for (const auto& r : t.rows) {
            StockInfo st;
            st.ticker = r[1];
            if (!r[2].empty()) {
                auto [it, inserted] =
                    sector_ids.try_emplace(r[2], static_cast<int32_t>(panel.sectors.size()));
                if (inserted) panel.sectors.push_back(r[2]);
                st.sector = it->second;
            }
            panel.stocks.push_back(std::move(st));
        }
    }
    TextTable t = read_table(dir / "panel_daily_std.tsv");
    for (const auto& r : t.rows) {
        DailyRow row;
        row.stock = static_cast<int32_t>(*parse_int(r[0]));
        row.slot = static_cast<int32_t>(*parse_int(r[1]));
        row.day = static_cast<int32_t>(*parse_int(r[2]));
        row.day_prev = static_cast<int32_t>(*parse_int(r[3]));
        row.n_prev = *parse_int(r[4]);
        row.n_curr = *parse_int(r[5]);
        row.p_prev = *parse_double(r[6]);
        row.p_curr = *parse_double(r[7]);
        row.delta_n = *parse_double(r[8]);
        row.raw_return = *parse_double(r[9]);
        row.std_return = *parse_double(r[10]);
        row.mkt_raw = *parse_double(r[11]);
        row.mkt_std = *parse_double(r[12]);
        row.market_cap = *parse_double(r[13]);
        panel.rows.push_back(row);
    }
    for (size_t i = 0; i < panel.rows.size(); ++i) {
        StockInfo& st = panel.stocks.at(static_cast<size_t>(panel.rows[i].stock));
        if (st.n_rows == 0) st.first_row = i;
        ++st.n_rows;
    }
    return panel;
}

// ---- fit serialization ---------------------------------------------------------

inline void write_fits(const std::filesystem::path& dir, const std::string& tag,
                       const std::vector<FitResult>& fits, const std::string& run_id) {
    {
        TextTable t;
        t.comments = {"run " + run_id};
        t.header = {"lag", "idx", "label", "beta", "se"};
        for (const FitResult& f : fits)
            for (size_t i = 0; i < f.beta.size(); ++i)
                t.rows.push_back({std::to_string(f.lag), std::to_string(i), f.labels[i],
                                  fmt_double(f.beta[i]), fmt_double(f.se(i))});
        write_table(dir / ("fits_" + tag + ".tsv"), t);
    }
    {
        TextTable t;
        t.comments = {"run " + run_id, "upper triangle of the cluster-robust covariance"};
        t.header = {"lag", "i", "j", "value"};
        for (const FitResult& f : fits)
            for (size_t i = 0; i < f.beta.size(); ++i)
                for (size_t j = i; j < f.beta.size(); ++j)
                    t.rows.push_back({std::to_string(f.lag), std::to_string(i), std::to_string(j),
                                      fmt_double(f.vcov.at(i, j))});
        write_table(dir / ("vcov_" + tag + ".tsv"), t);
    }
    KvPairs kv;
    kv.emplace_back("subgroup", fits.front().subgroup);
    std::string levels;
    for (const std::string& l : fits.front().levels) {
        if (!levels.empty()) levels += "|";
        levels += l;
    }
    kv.emplace_back("levels", levels);
    for (const FitResult& f : fits) {
        std::string p = "lag" + std::to_string(f.lag) + ".";
        kv.emplace_back(p + "n_obs", std::to_string(f.n_obs));
        kv.emplace_back(p + "n_clusters", std::to_string(f.n_clusters));
        kv.emplace_back(p + "adj_r2", fmt_double(f.adj_r2));
        kv.emplace_back(p + "rss", fmt_double(f.rss));
        kv.emplace_back(p + "tss", fmt_double(f.tss));
    }
    write_kv(dir / ("fitmeta_" + tag + ".txt"), kv);
}

inline std::vector<FitResult> read_fits(const std::filesystem::path& dir, const std::string& tag) {
    std::map<int, FitResult> by_lag;
    {
        TextTable t = read_table(dir / ("fits_" + tag + ".tsv"));
        for (const auto& r : t.rows) {
            FitResult& f = by_lag[static_cast<int>(*parse_int(r[0]))];
            f.lag = static_cast<int>(*parse_int(r[0]));
            f.labels.push_back(r[2]);
            f.beta.push_back(*parse_double(r[3]));
        }
    }
    for (auto& [lag, f] : by_lag) f.vcov = Mat(f.beta.size(), f.beta.size());
    {
        TextTable t = read_table(dir / ("vcov_" + tag + ".tsv"));
        for (const auto& r : t.rows) {
            FitResult& f = by_lag.at(static_cast<int>(*parse_int(r[0])));
            size_t i = static_cast<size_t>(*parse_int(r[1]));
            size_t j = static_cast<size_t>(*parse_int(r[2]));
            double v = *parse_double(r[3]);
            f.vcov.at(i, j) = v;
            f.vcov.at(j, i) = v;
        }
    }
    std::vector<std::string> levels;
    std::string subgroup;
    for (const auto& [key, value] : read_kv(dir / ("fitmeta_" + tag + ".txt"))) {
        if (key == "subgroup") {
            subgroup = value;
        } else if (key == "levels") {
            for (std::string_view part : split_any(value, '|')) levels.emplace_back(part);
        } else if (key.starts_with("lag")) {
            size_t dot = key.find('.');
            FitResult& f = by_lag.at(std::stoi(key.substr(3, dot - 3)));
            std::string field = key.substr(dot + 1);
            if (field == "n_obs") f.n_obs = static_cast<size_t>(*parse_int(value));
            else if (field == "n_clusters") f.n_clusters = static_cast<size_t>(*parse_int(value));
            else if (field == "adj_r2") f.adj_r2 = *parse_double(value);
            else if (field == "rss") f.rss = *parse_double(value);
            else if (field == "tss") f.tss = *parse_double(value);
        }
    }
    std::vector<FitResult> fits;
    for (auto& [lag, f] : by_lag) {
        f.subgroup = subgroup;
        f.levels = levels;
        fits.push_back(std::move(f));
    }
    return fits;
}

// ---- stages -------------------------------------------------------------------

inline void stage_ingest(StageContext& ctx) {
    static const std::vector<std::string> outputs = {
        "ledger.tsv", "clean_obs.tsv", "clean_caps.tsv", "market_series.tsv",
        "vol_estimates.tsv"};
    if (detail::stage_current(ctx, "ingest", outputs)) return;
    auto started = std::chrono::steady_clock::now();

    RawData raw = load_raw_data(ctx);
    IngestSettings settings = ingest_settings(ctx);
    CleanData clean = apply_filters(raw, settings, ctx.workers);
    write_clean_data(ctx.run_dir, clean, ctx.manifest.run_id);

    if (!ctx.quiet)
        for (const FilterStep& s : clean.ledger)
            std::cout << "  step " << s.step << " " << s.name << ": " << s.observations
                      << " observations, " << s.securities << " securities\n";
    detail::commit_stage(ctx, "ingest", outputs, started);
}

inline void stage_panel(StageContext& ctx) {
    static const std::vector<std::string> outputs = {"panel.tsv", "panel_stocks.tsv"};
    if (detail::stage_current(ctx, "panel", outputs)) return;
    for (const char* f : {"clean_obs.tsv", "clean_caps.tsv", "market_series.tsv"})
        verify_input(ctx.manifest, ctx.run_dir, f);
    auto started = std::chrono::steady_clock::now();

    CleanData clean = read_clean_data(ctx.run_dir);
    Panel panel = build_panel(clean);
    finalize_panel(panel, clean);
    write_panel(ctx.run_dir, panel, "panel.tsv", ctx.manifest.run_id);
    detail::commit_stage(ctx, "panel", outputs, started);
}

inline void stage_vol(StageContext& ctx) {
    static const std::vector<std::string> outputs = {"panel_std.tsv", "summary.tsv"};
    if (detail::stage_current(ctx, "vol", outputs)) return;
    for (const char* f : {"panel.tsv", "panel_stocks.tsv", "vol_estimates.tsv",
                          "market_series.tsv"})
        verify_input(ctx.manifest, ctx.run_dir, f);
    auto started = std::chrono::steady_clock::now();

    CleanData clean = read_clean_data(ctx.run_dir);
    Panel panel = read_panel(ctx.run_dir, "panel.tsv");
    fill_std_returns(panel, clean);
    write_panel(ctx.run_dir, panel, "panel_std.tsv", ctx.manifest.run_id);
    write_summary(ctx.run_dir, "summary.tsv", summarize_panel(panel), ctx.manifest.run_id);
    detail::commit_stage(ctx, "vol", outputs, started);
}

inline void stage_daily(StageContext& ctx) {
    static const std::vector<std::string> outputs = {"panel_daily_std.tsv", "daily_stocks.tsv",
                                                     "vol_daily.tsv"};
    if (detail::stage_current(ctx, "daily", outputs)) return;
    for (const char* f : {"clean_obs.tsv", "clean_caps.tsv", "market_series.tsv"})
        verify_input(ctx.manifest, ctx.run_dir, f);
    auto started = std::chrono::steady_clock::now();

    CleanData clean = read_clean_data(ctx.run_dir);
    size_t min_obs = static_cast<size_t>(ctx.cfg.get_int("min_vol_obs", 240));

    // Per-stock conditional volatility of the daily change series; stocks
    // whose series is too short or whose fit fails are dropped, mirroring the
    // estimability filter at the higher frequency.
    DailyPanel probe = build_daily_panel(clean);
    std::vector<std::unordered_map<int32_t, double>> sigma(probe.stocks.size());
    std::vector<std::string> models(probe.stocks.size());
    std::vector<char> keep(probe.stocks.size(), 0);
    parallel_for(probe.stocks.size(), ctx.workers, [&](size_t s) {
        const StockInfo& st = probe.stocks[s];
        if (st.n_rows < min_obs) return;
        std::vector<double> returns(st.n_rows);
        for (size_t r = 0; r < st.n_rows; ++r)
            returns[r] = probe.rows[st.first_row + r].raw_return;
        GjrFit fit = fit_gjr_garch(returns, false, min_obs);
        if (!fit.converged) return;
        std::vector<double> sig = gjr_sigma_series(fit.params, returns, VolSeriesKind::daily);
        for (size_t r = 0; r < st.n_rows; ++r)
            sigma[s][probe.rows[st.first_row + r].day] = sig[r];
        models[s] = fit.model;
        keep[s] = 1;
    });

    CleanData kept;
    kept.market = clean.market;
    kept.market_ticker = clean.market_ticker;
    std::unordered_map<std::string, std::map<int32_t, double>> by_ticker;
    for (size_t s = 0; s < probe.stocks.size(); ++s) {
        if (!keep[s]) continue;
        kept.stocks.push_back(clean.stocks[s]);
        auto& m = by_ticker[probe.stocks[s].ticker];
        for (const auto& [day, sig] : sigma[s]) m[day] = sig;
    }
    if (kept.stocks.empty())
        throw std::runtime_error("daily: no stock has an estimable daily variance process");

    DailyPanel panel = build_daily_panel(kept);
    winsorize_daily(panel);
    fill_std_daily(panel, by_ticker, kept.market);
    write_daily_panel(ctx.run_dir, panel, ctx.manifest.run_id);
    {
        TextTable t;
        t.comments = {"run " + ctx.manifest.run_id};
        t.header = {"ticker", "day", "sigma", "model"};
        for (size_t s = 0; s < probe.stocks.size(); ++s) {
            if (!keep[s]) continue;
            for (const auto& [day, sig] : by_ticker[probe.stocks[s].ticker])
                t.rows.push_back({probe.stocks[s].ticker, std::to_string(day), fmt_double(sig),
                                  models[s]});
        }
        write_table(ctx.run_dir / "vol_daily.tsv", t);
    }
    detail::commit_stage(ctx, "daily", outputs, started);
}

// Shared by stage_regress and in-memory callers: groups, cutoffs, suite.
inline std::vector<FitResult> fit_suite_hf(Panel& panel, const StageOptions& opt,
                                           const Config& cfg, int workers,
                                           GroupCutoffs* cutoffs_out = nullptr) {
    GroupCutoffs cuts = assign_panel_groups(panel);
    if (cutoffs_out) *cutoffs_out = cuts;
    RegSample sample = make_sample(panel, dependent_from_name(opt.dependent));
    SubgroupSpec sub = make_subgroup(subgroup_from_name(opt.subgroup), sample,
                                     cfg.get_date("boundary_date", days_from_civil(2020, 3, 11)),
                                     cfg.get_double("size_small_cap", 2e9),
                                     cfg.get_double("size_large_cap", 1e10));
    OlsOptions ols;
    ols.workers = workers;
    return run_spec_suite(sample, sub, ols);
}

inline void stage_regress(StageContext& ctx, const StageOptions& opt) {
    const std::string tag = spec_tag(opt);
    const bool daily = opt.frequency == "daily";
    const std::string cut_file = daily ? "cutoffs_daily.tsv" : "cutoffs_hf.tsv";
    const std::vector<std::string> outputs = {"fits_" + tag + ".tsv", "vcov_" + tag + ".tsv",
                                              "fitmeta_" + tag + ".txt", cut_file};
    if (detail::stage_current(ctx, "regress:" + tag, outputs)) return;
    verify_input(ctx.manifest, ctx.run_dir, daily ? "panel_daily_std.tsv" : "panel_std.tsv");
    auto started = std::chrono::steady_clock::now();

    GroupCutoffs cuts;
    std::vector<FitResult> fits;
    if (daily) {
        if (opt.dependent != "dn")
            throw std::runtime_error("regress: only the plain holdings change is defined at the "
                                     "daily frequency");
        if (opt.subgroup == "kind")
            throw std::runtime_error("regress: the intraday/overnight split does not exist at "
                                     "the daily frequency");
        DailyPanel panel = read_daily_panel(ctx.run_dir);
        cuts = assign_daily_groups(panel);
        RegSample sample = make_sample(panel);
        SubgroupSpec sub = make_subgroup(
            subgroup_from_name(opt.subgroup), sample,
            ctx.cfg.get_date("boundary_date", days_from_civil(2020, 3, 11)),
            ctx.cfg.get_double("size_small_cap", 2e9), ctx.cfg.get_double("size_large_cap", 1e10));
        OlsOptions ols;
        ols.workers = ctx.workers;
        fits = run_spec_suite(sample, sub, ols);
    } else {
        Panel panel = read_panel(ctx.run_dir, "panel_std.tsv");
        fits = fit_suite_hf(panel, opt, ctx.cfg, ctx.workers, &cuts);
    }

    {
        TextTable t;
        t.comments = {"run " + ctx.manifest.run_id,
                      "pooled linear-interpolation quantiles of standardized returns"};
        t.header = {"q5", "q25", "q75", "q95"};
        t.rows.push_back({fmt_double(cuts.q5), fmt_double(cuts.q25), fmt_double(cuts.q75),
                          fmt_double(cuts.q95)});
        write_table(ctx.run_dir / cut_file, t);
    }
    std::string cut_prefix = daily ? "cutoffs.daily." : "cutoffs.hf.";
    ctx.manifest.extra[cut_prefix + "q5"] = fmt_double(cuts.q5);
    ctx.manifest.extra[cut_prefix + "q25"] = fmt_double(cuts.q25);
    ctx.manifest.extra[cut_prefix + "q75"] = fmt_double(cuts.q75);
    ctx.manifest.extra[cut_prefix + "q95"] = fmt_double(cuts.q95);

    write_fits(ctx.run_dir, tag, fits, ctx.manifest.run_id);
    if (!ctx.quiet)
        std::cout << "  " << fits.size() << " specifications, n_obs = " << fits.front().n_obs
                  << ", clusters = " << fits.front().n_clusters << "\n";
    detail::commit_stage(ctx, "regress:" + tag, outputs, started);
}

inline void stage_behaviors(StageContext& ctx, const StageOptions& opt) {
    const std::string tag = spec_tag(opt);
    const std::vector<std::string> outputs = {"behaviors_" + tag + ".tsv",
                                              "behaviors_" + tag + ".txt"};
    if (detail::stage_current(ctx, "behaviors:" + tag, outputs)) return;
    for (const std::string& f :
         {"fits_" + tag + ".tsv", "vcov_" + tag + ".tsv", "fitmeta_" + tag + ".txt"})
        verify_input(ctx.manifest, ctx.run_dir, f);
    auto started = std::chrono::steady_clock::now();

    std::vector<FitResult> fits = read_fits(ctx.run_dir, tag);
    std::vector<BehaviorRow> rows = behavior_table(fits);
    std::vector<BehaviorRow> comparisons = behavior_comparisons(fits);
    rows.insert(rows.end(), comparisons.begin(), comparisons.end());

    TextTable t;
    t.comments = {"run " + ctx.manifest.run_id, "estimates in basis points of daily log units"};
    t.header = {"behavior", "level", "lag", "estimate_bps", "se_bps", "wald", "p_value", "stars"};
    KvPairs kv;
    for (const BehaviorRow& r : rows) {
        t.rows.push_back({r.behavior, r.level, std::to_string(r.lag),
                          fmt_fixed(r.value.estimate * 1e4, 2), fmt_fixed(r.value.std_error * 1e4, 2),
                          fmt_fixed(r.value.wald_stat, 4), fmt_double(r.value.p_value),
                          significance_stars(r.value.p_value)});
        std::string key = r.behavior + "." + r.level;
        kv.emplace_back(key + ".estimate", fmt_double(r.value.estimate));
        kv.emplace_back(key + ".variance", fmt_double(r.value.variance));
        kv.emplace_back(key + ".wald", fmt_double(r.value.wald_stat));
        kv.emplace_back(key + ".p_value", fmt_double(r.value.p_value));
    }
    write_table(ctx.run_dir / ("behaviors_" + tag + ".tsv"), t);
    write_kv(ctx.run_dir / ("behaviors_" + tag + ".txt"), kv);
    detail::commit_stage(ctx, "behaviors:" + tag, outputs, started);
}

inline void stage_report(StageContext& ctx, const StageOptions& opt) {
    const std::string tag = spec_tag(opt);
    const std::vector<std::string> outputs = {
        "table_coefficients_" + tag + ".tsv", "table_behaviors_" + tag + ".tsv",
        "figure_" + opt.figure + "_by_group.tsv", "figure_" + opt.figure + "_by_lag.tsv"};
    if (detail::stage_current(ctx, "report:" + tag, outputs)) return;
    for (const std::string& f : {"fits_" + tag + ".tsv", "behaviors_" + tag + ".tsv"})
        verify_input(ctx.manifest, ctx.run_dir, f);
    auto started = std::chrono::steady_clock::now();

    std::vector<FitResult> fits = read_fits(ctx.run_dir, tag);

    // Coefficient table: group coefficients in bps with stars, lags across.
    {
        TextTable t;
        t.comments = {"run " + ctx.manifest.run_id,
                      "group coefficients in basis points; cluster-robust stars"};
        t.header = {"label"};
        for (const FitResult& f : fits) t.header.push_back("lag" + std::to_string(f.lag));
        size_t n_groups = fits.front().levels.size() * kNumGroups;
        for (size_t i = 0; i < n_groups; ++i) {
            std::vector<std::string> row{fits.front().labels[i]};
            for (const FitResult& f : fits) {
                double se = f.se(i);
                double z = se > 0.0 ? f.beta[i] / se : 0.0;
                row.push_back(fmt_fixed(f.beta[i] * 1e4, 2) +
                              significance_stars(chisq1_sf(z * z)));
            }
            t.rows.push_back(std::move(row));
        }
        write_table(ctx.run_dir / ("table_coefficients_" + tag + ".tsv"), t);
    }
    // Behavior table: pass the stage file through in paper shape.
    {
        TextTable src = read_table(ctx.run_dir / ("behaviors_" + tag + ".tsv"));
        TextTable t;
        t.comments = {"run " + ctx.manifest.run_id};
        t.header = {"behavior", "level", "estimate_bps", "se_bps"};
        size_t cb = src.column("behavior"), cl = src.column("level"), ce = src.column("estimate_bps"),
               cs = src.column("se_bps"), cst = src.column("stars");
        for (const auto& r : src.rows)
            t.rows.push_back({r[cb], r[cl], r[ce] + r[cst], r[cs]});
        write_table(ctx.run_dir / ("table_behaviors_" + tag + ".tsv"), t);
    }
    // Figure data: coefficient profiles by group and by lag (bps).
    {
        TextTable by_group;
        by_group.comments = {"run " + ctx.manifest.run_id, "x = return group; series = lag"};
        by_group.header = {"group"};
        for (const FitResult& f : fits) by_group.header.push_back("lag" + std::to_string(f.lag));
        size_t n_groups = fits.front().levels.size() * kNumGroups;
        for (size_t i = 0; i < n_groups; ++i) {
            std::vector<std::string> row{fits.front().labels[i]};
            for (const FitResult& f : fits) row.push_back(fmt_double(f.beta[i] * 1e4));
            by_group.rows.push_back(std::move(row));
        }
        write_table(ctx.run_dir / ("figure_" + opt.figure + "_by_group.tsv"), by_group);

        TextTable by_lag;
        by_lag.comments = {"run " + ctx.manifest.run_id, "x = lag; series = return group"};
        by_lag.header = {"lag"};
        for (size_t i = 0; i < n_groups; ++i) by_lag.header.push_back(fits.front().labels[i]);
        for (const FitResult& f : fits) {
            std::vector<std::string> row{std::to_string(f.lag)};
            for (size_t i = 0; i < n_groups; ++i) row.push_back(fmt_double(f.beta[i] * 1e4));
            by_lag.rows.push_back(std::move(row));
        }
        write_table(ctx.run_dir / ("figure_" + opt.figure + "_by_lag.tsv"), by_lag);
    }
    detail::commit_stage(ctx, "report:" + tag, outputs, started);
}

}  // namespace hfpanel
