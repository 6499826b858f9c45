// Command line front end for the holdings-panel toolkit.
//
//   hfpanel ingest    --config pipeline.cfg [--out runs] [--delay 30]
//   hfpanel panel     --config pipeline.cfg ...
//   hfpanel vol       --config pipeline.cfg ...
//   hfpanel regress   --config pipeline.cfg --subgroup kind --dependent dn --frequency hf
//   hfpanel behaviors --config pipeline.cfg ...
//   hfpanel daily     --config pipeline.cfg ...
//   hfpanel report    --config pipeline.cfg [--figure main] ...
//   hfpanel synth     --data-dir data [--seed N] [--stocks N] [--days N]
//
// Stages write into a run directory named by a digest of the toolkit version,
// the configuration, and the input files, so distinct configurations never
// collide and re-runs are no-ops.  A stage refuses to run when its
// prerequisites are missing or were produced from files that have since
// changed.  Exit codes: 0 success, 1 data or numeric failure, 2 usage error.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hfpanel/pipeline.hpp"
#include "hfpanel/synth.hpp"

namespace {

// Attach the options shared by every pipeline stage.
void add_stage_options(CLI::App* cmd, hfpanel::StageOptions& opt, bool spec_flags) {
    cmd->add_option("--config", opt.config_path, "pipeline configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt.out_root, "root directory for run outputs");
    cmd->add_option("--workers", opt.workers,
                    "worker threads (0 = HFPANEL_WORKERS or hardware default)");
    cmd->add_option("--delay", opt.delay_override, "override the snapshot delay in minutes")
        ->check(CLI::IsMember({30, 45, 60}));
    cmd->add_flag("--quiet", opt.quiet, "suppress progress output");
    if (spec_flags) {
        cmd->add_option("--subgroup", opt.subgroup, "sample split for the regressions")
            ->check(CLI::IsMember({"none", "kind", "covid", "size", "sector"}));
        cmd->add_option("--dependent", opt.dependent, "dependent variable")
            ->check(CLI::IsMember({"dn", "dn_detrended"}));
        cmd->add_option("--frequency", opt.frequency, "observation frequency")
            ->check(CLI::IsMember({"hf", "daily"}));
    }
}

int check_spec_combo(const hfpanel::StageOptions& opt) {
    if (opt.frequency == "daily" && opt.subgroup == "kind") {
        std::cerr << "error: --subgroup kind splits intraday from overnight intervals and is "
                     "undefined with --frequency daily\n";
        return 2;
    }
    if (opt.frequency == "daily" && opt.dependent == "dn_detrended") {
        std::cerr << "error: --dependent dn_detrended is only defined with --frequency hf\n";
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"retail holdings panel toolkit"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "help for every subcommand");

    hfpanel::StageOptions opt;

    CLI::App* c_ingest = app.add_subcommand("ingest", "clean raw snapshots and trades");
    CLI::App* c_panel = app.add_subcommand("panel", "build the interval panel");
    CLI::App* c_vol = app.add_subcommand("vol", "standardize returns by estimated volatility");
    CLI::App* c_daily = app.add_subcommand("daily", "build the close-to-close panel");
    CLI::App* c_regress = app.add_subcommand("regress", "fit the lagged response regressions");
    CLI::App* c_behaviors = app.add_subcommand("behaviors", "evaluate the behavior contrasts");
    CLI::App* c_report = app.add_subcommand("report", "write presentation tables and figure data");
    add_stage_options(c_ingest, opt, false);
    add_stage_options(c_panel, opt, false);
    add_stage_options(c_vol, opt, false);
    add_stage_options(c_daily, opt, false);
    add_stage_options(c_regress, opt, true);
    add_stage_options(c_behaviors, opt, true);
    add_stage_options(c_report, opt, true);
    std::string figure = "main";
    c_report->add_option("--figure", figure, "figure data set to emit");

    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic raw data set");
    std::string data_dir = "data";
    std::string synth_config;
    uint64_t seed = 0;
    int stocks = 0, days = 0;
    c_synth->add_option("--data-dir", data_dir, "directory for the generated files");
    c_synth->add_option("--config", synth_config, "file with generator overrides")
        ->check(CLI::ExistingFile);
    c_synth->add_option("--seed", seed, "generator seed");
    c_synth->add_option("--stocks", stocks, "number of securities");
    c_synth->add_option("--days", days, "number of trading days");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (c_synth->parsed()) {
            hfpanel::DgpConfig cfg;
            if (!synth_config.empty())
                cfg = hfpanel::DgpConfig::from_config(hfpanel::Config::from_file(synth_config));
            if (seed != 0) cfg.seed = seed;
            if (stocks != 0) cfg.n_stocks = stocks;
            if (days != 0) cfg.n_days = days;
            hfpanel::SynthResult res = hfpanel::generate_dgp(cfg);
            hfpanel::write_dgp_files(res, data_dir);
            std::cout << "synth: " << cfg.n_stocks << " securities x " << cfg.n_days
                      << " trading days -> " << data_dir << "\n";
            return 0;
        }

        opt.figure = figure;
        if (c_regress->parsed() || c_behaviors->parsed() || c_report->parsed()) {
            if (int rc = check_spec_combo(opt); rc != 0) return rc;
        }

        hfpanel::StageContext ctx = hfpanel::open_run(opt);
        if (!ctx.quiet) std::cout << "run " << ctx.manifest.run_id << "\n";
        if (c_ingest->parsed()) hfpanel::stage_ingest(ctx);
        else if (c_panel->parsed()) hfpanel::stage_panel(ctx);
        else if (c_vol->parsed()) hfpanel::stage_vol(ctx);
        else if (c_daily->parsed()) hfpanel::stage_daily(ctx);
        else if (c_regress->parsed()) hfpanel::stage_regress(ctx, opt);
        else if (c_behaviors->parsed()) hfpanel::stage_behaviors(ctx, opt);
        else if (c_report->parsed()) hfpanel::stage_report(ctx, opt);
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
