#include "pias/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>

namespace {

constexpr int kConfigError = 2;
constexpr int kMissingDependency = 3;

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> jobs;
    std::optional<int> max_budget_factor;
};

pias::harness::GridConfig configure(const std::string &path, const Overrides &o) {
    auto config = pias::harness::load_config(path);
    if (o.seed) {
        config.master_seed = *o.seed;
    }
    if (o.jobs) {
        config.jobs = *o.jobs;
    }
    if (o.max_budget_factor) {
        config.cap_budget_factor(*o.max_budget_factor);
    }
    return config;
}

void add_overrides(CLI::App *cmd, std::string &config_path, Overrides &o) {
    cmd->add_option("--config", config_path, "grid configuration (JSON)")->required();
    cmd->add_option("--seed", o.seed, "override master_seed");
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
    cmd->add_option("--max-budget-factor", o.max_budget_factor, "drop budget factors above this value");
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Budget-aware per-instance algorithm selection grid runner"};
    app.require_subcommand(1);

    std::string config_path;
    Overrides overrides;
    std::string results_path;
    std::string out_path;

    auto *run = app.add_subcommand("run-suite", "run optimizers and feature sampling");
    add_overrides(run, config_path, overrides);
    auto *build = app.add_subcommand("build-portfolio", "select size-k sub-portfolios");
    add_overrides(build, config_path, overrides);
    auto *select = app.add_subcommand("select", "evaluate every selection scenario");
    add_overrides(select, config_path, overrides);
    auto *report = app.add_subcommand("report", "write figure data from a results directory");
    report->add_option("--results", results_path, "results directory written by select")->required();
    report->add_option("--out", out_path, "output directory for figure CSVs")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kConfigError;
    }

    try {
        if (run->parsed()) {
            const auto summary = pias::harness::cmd_run_suite(configure(config_path, overrides));
            std::printf("run-suite: %d trajectory files, %d feature files written, %d skipped\n",
                        summary.trajectory_files_written, summary.feature_files_written, summary.files_skipped);
        } else if (build->parsed()) {
            const int written = pias::harness::cmd_build_portfolio(configure(config_path, overrides));
            std::printf("build-portfolio: %d manifests\n", written);
        } else if (select->parsed()) {
            const auto config = configure(config_path, overrides);
            const auto summary = pias::harness::cmd_select(config);
            std::printf("select: %zu scenarios (%zu flagged), expected %zu\n", summary.rows, summary.flagged,
                        config.scenario_count());
        } else if (report->parsed()) {
            pias::harness::cmd_report(results_path, out_path);
            std::printf("report: written to %s\n", out_path.c_str());
        }
    } catch (const pias::harness::ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const pias::harness::MissingDependency &e) {
        std::cerr << "missing dependency: " << e.what() << '\n';
        return kMissingDependency;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
