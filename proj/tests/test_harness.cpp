#include "pias/harness.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace pias;
using namespace pias::harness;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string &name) {
    const fs::path dir = fs::temp_directory_path() / ("pias_harness_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

// One suite, d = 2, three functions x two instances, two optimizers.
nlohmann::json minimal_json(const fs::path &out) {
    return nlohmann::json{
        {"suites", {"BBOB_LITE"}},
        {"dimensions", {2}},
        {"budget_factors", {10, 25}},
        {"ela_budget_factors", {5, 10}},
        {"portfolio_sizes", {1, "full"}},
        {"manifest_portfolio_size", 1},
        {"optimizers", {"ONE_PLUS_ONE_ES", "RANDOM_SEARCH"}},
        {"n_reps", 5},
        {"instances", {{"bbob_functions", {1, 3, 7}}, {"bbob_instances", 2}}},
        {"master_seed", 5},
        {"fold_count", 2},
        {"forest", {{"trees", 20}}},
        {"output_dir", out.string()},
        {"jobs", 2},
    };
}

std::map<std::string, std::string> snapshot(const fs::path &root) {
    std::map<std::string, std::string> files;
    for (const auto &entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            files[fs::relative(entry.path(), root).string()] = read_file(entry.path());
        }
    }
    return files;
}

std::vector<std::vector<std::string>> read_csv(const fs::path &path) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            cells.push_back(cell);
        }
        if (!line.empty() && line.back() == ',') {
            cells.emplace_back();
        }
        rows.push_back(cells);
    }
    return rows;
}

int run_cli(const std::string &args) {
    const std::string cmd = std::string(PIAS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write_text(const fs::path &path, const std::string &text) {
    std::ofstream(path) << text;
}

}  // namespace

TEST_SUITE("harness") {
    TEST_CASE("config parsing, defaults, and grid arithmetic") {
        const auto c = GridConfig::from_json(nlohmann::json::object());
        CHECK(c.dimensions == std::vector<int>{2, 5});
        CHECK(c.portfolio_sizes == std::vector<int>{4, 0});
        CHECK(c.optimizers.size() == 8);
        CHECK(c.instance_seed == c.master_seed);
        CHECK(c.max_budget(2) == 1000);
        // Pairs with B_ELA < B: 1 + 2 + 2 + 3 + 4 + 5 + 6.
        CHECK(c.scenario_pairs().size() == 23);
        CHECK(c.scenario_count() == 3 * 2 * 2 * 23);
        const auto cp = c.checkpoints(2);
        CHECK(std::is_sorted(cp.begin(), cp.end()));
        for (const auto &[f, e] : c.scenario_pairs()) {
            CHECK(e < f);
            CHECK(std::binary_search(cp.begin(), cp.end(), f * 2));
            CHECK(std::binary_search(cp.begin(), cp.end(), (f - e) * 2));
        }
        CHECK(std::binary_search(cp.begin(), cp.end(), 10));

        CHECK_THROWS_AS(GridConfig::from_json({{"budget_factor", {10}}}), ConfigError);
        CHECK_THROWS_AS(GridConfig::from_json({{"dimensions", {0}}}), ConfigError);
        CHECK_THROWS_AS(GridConfig::from_json({{"suites", {"NOPE"}}}), ConfigError);
        CHECK_THROWS_AS(GridConfig::from_json({{"n_reps", "five"}}), ConfigError);

        auto capped = c;
        capped.cap_budget_factor(50);
        CHECK(capped.budget_factors == std::vector<int>{10, 15, 25, 50});
        CHECK_THROWS_AS(capped.cap_budget_factor(5), ConfigError);

        const auto back = GridConfig::from_json(c.to_json());
        CHECK(back.to_json() == c.to_json());
        CHECK(back.run_hash(suites::SuiteId::RogLite, 2) == c.run_hash(suites::SuiteId::RogLite, 2));
        CHECK(c.run_hash(suites::SuiteId::RogLite, 2).size() == 16);
        auto other = c;
        other.n_reps = 4;
        CHECK(other.run_hash(suites::SuiteId::RogLite, 2) != c.run_hash(suites::SuiteId::RogLite, 2));
        auto jobs_only = c;
        jobs_only.jobs = 7;
        CHECK(jobs_only.run_hash(suites::SuiteId::RogLite, 2) == c.run_hash(suites::SuiteId::RogLite, 2));
    }

    TEST_CASE("trajectory CSV roundtrip") {
        const auto f = suites::bbob_instance(2, 1, 2);
        std::vector<optim::Trajectory> runs{optim::run(optim::OptimizerId::Pso, f, 40, 3),
                                            optim::run(optim::OptimizerId::SaGauss, f, 40, 4)};
        const std::vector<int> keep{10, 20, 40};
        runs[1] = runs[1].downsampled(keep);
        std::stringstream ss;
        write_trajectories_csv(ss, runs);
        CHECK(read_trajectories_csv(ss) == runs);
    }

    TEST_CASE("commands in the wrong order report missing dependencies") {
        const auto dir = fresh_dir("missing");
        const auto config = GridConfig::from_json(minimal_json(dir));
        CHECK_THROWS_AS(cmd_build_portfolio(config), MissingDependency);
        CHECK_THROWS_AS(cmd_select(config), MissingDependency);
        CHECK_THROWS_AS(cmd_report(dir / "results", dir / "report"), MissingDependency);
    }

    TEST_CASE("minimal grid end to end") {
        const auto dir = fresh_dir("grid");
        const auto config = GridConfig::from_json(minimal_json(dir));
        const fs::path suite = suite_dir(config, suites::SuiteId::BbobLite, 2);

        // Files: 2 trajectory files + (features + sample best) x 2 feature budgets.
        const auto first = cmd_run_suite(config);
        CHECK(first.trajectory_files_written == 2);
        CHECK(first.feature_files_written == 4);
        CHECK(first.files_skipped == 0);
        CHECK(fs::exists(suite / "manifest.json"));
        CHECK(fs::exists(suite / "instances.json"));
        const auto after_run = snapshot(dir);
        CHECK(after_run.size() == 8);

        const auto again = cmd_run_suite(config);
        CHECK(again.trajectory_files_written == 0);
        CHECK(again.feature_files_written == 0);
        CHECK(again.files_skipped == 6);
        CHECK(snapshot(dir) == after_run);

        const fs::path victim = suite / "trajectories" / "RANDOM_SEARCH.csv";
        REQUIRE(fs::exists(victim));
        fs::remove(victim);
        const auto repaired = cmd_run_suite(config);
        CHECK(repaired.trajectory_files_written == 1);
        CHECK(repaired.feature_files_written == 0);
        CHECK(snapshot(dir) == after_run);

        CHECK(cmd_build_portfolio(config) == 2);
        const auto manifest = nlohmann::json::parse(read_file(suite / "portfolios" / "B10.json"));
        CHECK(manifest["members"].size() == 1);
        CHECK(load_portfolio(config, suites::SuiteId::BbobLite, 2, 25).size() == 1);

        // 1 suite x 1 d x 2 sizes x 3 pairs.
        const auto sel = cmd_select(config);
        CHECK(sel.rows == 6);
        CHECK(sel.rows == config.scenario_count());
        const auto rows = read_csv(results_dir(config) / "scenarios.csv");
        REQUIRE(rows.size() == 7);
        const auto &header = rows[0];
        const auto col = [&](const std::string &name) {
            return static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
        };
        REQUIRE(col("gap_closed") < header.size());
        REQUIRE(col("flags") < header.size());
        for (std::size_t r = 1; r < rows.size(); ++r) {
            CHECK(rows[r].size() == header.size());
            const bool singleton = rows[r][col("portfolio_size")] == "1";
            if (singleton) {
                // A one-member portfolio has VBS = SBS: flagged, and no gap number.
                CHECK(rows[r][col("gap_closed")].empty());
                CHECK(rows[r][col("flags")].find("undefined_gap") != std::string::npos);
            }
        }
        const std::string csv_bytes = read_file(results_dir(config) / "scenarios.csv");
        const auto summary = nlohmann::json::parse(read_file(results_dir(config) / "run_summary.json"));
        CHECK(summary["scenario_count"] == 6);

        cmd_select(config);
        CHECK(read_file(results_dir(config) / "scenarios.csv") == csv_bytes);

        const fs::path report = dir / "report";
        cmd_report(results_dir(config), report);
        for (const char *name : {"fig2_heatmap.csv", "fig3_gap_closed_bbob.csv", "fig4_gap_closed_other.csv",
                                 "fig5_pias_vs_sbs.csv", "fig5_instances.csv", "fig6_decomposition.csv",
                                 "fig7_relative_budget_loss.csv", "fig7_curve.csv", "summary.json"}) {
            CHECK(fs::exists(report / name));
        }
        const auto rel = read_csv(report / "fig7_relative_budget_loss.csv");
        for (std::size_t r = 1; r < rel.size(); ++r) {
            const double v = std::stod(rel[r].back());
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        std::size_t unflagged = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            unflagged += rows[r][col("flags")].empty() ? 1 : 0;
        }
        CHECK(read_csv(report / "fig5_pias_vs_sbs.csv").size() - 1 == unflagged);
        CHECK(unflagged > 0);

        // The "mean" row of each heatmap block is the mean of its function rows.
        const auto heat = read_csv(report / "fig2_heatmap.csv");
        std::map<std::string, std::vector<double>> blocks;
        for (std::size_t r = 1; r < heat.size(); ++r) {
            std::string key;
            for (std::size_t c = 0; c < 5; ++c) {
                key += heat[r][c] + "|";
            }
            const double pias = std::stod(heat[r][6]);
            if (heat[r][5] == "mean") {
                const auto &v = blocks[key];
                REQUIRE(v.size() == 3);
                CHECK(pias == doctest::Approx((v[0] + v[1] + v[2]) / 3.0).epsilon(1e-12));
            } else {
                blocks[key].push_back(pias);
            }
        }
        CHECK_FALSE(blocks.empty());

        // A second output directory reproduces every byte.
        const auto twin_dir = fresh_dir("grid_twin");
        const auto twin = GridConfig::from_json(minimal_json(twin_dir));
        cmd_run_suite(twin);
        cmd_build_portfolio(twin);
        cmd_select(twin);
        cmd_report(results_dir(twin), twin_dir / "report");
        CHECK(snapshot(twin_dir) == snapshot(dir));
    }

    TEST_CASE("mismatched or foreign stores are refused") {
        const auto dir = fresh_dir("mismatch");
        auto node = minimal_json(dir);
        node["budget_factors"] = {10};
        node["ela_budget_factors"] = {5};
        cmd_run_suite(GridConfig::from_json(node));
        node["n_reps"] = 4;
        CHECK_THROWS_AS(cmd_run_suite(GridConfig::from_json(node)), ConfigError);
        CHECK_THROWS_AS(load_suite(GridConfig::from_json(node), suites::SuiteId::BbobLite, 2), ConfigError);

        const auto foreign = fresh_dir("foreign");
        auto other = minimal_json(foreign);
        const auto c = GridConfig::from_json(other);
        const auto sdir = suite_dir(c, suites::SuiteId::BbobLite, 2);
        fs::create_directories(sdir);
        write_text(sdir / "stray.txt", "x");
        CHECK_THROWS_AS(cmd_run_suite(c), ConfigError);
    }

    TEST_CASE("CLI exit codes") {
        const auto dir = fresh_dir("cli");
        write_text(dir / "bad.json", "{\"not_a_key\": 1}");
        write_text(dir / "broken.json", "{");
        auto node = minimal_json(dir / "out");
        node["budget_factors"] = {10};
        node["ela_budget_factors"] = {5};
        node["portfolio_sizes"] = {"full"};
        write_text(dir / "good.json", node.dump());

        CHECK(run_cli("run-suite --config " + (dir / "bad.json").string()) == 2);
        CHECK(run_cli("run-suite --config " + (dir / "broken.json").string()) == 2);
        CHECK(run_cli("run-suite --config " + (dir / "absent.json").string()) == 2);
        CHECK(run_cli("run-suite") == 2);
        CHECK(run_cli("no-such-command") == 2);
        CHECK(run_cli("select --config " + (dir / "good.json").string()) == 3);
        CHECK(run_cli("report --results " + (dir / "nothing").string() + " --out " + (dir / "r").string()) == 3);
        CHECK(run_cli("run-suite --config " + (dir / "good.json").string()) == 0);
        CHECK(run_cli("build-portfolio --config " + (dir / "good.json").string()) == 0);
        CHECK(run_cli("select --config " + (dir / "good.json").string()) == 0);
        CHECK(run_cli("report --results " + (dir / "out" / "results").string() + " --out " + (dir / "r").string()) ==
              0);
        CHECK(run_cli("select --config " + (dir / "good.json").string() + " --seed 9") == 2);
        CHECK(run_cli("--help") == 0);
    }
}
