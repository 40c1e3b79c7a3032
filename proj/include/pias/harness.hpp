#pragma once

#include "pias/forest.hpp"
#include "pias/normalize.hpp"
#include "pias/optimizers.hpp"
#include "pias/perfdb.hpp"
#include "pias/selector.hpp"
#include "pias/suites.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace pias::harness {

/// Invalid configuration or a store written under a different configuration (exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A command ran before the data it consumes exists (exit code 3).
class MissingDependency : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExcludedInstance {
    suites::SuiteId suite = suites::SuiteId::RogLite;
    int dimension = 0;
    int uid = 0;
};

struct GridConfig {
    std::vector<suites::SuiteId> suites{suites::SuiteId::BbobLite, suites::SuiteId::MabbobLite,
                                        suites::SuiteId::RogLite};
    std::vector<int> dimensions{2, 5};
    std::vector<int> budget_factors{10, 15, 25, 50, 100, 250, 500};
    std::vector<int> ela_budget_factors{5, 10, 25, 50, 100, 250};
    /// 0 stands for the full portfolio.
    std::vector<int> portfolio_sizes{4, 0};
    int manifest_portfolio_size = 4;
    std::vector<optim::OptimizerId> optimizers{optim::all_optimizers.begin(), optim::all_optimizers.end()};
    int n_reps = 5;
    suites::InstanceCounts instances;
    std::uint64_t instance_seed = 0;
    std::vector<ExcludedInstance> excluded;
    std::uint64_t master_seed = 1;
    std::filesystem::path output_dir = "out";
    unsigned jobs = 0;
    bool store_full_trajectories = false;
    int fold_count = 5;
    selection::ForestConfig forest;
    int shapley_permutations = 200;
    int portfolio_iterations = 500;

    static GridConfig from_json(const nlohmann::json &node);
    nlohmann::json to_json() const;

    /// Drops budget factors above `factor`; throws ConfigError when none remain.
    void cap_budget_factor(int factor);

    int max_budget(int dimension) const;
    /// Sorted budgets recorded per trajectory and tabulated: every B, every
    /// valid B_opt, the default grid, and the ROG window ends.
    std::vector<int> checkpoints(int dimension) const;
    /// (B_factor, B_ELA_factor) pairs with B_ELA < B, in config order.
    std::vector<std::pair<int, int>> scenario_pairs() const;
    /// Feature budget factors needed by at least one valid pair.
    std::vector<int> used_ela_factors() const;
    /// Number of scenarios cmd_select emits: sum over (suite, d) of |sizes| x |pairs|.
    std::size_t scenario_count() const;
    /// Hash of every field that determines the run-suite store of one (suite, d).
    std::string run_hash(suites::SuiteId suite, int dimension) const;
};

/// Throws ConfigError for unreadable or invalid files.
GridConfig load_config(const std::filesystem::path &path);

std::filesystem::path suite_dir(const GridConfig &config, suites::SuiteId suite, int dimension);
std::filesystem::path results_dir(const GridConfig &config);

struct RunSummary {
    int trajectory_files_written = 0;
    int feature_files_written = 0;
    int files_skipped = 0;
};

/// Runs every optimizer and feature sample the grid needs; skips files
/// already present. Throws ConfigError when the stored manifest hash differs.
RunSummary cmd_run_suite(const GridConfig &config);

/// Writes one size-k manifest per (suite, d, B_factor); returns the count.
int cmd_build_portfolio(const GridConfig &config);

struct SelectSummary {
    std::size_t rows = 0;
    std::size_t flagged = 0;
};

/// Evaluates every scenario; failures become flagged rows.
SelectSummary cmd_select(const GridConfig &config);

/// Reads a results directory and writes the figure CSVs into `out`.
void cmd_report(const std::filesystem::path &results, const std::filesystem::path &out);

/// Everything derived from the trajectory store of one (suite, d).
struct SuiteData {
    suites::InstanceSet instances;
    std::vector<optim::Trajectory> trajectories;
    /// Aligned with instances.instance_ids.
    std::vector<perf::Normalizer> normalizers;
    perf::PerformanceTable table;
};

SuiteData load_suite(const GridConfig &config, suites::SuiteId suite, int dimension);
selection::FeatureStore load_features(const GridConfig &config, suites::SuiteId suite, int dimension,
                                      int ela_factor);
std::vector<optim::OptimizerId> load_portfolio(const GridConfig &config, suites::SuiteId suite, int dimension,
                                               int b_factor);

/// Per-instance normalizers: attainment when the optimum is known, run
/// extrema over [5d, max budget] otherwise.
std::vector<perf::Normalizer> make_normalizers(const suites::InstanceSet &instances,
                                               std::span<const optim::Trajectory> trajectories, int window_start,
                                               int window_end);

/// Columns: optimizer,instance_id,rep,seed,length,budget,best.
void write_trajectories_csv(std::ostream &out, std::span<const optim::Trajectory> trajectories);
std::vector<optim::Trajectory> read_trajectories_csv(std::istream &in);

/// Writes `content` to `path` through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);
std::string read_file(const std::filesystem::path &path);

}  // namespace pias::harness
