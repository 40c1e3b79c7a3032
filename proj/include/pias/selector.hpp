#pragma once

#include "pias/features.hpp"
#include "pias/forest.hpp"
#include "pias/normalize.hpp"
#include "pias/optimizers.hpp"
#include "pias/perfdb.hpp"
#include "pias/suites.hpp"

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pias::selection {

class UndefinedGap : public std::domain_error {
public:
    UndefinedGap() : std::domain_error("undefined gap: vbs equals sbs") {}
};

class NoUsableFeatures : public std::runtime_error {
public:
    NoUsableFeatures() : std::runtime_error("no usable features") {}
};

/// B = B_ELA + B_opt with 0 < B_ELA < B.
struct BudgetSplit {
    int total = 0;
    int ela = 0;

    int opt() const { return total - ela; }
    static BudgetSplit make(int total, int ela);

    bool operator==(const BudgetSplit &) const = default;
};

/// Index into `portfolio` of the largest value; ties go to the lower canonical index.
std::size_t argmax_canonical(std::span<const double> values, std::span<const optim::OptimizerId> portfolio);

/// Single best solver over the given table rows (instance indices) at `budget`.
optim::OptimizerId sbs_full(const perf::PerformanceTable &table, std::span<const std::size_t> instances,
                            std::span<const optim::OptimizerId> portfolio, int budget);

struct VbsEntry {
    double best_perf = 0.0;
    optim::OptimizerId best_algorithm = optim::OptimizerId::RandomSearch;
};

/// Per-instance virtual best at `budget` (mean over repetitions).
std::vector<VbsEntry> vbs(const perf::PerformanceTable &table, std::span<const std::size_t> instances,
                          std::span<const optim::OptimizerId> portfolio, int budget);

struct SelectorModel {
    RegressionForest forest;
    std::vector<std::string> retained;
    std::vector<optim::OptimizerId> portfolio;
    int fold = 0;
    std::uint64_t seed = 0;

    /// Predicted performance per portfolio member. Throws std::out_of_range
    /// when a retained feature is missing from `features`.
    std::vector<double> predict(const features::FeatureVector &features) const;
};

/// Fits the forest on rows of `features` restricted to `retained`; `targets`
/// is aligned with `features` (repetitions of one instance share a target).
SelectorModel train_selector(std::span<const features::FeatureVector> features,
                             std::span<const std::vector<double>> targets, std::span<const std::string> retained,
                             std::span<const optim::OptimizerId> portfolio, const ForestConfig &config,
                             std::uint64_t seed, int fold = 0);

optim::OptimizerId predict_select(const SelectorModel &model, const features::FeatureVector &features);

double pias_perf(double ela_perf, double selected_perf);

/// (pias - sbs) / (vbs - sbs). Throws UndefinedGap when vbs == sbs.
double gap_closed(double sbs, double vbs, double pias);

struct LossDecomposition {
    double budget_loss = 0.0;
    double selection_loss = 0.0;
    /// Absent when vbs_full <= pias.
    std::optional<double> relative_budget_loss;
};

LossDecomposition decompose_loss(double vbs_full, double vbs_opt, double pias);

/// Partitions the distinct ids into k near-equal folds after a seeded shuffle.
std::vector<std::vector<int>> cv_split(std::span<const int> ids, int k, std::uint64_t seed);

/// Features of one sampled repetition and the best raw score of its sample.
struct FeatureRecord {
    features::FeatureVector features;
    double best_score = 0.0;
};

/// Feature vectors for one (suite, d, B_ELA): instance uid -> one record per repetition.
struct FeatureStore {
    int ela_budget = 0;
    std::map<int, std::vector<FeatureRecord>> by_instance;

    const std::vector<FeatureRecord> &at(int uid) const;
};

struct Scenario {
    suites::SuiteId suite = suites::SuiteId::BbobLite;
    int dimension = 0;
    std::vector<optim::OptimizerId> portfolio;
    BudgetSplit split;
    int fold_count = 5;
    std::uint64_t master_seed = 0;
    ForestConfig forest;
};

/// Training input handed to a selector factory for one fold.
struct TrainingSet {
    std::vector<features::FeatureVector> rows;
    std::vector<std::vector<double>> targets;
    std::vector<std::string> retained;
    std::vector<optim::OptimizerId> portfolio;
    int fold = 0;
    std::uint64_t seed = 0;
};

using Chooser = std::function<optim::OptimizerId(const features::FeatureVector &)>;
using Trainer = std::function<Chooser(const TrainingSet &)>;

/// Factory for the regression-forest selector.
Trainer forest_trainer(const ForestConfig &config);

/// One (test instance, feature repetition) outcome.
struct RepRecord {
    int instance_uid = 0;
    int repetition = 0;
    optim::OptimizerId selected = optim::OptimizerId::RandomSearch;
    double ela_perf = 0.0;
    double a_star_perf = 0.0;
    double pias_perf = 0.0;
    double vbs_full = 0.0;
    double vbs_opt = 0.0;
    double budget_loss = 0.0;
    double selection_loss = 0.0;
};

/// Per test instance means over the feature repetitions.
struct InstanceSummary {
    int instance_uid = 0;
    int function_id = 0;
    int fold = 0;
    optim::OptimizerId sbs = optim::OptimizerId::RandomSearch;
    double sbs_perf = 0.0;
    double vbs_full = 0.0;
    double vbs_opt = 0.0;
    double ela_perf = 0.0;
    double a_star_perf = 0.0;
    double pias_perf = 0.0;
    double budget_loss = 0.0;
    double selection_loss = 0.0;
};

struct ScenarioResult {
    suites::SuiteId suite = suites::SuiteId::BbobLite;
    int dimension = 0;
    std::vector<optim::OptimizerId> portfolio;
    BudgetSplit split;

    std::vector<RepRecord> records;
    std::vector<InstanceSummary> instances;
    /// SBS_full of each fold, computed on its training instances.
    std::vector<optim::OptimizerId> fold_sbs;

    double sbs_perf = 0.0;
    double vbs_full = 0.0;
    double vbs_opt = 0.0;
    double ela_perf = 0.0;
    double a_star_perf = 0.0;
    double pias_perf = 0.0;
    std::optional<double> gap_closed;
    double budget_loss = 0.0;
    double selection_loss = 0.0;
    std::optional<double> relative_budget_loss;
    std::vector<std::string> flags;

    int b_factor() const { return split.total / dimension; }
    int ela_factor() const { return split.ela / dimension; }
    bool has_flag(std::string_view flag) const;
};

/// Runs leave-instance-out cross-validation of one scenario.
///
/// `normalizers` is aligned with `table.instance_ids()`; `instances` provides
/// the CV grouping and function ids. An empty `trainer` uses the forest.
ScenarioResult evaluate_scenario(const Scenario &scenario, const suites::InstanceSet &instances,
                                 const perf::PerformanceTable &table, const FeatureStore &store,
                                 std::span<const perf::Normalizer> normalizers, const Trainer &trainer = {});

/// Result of selecting and running on a live instance with budget B.
struct LiveOutcome {
    optim::OptimizerId selected = optim::OptimizerId::RandomSearch;
    double ela_perf = 0.0;
    double a_star_perf = 0.0;
    double pias_perf = 0.0;
};

/// Samples B_ELA points from `plan`, selects with `chooser`, runs the choice
/// for B_opt evaluations. Every objective call goes through `evaluate`.
LiveOutcome solve_instance(const suites::ProblemInstance &instance, const Chooser &chooser, const BudgetSplit &split,
                           const sampling::SamplePlan &plan, const perf::Normalizer &normalizer,
                           const std::function<std::uint64_t(optim::OptimizerId)> &optimizer_seed,
                           int planning_budget, const features::EvaluateFn &evaluate);

Chooser model_chooser(const SelectorModel &model);

nlohmann::json to_json(const ScenarioResult &result);
ScenarioResult scenario_result_from_json(const nlohmann::json &node);

/// Flat CSV schema for grid-level analysis.
std::string scenario_csv_header();
std::string scenario_csv_row(const ScenarioResult &result);

}  // namespace pias::selection
