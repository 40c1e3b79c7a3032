#pragma once

#include "pias/suites.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

namespace pias::optim {

/// Canonical order doubles as the tie-breaking order everywhere.
enum class OptimizerId : int {
    RandomSearch = 0,
    OnePlusOneEs,
    DeRand1Bin,
    Pso,
    NelderMeadRestart,
    SaGauss,
    CmaDiag,
    SobolSearch,
};

inline constexpr std::array<OptimizerId, 8> all_optimizers = {
    OptimizerId::RandomSearch, OptimizerId::OnePlusOneEs,      OptimizerId::DeRand1Bin, OptimizerId::Pso,
    OptimizerId::NelderMeadRestart, OptimizerId::SaGauss, OptimizerId::CmaDiag,     OptimizerId::SobolSearch,
};

std::string_view to_string(OptimizerId id);
OptimizerId optimizer_from_string(std::string_view name);
inline int canonical_index(OptimizerId id) { return static_cast<int>(id); }

/// Best-so-far record of one (optimizer, instance, repetition) run.
///
/// `best[k]` is the best score after `budgets[k]` evaluations. An empty
/// `budgets` vector means full resolution: `best[t - 1]` after t evaluations.
struct Trajectory {
    OptimizerId optimizer = OptimizerId::RandomSearch;
    int instance_uid = 0;
    int repetition = 0;
    std::uint64_t seed = 0;
    int length = 0;
    std::vector<int> budgets;
    std::vector<double> best;

    bool full_resolution() const { return budgets.empty(); }
    /// Best score after `budget` evaluations; throws if the budget was not recorded.
    double best_at(int budget) const;
    Trajectory downsampled(std::span<const int> keep) const;

    bool operator==(const Trajectory &) const = default;
};

/// Evaluation port: returns the score of an in-bounds point.
using ScoreFn = std::function<double(std::span<const double>)>;

/// Population size shared by the population-based optimizers.
int population_size(int dimension, int planning_budget);

/// Runs `optimizer` for exactly `max_budget` evaluations of `score`.
///
/// Every proposed point is clamped into `bounds` before evaluation. Internal
/// parameters that depend on the budget use `planning_budget` (defaults to
/// `max_budget`), so a run with a smaller evaluation budget and the same
/// planning budget reproduces a prefix of the longer run.
Trajectory run(OptimizerId optimizer, const suites::Bounds &bounds, const ScoreFn &score, int max_budget,
               std::uint64_t seed, int planning_budget = 0);

Trajectory run(OptimizerId optimizer, const suites::ProblemInstance &instance, int max_budget, std::uint64_t seed,
               int planning_budget = 0);

std::uint64_t run_seed(std::uint64_t master_seed, const suites::ProblemInstance &instance, OptimizerId optimizer,
                       int repetition);

/// One trajectory per (optimizer, instance, repetition), ordered by optimizer
/// (as given), then instance, then repetition.
std::vector<Trajectory> run_portfolio(std::span<const OptimizerId> portfolio, const suites::InstanceSet &instances,
                                      int max_budget, int n_reps, std::uint64_t master_seed, unsigned jobs = 1);

}  // namespace pias::optim
