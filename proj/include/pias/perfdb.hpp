#pragma once

#include "pias/normalize.hpp"
#include "pias/optimizers.hpp"
#include "pias/suites.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace pias::perf {

/// Extrema normalizer for one instance from the runs of every algorithm.
///
/// The extrema of the best-so-far scores inside [window_start, window_end]
/// are the best-so-far at the window start (worst) and at the window end
/// (best). Throws for an empty run set.
Normalizer rog_normalize(std::span<const optim::Trajectory *const> runs, int window_start, int window_end);

/// Normalized performance of a run after `budget` evaluations.
double perf_at(const optim::Trajectory &trajectory, int budget, const Normalizer &normalizer);

/// Default checkpoint grid: {10,15,25,50,100,250,500}·d restricted to [1, max_budget].
std::vector<int> default_checkpoints(int dimension, int max_budget);

/// Dense (instance, optimizer, repetition, budget) -> performance in [0, 1].
class PerformanceTable {
public:
    PerformanceTable() = default;
    PerformanceTable(suites::SuiteId suite, int dimension, std::vector<int> instance_ids,
                     std::vector<optim::OptimizerId> optimizers, int reps, std::vector<int> budgets);

    suites::SuiteId suite() const { return suite_; }
    int dimension() const { return dimension_; }
    int reps() const { return reps_; }
    const std::vector<int> &instance_ids() const { return instance_ids_; }
    const std::vector<optim::OptimizerId> &optimizers() const { return optimizers_; }
    const std::vector<int> &budgets() const { return budgets_; }
    std::size_t cell_count() const { return values_.size(); }

    std::size_t instance_index(int uid) const;
    std::size_t optimizer_index(optim::OptimizerId id) const;
    std::size_t budget_index(int budget) const;
    bool has_budget(int budget) const;

    double at(std::size_t instance, std::size_t optimizer, int rep, std::size_t budget) const {
        return values_[offset(instance, optimizer, rep, budget)];
    }
    void set(std::size_t instance, std::size_t optimizer, int rep, std::size_t budget, double value) {
        values_[offset(instance, optimizer, rep, budget)] = value;
    }

    /// Mean over repetitions at a budget value.
    double mean_perf(std::size_t instance, std::size_t optimizer, int budget) const;

    bool operator==(const PerformanceTable &) const = default;

private:
    std::size_t offset(std::size_t instance, std::size_t optimizer, int rep, std::size_t budget) const {
        return ((instance * optimizers_.size() + optimizer) * static_cast<std::size_t>(reps_) +
                static_cast<std::size_t>(rep)) *
                   budgets_.size() +
               budget;
    }

    suites::SuiteId suite_ = suites::SuiteId::BbobLite;
    int dimension_ = 0;
    std::vector<int> instance_ids_;
    std::vector<optim::OptimizerId> optimizers_;
    int reps_ = 0;
    std::vector<int> budgets_;
    std::vector<double> values_;
};

/// Builds the dense table. `normalizers` is aligned with `instance_ids`.
/// Throws "incomplete run set" when a (optimizer, instance, rep) run is missing.
PerformanceTable build_table(std::span<const optim::Trajectory> trajectories, suites::SuiteId suite, int dimension,
                             std::span<const int> instance_ids, std::span<const optim::OptimizerId> optimizers,
                             int reps, std::span<const int> budgets, std::span<const Normalizer> normalizers);

/// Columns: suite,d,instance_id,optimizer,rep,budget,perf (17 significant digits).
void write_table_csv(std::ostream &out, const PerformanceTable &table);
PerformanceTable read_table_csv(std::istream &in);

}  // namespace pias::perf
