#pragma once

#include "pias/optimizers.hpp"
#include "pias/perfdb.hpp"

#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

namespace pias::portfolio {

/// v(S) = mean VBS(S) - mean SBS(S) at one budget, over a fixed instance set.
///
/// Holds the (instance x optimizer) matrix of mean-over-repetition
/// performances so subset values are pure reads.
class ComplementarityTarget {
public:
    ComplementarityTarget(const perf::PerformanceTable &table, std::span<const std::size_t> instances, int budget);
    /// Direct construction from a mean-performance matrix (rows = instances).
    ComplementarityTarget(std::vector<optim::OptimizerId> optimizers, std::vector<std::vector<double>> perf);

    const std::vector<optim::OptimizerId> &optimizers() const { return optimizers_; }
    std::size_t instance_count() const { return perf_.size(); }

    /// Throws std::invalid_argument for an empty subset.
    double value(std::span<const optim::OptimizerId> subset) const;
    double vbs_mean(std::span<const optim::OptimizerId> subset) const;
    double sbs_mean(std::span<const optim::OptimizerId> subset) const;

private:
    std::vector<std::size_t> columns(std::span<const optim::OptimizerId> subset) const;

    std::vector<optim::OptimizerId> optimizers_;
    std::vector<std::vector<double>> perf_;
};

/// Averages marginal contributions over the prefixes of each ordering in
/// `permutations` (each a permutation of `portfolio`).
std::vector<double> shapley_from_permutations(const ComplementarityTarget &target,
                                              std::span<const optim::OptimizerId> portfolio,
                                              std::span<const std::vector<optim::OptimizerId>> permutations);

/// Monte-Carlo permutation estimate with `n_permutations` seeded orderings.
std::vector<double> shapley_estimate(const ComplementarityTarget &target,
                                     std::span<const optim::OptimizerId> portfolio, int n_permutations,
                                     std::uint64_t seed);

struct PortfolioSelection {
    std::vector<optim::OptimizerId> members;  // canonical order
    double complementarity = 0.0;
    std::vector<double> shapley_values;       // aligned with the full portfolio
    int iterations = 0;
    int n_permutations = 0;
};

/// Shapley-weighted random subset search. Each draw picks `size` distinct
/// members with probability proportional to the clipped Shapley values; the
/// best subset seen wins, ties to the lexicographically smallest.
PortfolioSelection select_portfolio(const ComplementarityTarget &target,
                                    std::span<const optim::OptimizerId> portfolio, int size, int iterations,
                                    std::uint64_t seed, int n_permutations = 200);

nlohmann::json manifest_json(const PortfolioSelection &selection, std::span<const optim::OptimizerId> portfolio,
                             suites::SuiteId suite, int dimension, int b_factor);

}  // namespace pias::portfolio
