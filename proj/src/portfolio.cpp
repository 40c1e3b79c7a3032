#include "pias/portfolio.hpp"

#include "pias/seeding.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace pias::portfolio {

namespace {

std::vector<optim::OptimizerId> canonical_sorted(std::vector<optim::OptimizerId> ids) {
    std::sort(ids.begin(), ids.end(),
              [](auto a, auto b) { return optim::canonical_index(a) < optim::canonical_index(b); });
    return ids;
}

bool lexicographically_smaller(const std::vector<optim::OptimizerId> &a, const std::vector<optim::OptimizerId> &b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](auto x, auto y) {
        return optim::canonical_index(x) < optim::canonical_index(y);
    });
}

}  // namespace

ComplementarityTarget::ComplementarityTarget(const perf::PerformanceTable &table,
                                             std::span<const std::size_t> instances, int budget)
    : optimizers_(table.optimizers()) {
    if (instances.empty()) {
        throw std::invalid_argument("complementarity needs at least one instance");
    }
    for (const std::size_t i : instances) {
        std::vector<double> row;
        for (std::size_t o = 0; o < optimizers_.size(); ++o) {
            row.push_back(table.mean_perf(i, o, budget));
        }
        perf_.push_back(std::move(row));
    }
}

ComplementarityTarget::ComplementarityTarget(std::vector<optim::OptimizerId> optimizers,
                                             std::vector<std::vector<double>> perf)
    : optimizers_(std::move(optimizers)), perf_(std::move(perf)) {
    if (perf_.empty()) {
        throw std::invalid_argument("complementarity needs at least one instance");
    }
    for (const auto &row : perf_) {
        if (row.size() != optimizers_.size()) {
            throw std::invalid_argument("performance row length differs from the optimizer count");
        }
    }
}

std::vector<std::size_t> ComplementarityTarget::columns(std::span<const optim::OptimizerId> subset) const {
    if (subset.empty()) {
        throw std::invalid_argument("complementarity of an empty subset");
    }
    std::vector<std::size_t> out;
    for (const auto id : subset) {
        const auto it = std::find(optimizers_.begin(), optimizers_.end(), id);
        if (it == optimizers_.end()) {
            throw std::out_of_range("optimizer " + std::string(optim::to_string(id)) + " not in target");
        }
        out.push_back(static_cast<std::size_t>(it - optimizers_.begin()));
    }
    return out;
}

double ComplementarityTarget::vbs_mean(std::span<const optim::OptimizerId> subset) const {
    const auto cols = columns(subset);
    double sum = 0.0;
    for (const auto &row : perf_) {
        double best = row[cols.front()];
        for (const std::size_t c : cols) {
            best = std::max(best, row[c]);
        }
        sum += best;
    }
    return sum / static_cast<double>(perf_.size());
}

double ComplementarityTarget::sbs_mean(std::span<const optim::OptimizerId> subset) const {
    const auto cols = columns(subset);
    double best = -1.0;
    for (const std::size_t c : cols) {
        double sum = 0.0;
        for (const auto &row : perf_) {
            sum += row[c];
        }
        best = std::max(best, sum / static_cast<double>(perf_.size()));
    }
    return best;
}

double ComplementarityTarget::value(std::span<const optim::OptimizerId> subset) const {
    return vbs_mean(subset) - sbs_mean(subset);
}

std::vector<double> shapley_from_permutations(const ComplementarityTarget &target,
                                              std::span<const optim::OptimizerId> portfolio,
                                              std::span<const std::vector<optim::OptimizerId>> permutations) {
    if (permutations.empty()) {
        throw std::invalid_argument("at least one permutation is required");
    }
    std::vector<double> phi(portfolio.size(), 0.0);
    std::vector<optim::OptimizerId> prefix;
    for (const auto &order : permutations) {
        if (order.size() != portfolio.size()) {
            throw std::invalid_argument("permutation length differs from the portfolio size");
        }
        prefix.clear();
        double previous = 0.0;  // v(empty set)
        for (const auto id : order) {
            prefix.push_back(id);
            const double current = prefix.size() == 1 ? 0.0 : target.value(prefix);
            const auto k = static_cast<std::size_t>(std::find(portfolio.begin(), portfolio.end(), id) -
                                                    portfolio.begin());
            if (k == portfolio.size()) {
                throw std::invalid_argument("permutation member outside the portfolio");
            }
            phi[k] += current - previous;
            previous = current;
        }
    }
    for (double &v : phi) {
        v /= static_cast<double>(permutations.size());
    }
    return phi;
}

std::vector<double> shapley_estimate(const ComplementarityTarget &target,
                                     std::span<const optim::OptimizerId> portfolio, int n_permutations,
                                     std::uint64_t seed) {
    if (n_permutations < 1) {
        throw std::invalid_argument("n_permutations must be at least 1");
    }
    Rng rng(derive_seed(seed, "shapley"));
    std::vector<std::vector<optim::OptimizerId>> orders;
    orders.reserve(static_cast<std::size_t>(n_permutations));
    for (int p = 0; p < n_permutations; ++p) {
        std::vector<optim::OptimizerId> order(portfolio.begin(), portfolio.end());
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[rng.below(i)]);
        }
        orders.push_back(std::move(order));
    }
    return shapley_from_permutations(target, portfolio, orders);
}

PortfolioSelection select_portfolio(const ComplementarityTarget &target,
                                    std::span<const optim::OptimizerId> portfolio, int size, int iterations,
                                    std::uint64_t seed, int n_permutations) {
    if (size < 1 || static_cast<std::size_t>(size) > portfolio.size()) {
        throw std::invalid_argument("portfolio size out of range");
    }
    if (iterations < 1) {
        throw std::invalid_argument("iterations must be at least 1");
    }
    PortfolioSelection out;
    out.iterations = iterations;
    out.n_permutations = n_permutations;
    out.shapley_values = shapley_estimate(target, portfolio, n_permutations, seed);

    std::vector<double> weights(out.shapley_values);
    for (double &w : weights) {
        w = std::max(0.0, w);
    }
    if (std::accumulate(weights.begin(), weights.end(), 0.0) <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
    }

    Rng rng(derive_seed(seed, "subset-search"));
    bool have = false;
    for (int it = 0; it < iterations; ++it) {
        // Zero-weight members stay eligible once the positive mass is used up.
        std::vector<double> w(weights);
        std::vector<bool> taken(portfolio.size(), false);
        std::vector<optim::OptimizerId> subset;
        for (int pick = 0; pick < size; ++pick) {
            double mass = 0.0;
            for (std::size_t k = 0; k < w.size(); ++k) {
                mass += taken[k] ? 0.0 : w[k];
            }
            std::size_t chosen = portfolio.size();
            if (mass > 0.0) {
                double u = rng.uniform() * mass;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    if (taken[k] || w[k] <= 0.0) {
                        continue;
                    }
                    chosen = k;
                    u -= w[k];
                    if (u < 0.0) {
                        break;
                    }
                }
            } else {
                std::vector<std::size_t> open;
                for (std::size_t k = 0; k < w.size(); ++k) {
                    if (!taken[k]) {
                        open.push_back(k);
                    }
                }
                chosen = open[rng.below(open.size())];
            }
            taken[chosen] = true;
            subset.push_back(portfolio[chosen]);
        }
        subset = canonical_sorted(std::move(subset));
        const double v = target.value(subset);
        if (!have || v > out.complementarity ||
            (v == out.complementarity && lexicographically_smaller(subset, out.members))) {
            out.members = subset;
            out.complementarity = v;
            have = true;
        }
    }
    return out;
}

nlohmann::json manifest_json(const PortfolioSelection &selection, std::span<const optim::OptimizerId> portfolio,
                             suites::SuiteId suite, int dimension, int b_factor) {
    nlohmann::json node;
    node["suite"] = suites::to_string(suite);
    node["d"] = dimension;
    node["B_factor"] = b_factor;
    nlohmann::json members = nlohmann::json::array();
    for (const auto id : selection.members) {
        members.push_back(optim::to_string(id));
    }
    node["members"] = members;
    node["complementarity"] = selection.complementarity;
    nlohmann::json shapley = nlohmann::json::object();
    for (std::size_t k = 0; k < portfolio.size(); ++k) {
        shapley[std::string(optim::to_string(portfolio[k]))] = selection.shapley_values[k];
    }
    node["shapley_values"] = shapley;
    node["search"] = {{"scheme", "shapley-weighted draws without replacement within a draw, independent draws"},
                      {"iterations", selection.iterations},
                      {"n_permutations", selection.n_permutations}};
    return node;
}

}  // namespace pias::portfolio
