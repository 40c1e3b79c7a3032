#include "pias/forest.hpp"

#include "pias/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace pias::selection {

class TreeBuilder {
public:
    TreeBuilder(const Dataset &data, const ForestConfig &config, std::uint64_t seed, RegressionTree &tree)
        : data_(data), config_(config), rng_(seed), tree_(tree) {
        mtry_ = config.max_features > 0
                    ? static_cast<std::size_t>(config.max_features)
                    : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.features))));
        mtry_ = std::clamp<std::size_t>(mtry_, 1, std::max<std::size_t>(1, data.features));
        min_leaf_ = static_cast<std::size_t>(std::max(1, config.min_leaf));
    }

    int build(std::vector<std::size_t> rows, int depth) {
        const int index = static_cast<int>(tree_.nodes_.size());
        tree_.nodes_.emplace_back();

        Split split;
        const bool can_split = rows.size() >= 2 * min_leaf_ && !pure(rows) &&
                               (config_.max_depth <= 0 || depth < config_.max_depth);
        if (can_split) {
            split = best_split(rows);
        }
        if (split.feature < 0) {
            make_leaf(index, rows);
            return index;
        }

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (const std::size_t r : rows) {
            (data_.row(r)[static_cast<std::size_t>(split.feature)] <= split.threshold ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        tree_.nodes_[static_cast<std::size_t>(index)].feature = split.feature;
        tree_.nodes_[static_cast<std::size_t>(index)].threshold = split.threshold;
        const int l = build(std::move(left), depth + 1);
        const int r = build(std::move(right), depth + 1);
        tree_.nodes_[static_cast<std::size_t>(index)].left = l;
        tree_.nodes_[static_cast<std::size_t>(index)].right = r;
        return index;
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double sse = INFINITY;
    };

    bool pure(const std::vector<std::size_t> &rows) const {
        const auto first = data_.target(rows.front());
        for (const std::size_t r : rows) {
            const auto t = data_.target(r);
            if (!std::equal(t.begin(), t.end(), first.begin())) {
                return false;
            }
        }
        return true;
    }

    void make_leaf(int index, const std::vector<std::size_t> &rows) {
        const std::size_t m = data_.outputs;
        auto &node = tree_.nodes_[static_cast<std::size_t>(index)];
        node.feature = -1;
        node.value = tree_.leaf_values_.size();
        std::vector<double> sum(m, 0.0);
        for (const std::size_t r : rows) {
            const auto t = data_.target(r);
            for (std::size_t k = 0; k < m; ++k) {
                sum[k] += t[k];
            }
        }
        for (std::size_t k = 0; k < m; ++k) {
            tree_.leaf_values_.push_back(sum[k] / static_cast<double>(rows.size()));
        }
    }

    // Tries features in a random order, counting only those that vary in the
    // node, until mtry of them have been examined.
    Split best_split(const std::vector<std::size_t> &rows) {
        const std::size_t p = data_.features;
        const std::size_t m = data_.outputs;
        const std::size_t n = rows.size();
        std::vector<std::size_t> features(p);
        std::iota(features.begin(), features.end(), std::size_t{0});
        for (std::size_t i = p; i > 1; --i) {
            std::swap(features[i - 1], features[rng_.below(i)]);
        }

        std::vector<double> total(m, 0.0);
        std::vector<double> total_sq(m, 0.0);
        for (const std::size_t r : rows) {
            const auto t = data_.target(r);
            for (std::size_t k = 0; k < m; ++k) {
                total[k] += t[k];
                total_sq[k] += t[k] * t[k];
            }
        }

        Split best;
        std::size_t examined = 0;
        std::vector<std::size_t> sorted(rows);
        std::vector<double> left(m);
        std::vector<double> left_sq(m);
        for (const std::size_t f : features) {
            if (examined >= mtry_) {
                break;
            }
            std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
                const double xa = data_.row(a)[f];
                const double xb = data_.row(b)[f];
                return xa < xb || (xa == xb && a < b);
            });
            if (data_.row(sorted.front())[f] == data_.row(sorted.back())[f]) {
                continue;
            }
            ++examined;
            std::fill(left.begin(), left.end(), 0.0);
            std::fill(left_sq.begin(), left_sq.end(), 0.0);
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const auto t = data_.target(sorted[i]);
                for (std::size_t k = 0; k < m; ++k) {
                    left[k] += t[k];
                    left_sq[k] += t[k] * t[k];
                }
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < min_leaf_ || nr < min_leaf_) {
                    continue;
                }
                const double a = data_.row(sorted[i])[f];
                const double b = data_.row(sorted[i + 1])[f];
                if (a == b) {
                    continue;
                }
                double sse = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const double rs = total[k] - left[k];
                    const double rsq = total_sq[k] - left_sq[k];
                    sse += (left_sq[k] - left[k] * left[k] / static_cast<double>(nl)) +
                           (rsq - rs * rs / static_cast<double>(nr));
                }
                if (sse < best.sse) {
                    double threshold = 0.5 * (a + b);
                    if (!(threshold >= a && threshold < b)) {
                        threshold = a;
                    }
                    best = Split{static_cast<int>(f), threshold, sse};
                }
            }
        }
        return best;
    }

    const Dataset &data_;
    const ForestConfig &config_;
    Rng rng_;
    RegressionTree &tree_;
    std::size_t mtry_ = 1;
    std::size_t min_leaf_ = 1;
};

RegressionTree RegressionTree::grow(const Dataset &data, std::span<const std::size_t> rows,
                                    const ForestConfig &config, std::uint64_t seed) {
    if (rows.empty()) {
        throw std::invalid_argument("cannot grow a tree on zero rows");
    }
    RegressionTree tree;
    tree.outputs_ = data.outputs;
    TreeBuilder builder(data, config, seed, tree);
    builder.build(std::vector<std::size_t>(rows.begin(), rows.end()), 0);
    return tree;
}

void RegressionTree::predict(std::span<const double> x, std::span<double> out) const {
    std::size_t index = 0;
    while (nodes_[index].feature >= 0) {
        const auto &node = nodes_[index];
        index = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                                      : node.right);
    }
    const std::size_t offset = nodes_[index].value;
    std::copy_n(leaf_values_.begin() + static_cast<std::ptrdiff_t>(offset), outputs_, out.begin());
}

std::size_t RegressionTree::leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node &n) { return n.feature < 0; }));
}

RegressionForest RegressionForest::fit(const Dataset &data, const ForestConfig &config, std::uint64_t seed) {
    if (data.rows == 0 || data.outputs == 0) {
        throw std::invalid_argument("forest needs at least one row and one output");
    }
    if (config.trees < 1) {
        throw std::invalid_argument("forest needs at least one tree");
    }
    RegressionForest forest;
    forest.outputs_ = data.outputs;
    for (int t = 0; t < config.trees; ++t) {
        const std::uint64_t tree_seed = derive_seed(seed, "tree", t);
        std::vector<std::size_t> rows(data.rows);
        if (config.bootstrap) {
            Rng rng(derive_seed(tree_seed, "bootstrap"));
            for (auto &r : rows) {
                r = rng.below(data.rows);
            }
            std::sort(rows.begin(), rows.end());
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }
        forest.trees_.push_back(RegressionTree::grow(data, rows, config, tree_seed));
    }
    return forest;
}

std::vector<double> RegressionForest::predict(std::span<const double> x) const {
    std::vector<double> sum(outputs_, 0.0);
    std::vector<double> one(outputs_);
    for (const auto &tree : trees_) {
        tree.predict(x, one);
        for (std::size_t k = 0; k < outputs_; ++k) {
            sum[k] += one[k];
        }
    }
    for (double &v : sum) {
        v /= static_cast<double>(trees_.size());
    }
    return sum;
}

}  // namespace pias::selection
