#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace pias::selection {

struct ForestConfig {
    int trees = 100;
    int min_leaf = 2;
    /// Features tried per split; 0 means ceil(sqrt(p)).
    int max_features = 0;
    /// 0 means unlimited depth.
    int max_depth = 0;
    bool bootstrap = true;
};

/// Row-major design matrix.
struct Dataset {
    std::size_t rows = 0;
    std::size_t features = 0;
    std::size_t outputs = 0;
    std::vector<double> x;  // rows x features
    std::vector<double> y;  // rows x outputs

    std::span<const double> row(std::size_t r) const { return {x.data() + r * features, features}; }
    std::span<const double> target(std::size_t r) const { return {y.data() + r * outputs, outputs}; }
};

/// Multi-output regression tree grown on summed per-output variance reduction.
class RegressionTree {
public:
    static RegressionTree grow(const Dataset &data, std::span<const std::size_t> rows, const ForestConfig &config,
                               std::uint64_t seed);

    /// Writes the leaf mean vector for `x` into `out` (size = outputs).
    void predict(std::span<const double> x, std::span<double> out) const;

    std::size_t node_count() const { return nodes_.size(); }
    std::size_t leaf_count() const;

private:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        std::size_t value = 0;  // offset into leaf_values_
    };

    std::vector<Node> nodes_;
    std::vector<double> leaf_values_;
    std::size_t outputs_ = 0;

    friend class TreeBuilder;
};

/// Bagged ensemble; the prediction is the mean of the tree predictions.
class RegressionForest {
public:
    static RegressionForest fit(const Dataset &data, const ForestConfig &config, std::uint64_t seed);

    std::vector<double> predict(std::span<const double> x) const;
    std::size_t outputs() const { return outputs_; }
    std::size_t size() const { return trees_.size(); }

private:
    std::vector<RegressionTree> trees_;
    std::size_t outputs_ = 0;
};

}  // namespace pias::selection
