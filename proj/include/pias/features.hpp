#pragma once

#include "pias/normalize.hpp"
#include "pias/sampling.hpp"
#include "pias/suites.hpp"

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace pias::features {

class InsufficientSample : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t min_sample_size = 10;

/// Sampled points, raw objective values, and their min-max normalization.
struct Sample {
    std::vector<sampling::Point> x;
    std::vector<double> y;
    std::vector<double> y_norm;
    /// Known optimum value of the sampled instance, if any.
    std::optional<double> optimum;

    std::size_t size() const { return y.size(); }
};

Sample make_sample(std::vector<sampling::Point> x, std::vector<double> y, std::optional<double> optimum = std::nullopt);

/// Evaluates the instance on `points` (already in the box).
Sample sample_instance(const suites::ProblemInstance &instance, const std::vector<sampling::Point> &points);

/// Evaluation port for sampling; defaults to ProblemInstance::evaluate.
using EvaluateFn = std::function<suites::Evaluation(std::span<const double>)>;

/// Sobol plan of repetition `repetition` for one instance. The scramble seed
/// does not depend on `ela_budget`, so samples of one repetition are nested
/// prefixes across feature budgets.
sampling::SamplePlan feature_plan(const suites::ProblemInstance &instance, int ela_budget, int repetition,
                                  std::uint64_t master_seed);

/// Draws the plan's points in the instance box and evaluates them in order.
Sample draw_sample(const suites::ProblemInstance &instance, const sampling::SamplePlan &plan,
                   const EvaluateFn &evaluate = {});

struct Provenance {
    int instance_uid = 0;
    int ela_budget = 0;
    int repetition = 0;
};

/// Named feature values; NaN marks a degenerate feature.
struct FeatureVector {
    std::vector<std::string> names;
    std::vector<double> values;
    Provenance provenance;

    /// Throws std::out_of_range for an unknown name.
    double at(std::string_view name) const;
};

/// Canonical order of the computed features.
const std::vector<std::string> &feature_names();

/// Computes the full catalogue on y_norm. Throws InsufficientSample below 10 points.
FeatureVector compute_features(const Sample &sample);

/// Names kept after dropping non-finite or flat (range < 1e-12) features, in canonical order.
std::vector<std::string> filter_features(std::span<const FeatureVector> vectors);

/// Best sampled score (error when the optimum is known) before normalization.
double best_score(const Sample &sample);

/// Normalized performance of the best sampled point.
double ela_best(const Sample &sample, const perf::Normalizer &normalizer);

/// Feature matrix CSV: instance_id,rep,B_ELA,<feature columns>; NaN as an empty cell.
void write_features_csv(std::ostream &out, std::span<const FeatureVector> vectors);
std::vector<FeatureVector> read_features_csv(std::istream &in);

}  // namespace pias::features
