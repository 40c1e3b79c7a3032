#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace pias::suites {

enum class SuiteId { BbobLite, MabbobLite, RogLite };

std::string_view to_string(SuiteId suite);
SuiteId suite_from_string(std::string_view name);

/// Raised when a point outside the instance box is evaluated.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    static Bounds cube(int dimension, double lo, double hi);
    bool contains(std::span<const double> x) const;
    std::size_t dimension() const { return lower.size(); }
};

struct Evaluation {
    double value = 0.0;
    std::optional<double> error;

    /// The quantity optimizers minimize: error when the optimum is known, raw value otherwise.
    double score() const { return error.value_or(value); }
};

/// Minimal reconstruction key for an instance (the manifest record).
struct InstanceRecord {
    SuiteId suite = SuiteId::BbobLite;
    int function_id = 0;
    int instance_id = 0;
    int dimension = 0;
    std::uint64_t seed = 0;
};

class Objective {
public:
    virtual ~Objective() = default;
    /// Unchecked evaluation; defined on all of R^d.
    virtual double operator()(std::span<const double> x) const = 0;
};

/// Immutable, cheaply copyable evaluatable problem instance.
class ProblemInstance {
public:
    ProblemInstance(InstanceRecord record, Bounds bounds, std::optional<double> optimum_value,
                    std::vector<double> optimum_location, std::shared_ptr<const Objective> objective);

    SuiteId suite() const { return record_.suite; }
    int function_id() const { return record_.function_id; }
    int instance_id() const { return record_.instance_id; }
    int dimension() const { return record_.dimension; }
    std::uint64_t generator_seed() const { return record_.seed; }
    const InstanceRecord &record() const { return record_; }
    const Bounds &bounds() const { return bounds_; }
    std::optional<double> optimum_value() const { return optimum_value_; }
    /// Known minimizer; empty when the optimum is unknown.
    std::span<const double> optimum_location() const { return optimum_location_; }

    /// Unique key of the instance within its suite and dimension.
    int uid() const;

    /// Checked evaluation. Throws DomainError for out-of-box points.
    Evaluation evaluate(std::span<const double> x) const;

    /// Objective value without the bounds check.
    double raw(std::span<const double> x) const { return (*objective_)(x); }

private:
    InstanceRecord record_;
    Bounds bounds_;
    std::optional<double> optimum_value_;
    std::vector<double> optimum_location_;
    std::shared_ptr<const Objective> objective_;
};

inline constexpr int bbob_function_count = 12;

/// Short names of the BBOB-lite base functions, indexed by function_id - 1.
std::string_view bbob_function_name(int function_id);

/// Row-major d x d orthogonal matrix drawn from `seed` with the generator used by rotated functions.
std::vector<double> random_rotation_matrix(std::uint64_t seed, int dimension);

/// Base function `function_id` (1..12) with the seeded instance transformation.
ProblemInstance bbob_instance(int function_id, int instance_id, int dimension);

/// Log-space affine blend of BBOB-lite components sharing one optimum location.
ProblemInstance mabbob_instance(std::span<const int> component_fids, std::span<const int> component_iids,
                                std::span<const double> weights, std::uint64_t seed, int dimension,
                                int instance_id = 0);

/// MA-BBOB-lite instance whose components, weights and optimum are all drawn from `seed`.
ProblemInstance mabbob_generated(std::uint64_t seed, int dimension, int instance_id = 0);

/// Random expression-tree objective on [-1, 1]^d.
ProblemInstance rog_instance(std::uint64_t seed, int dimension, int instance_id = 0);

/// Rebuilds an instance from its manifest record.
ProblemInstance make_instance(const InstanceRecord &record);

struct InstanceSet {
    SuiteId suite = SuiteId::BbobLite;
    int dimension = 0;
    std::vector<ProblemInstance> instances;
    /// Unique per instance (ProblemInstance::uid).
    std::vector<int> instance_ids;
    /// Key used for cross-validation splitting: the BBOB instance id, or the uid for generators.
    std::vector<int> cv_groups;

    std::size_t size() const { return instances.size(); }
    std::size_t index_of(int uid) const;
};

struct InstanceCounts {
    std::vector<int> bbob_functions;  // empty = all 12
    int bbob_instances = 5;
    int generator_instances = 50;
};

InstanceSet make_instance_set(SuiteId suite, int dimension, const InstanceCounts &counts,
                              std::uint64_t instance_seed, std::span<const int> excluded_uids = {});

nlohmann::json to_json(const InstanceRecord &record);
InstanceRecord record_from_json(const nlohmann::json &node);
nlohmann::json manifest_json(const InstanceSet &set);
InstanceSet instance_set_from_manifest(const nlohmann::json &manifest);

}  // namespace pias::suites
