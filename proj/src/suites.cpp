#include "pias/suites.hpp"

#include "pias/sampling.hpp"
#include "pias/seeding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

namespace pias::suites {

namespace {

using Matrix = std::vector<double>;  // row-major d x d

constexpr std::array<std::string_view, bbob_function_count> kBbobNames = {
    "sphere",          "ellipsoid_separable", "rastrigin",   "buche_rastrigin",
    "linear_slope",    "attractive_sector",   "ellipsoid",   "discus",
    "bent_cigar",      "sharp_ridge",         "rosenbrock",  "schaffers_f7",
};

double ratio(std::size_t i, std::size_t d) {
    return d > 1 ? static_cast<double>(i) / static_cast<double>(d - 1) : 0.0;
}

double tosz(double x) {
    if (x == 0.0) {
        return 0.0;
    }
    const double xhat = std::log(std::abs(x));
    const double c1 = x > 0.0 ? 10.0 : 5.5;
    const double c2 = x > 0.0 ? 7.9 : 3.1;
    const double sign = x > 0.0 ? 1.0 : -1.0;
    return sign * std::exp(xhat + 0.049 * (std::sin(c1 * xhat) + std::sin(c2 * xhat)));
}

void tosz_inplace(std::vector<double> &z) {
    for (double &v : z) {
        v = tosz(v);
    }
}

void tasy_inplace(std::vector<double> &z, double beta) {
    const std::size_t d = z.size();
    for (std::size_t i = 0; i < d; ++i) {
        if (z[i] > 0.0) {
            z[i] = std::pow(z[i], 1.0 + beta * ratio(i, d) * std::sqrt(z[i]));
        }
    }
}

void lambda_inplace(std::vector<double> &z, double alpha) {
    const std::size_t d = z.size();
    for (std::size_t i = 0; i < d; ++i) {
        z[i] *= std::pow(alpha, 0.5 * ratio(i, d));
    }
}

std::vector<double> multiply(const Matrix &m, const std::vector<double> &v) {
    const std::size_t d = v.size();
    std::vector<double> out(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        double sum = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            sum += m[r * d + c] * v[c];
        }
        out[r] = sum;
    }
    return out;
}

/// Seeded Gaussian matrix orthonormalized row by row (modified Gram-Schmidt).
Matrix random_rotation(Rng &rng, std::size_t d) {
    Matrix m(d * d);
    for (;;) {
        for (double &v : m) {
            v = rng.normal();
        }
        bool degenerate = false;
        for (std::size_t r = 0; r < d && !degenerate; ++r) {
            for (std::size_t p = 0; p < r; ++p) {
                double dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    dot += m[r * d + c] * m[p * d + c];
                }
                for (std::size_t c = 0; c < d; ++c) {
                    m[r * d + c] -= dot * m[p * d + c];
                }
            }
            double norm = 0.0;
            for (std::size_t c = 0; c < d; ++c) {
                norm += m[r * d + c] * m[r * d + c];
            }
            norm = std::sqrt(norm);
            if (norm < 1e-8) {
                degenerate = true;
                break;
            }
            for (std::size_t c = 0; c < d; ++c) {
                m[r * d + c] /= norm;
            }
        }
        if (!degenerate) {
            return m;
        }
    }
}

class BbobFunction final : public Objective {
public:
    BbobFunction(int fid, std::vector<double> xopt, Matrix r, Matrix q)
        : fid_(fid), xopt_(std::move(xopt)), r_(std::move(r)), q_(std::move(q)) {}

    double operator()(std::span<const double> x) const override {
        const std::size_t d = xopt_.size();
        std::vector<double> z(d);
        for (std::size_t i = 0; i < d; ++i) {
            z[i] = x[i] - xopt_[i];
        }
        switch (fid_) {
        case 1:
            return sum_squares(z, 0);
        case 2:
            tosz_inplace(z);
            return conditioned_sum(z, 1e6);
        case 3:
            tosz_inplace(z);
            tasy_inplace(z, 0.2);
            lambda_inplace(z, 10.0);
            return rastrigin(z);
        case 4: {
            tosz_inplace(z);
            for (std::size_t i = 0; i < d; ++i) {
                const double s = std::pow(10.0, 0.5 * ratio(i, d));
                z[i] *= (z[i] > 0.0 && i % 2 == 0) ? 10.0 * s : s;
            }
            return rastrigin(z);
        }
        case 5: {
            double sum = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double s = (xopt_[i] > 0.0 ? 1.0 : -1.0) * std::pow(10.0, ratio(i, d));
                const double zi = xopt_[i] * x[i] < 25.0 ? x[i] : xopt_[i];
                sum += 5.0 * std::abs(s) - s * zi;
            }
            return std::max(0.0, sum);
        }
        case 6: {
            z = multiply(r_, z);
            lambda_inplace(z, 10.0);
            z = multiply(q_, z);
            double sum = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                const double s = z[i] * xopt_[i] > 0.0 ? 100.0 : 1.0;
                sum += (s * z[i]) * (s * z[i]);
            }
            return std::pow(tosz(sum), 0.9);
        }
        case 7:
            z = multiply(r_, z);
            tosz_inplace(z);
            return conditioned_sum(z, 1e6);
        case 8: {
            z = multiply(r_, z);
            tosz_inplace(z);
            return 1e6 * z[0] * z[0] + sum_squares(z, 1);
        }
        case 9: {
            z = multiply(r_, z);
            tasy_inplace(z, 0.5);
            z = multiply(r_, z);
            return z[0] * z[0] + 1e6 * sum_squares(z, 1);
        }
        case 10: {
            z = multiply(r_, z);
            lambda_inplace(z, 10.0);
            z = multiply(q_, z);
            return z[0] * z[0] + 100.0 * std::sqrt(sum_squares(z, 1));
        }
        case 11: {
            const double scale = std::max(1.0, std::sqrt(static_cast<double>(d)) / 8.0);
            for (double &v : z) {
                v = scale * v + 1.0;
            }
            double sum = 0.0;
            for (std::size_t i = 0; i + 1 < d; ++i) {
                const double a = z[i] * z[i] - z[i + 1];
                const double b = z[i] - 1.0;
                sum += 100.0 * a * a + b * b;
            }
            return sum;
        }
        case 12: {
            z = multiply(r_, z);
            tasy_inplace(z, 0.5);
            z = multiply(q_, z);
            lambda_inplace(z, 10.0);
            if (d == 1) {
                return schaffers_term(std::abs(z[0])) * schaffers_term(std::abs(z[0]));
            }
            double sum = 0.0;
            for (std::size_t i = 0; i + 1 < d; ++i) {
                sum += schaffers_term(std::sqrt(z[i] * z[i] + z[i + 1] * z[i + 1]));
            }
            const double mean = sum / static_cast<double>(d - 1);
            return mean * mean;
        }
        default:
            throw std::invalid_argument("unknown function");
        }
    }

private:
    static double sum_squares(const std::vector<double> &z, std::size_t from) {
        double sum = 0.0;
        for (std::size_t i = from; i < z.size(); ++i) {
            sum += z[i] * z[i];
        }
        return sum;
    }

    static double conditioned_sum(const std::vector<double> &z, double condition) {
        double sum = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            sum += std::pow(condition, ratio(i, z.size())) * z[i] * z[i];
        }
        return sum;
    }

    static double rastrigin(const std::vector<double> &z) {
        double cosines = 0.0;
        for (const double v : z) {
            cosines += std::cos(2.0 * std::numbers::pi * v);
        }
        return std::max(0.0, 10.0 * (static_cast<double>(z.size()) - cosines)) + sum_squares(z, 0);
    }

    static double schaffers_term(double s) {
        const double root = std::sqrt(s);
        const double sine = std::sin(50.0 * std::pow(s, 0.2));
        return root + root * sine * sine;
    }

    int fid_;
    std::vector<double> xopt_;
    Matrix r_;
    Matrix q_;
};

class MabbobFunction final : public Objective {
public:
    struct Component {
        ProblemInstance base;
        double weight;
    };

    MabbobFunction(std::vector<Component> components, std::vector<double> shared_optimum)
        : components_(std::move(components)), shared_optimum_(std::move(shared_optimum)) {}

    static constexpr double epsilon = 1e-8;

    double operator()(std::span<const double> x) const override {
        const std::size_t d = shared_optimum_.size();
        std::vector<double> shifted(d);
        double log_sum = 0.0;
        for (const auto &component : components_) {
            const auto target = component.base.optimum_location();
            for (std::size_t i = 0; i < d; ++i) {
                shifted[i] = x[i] - shared_optimum_[i] + target[i];
            }
            const double raw = component.base.raw(shifted);
            if (components_.size() == 1) {
                return raw;
            }
            log_sum += component.weight * std::log10(raw + epsilon);
        }
        return std::max(0.0, std::pow(10.0, log_sum) - epsilon);
    }

private:
    std::vector<Component> components_;
    std::vector<double> shared_optimum_;
};

enum class RogOp : std::uint8_t { Variable, Constant, Add, Sub, Mul, Neg, Abs, SinPi, CosPi, Square, Tanh };

struct RogNode {
    RogOp op = RogOp::Constant;
    int variable = 0;
    double constant = 0.0;
    int left = -1;
    int right = -1;
};

class RogFunction final : public Objective {
public:
    static constexpr int max_depth = 4;

    RogFunction(std::uint64_t seed, int dimension) {
        Rng rng(seed);
        for (;;) {
            nodes_.clear();
            grow(rng, dimension, 0);
            if (uses_variable() && !flat_on_probe(dimension)) {
                return;
            }
        }
    }

    double operator()(std::span<const double> x) const override { return eval(0, x); }

private:
    int grow(Rng &rng, int dimension, int depth) {
        static constexpr std::array<double, max_depth> leaf_probability = {0.0, 0.2, 0.35, 0.5};
        const int index = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        if (depth >= max_depth || rng.uniform() < leaf_probability[static_cast<std::size_t>(depth)]) {
            if (rng.uniform() < 0.75) {
                nodes_[index].op = RogOp::Variable;
                nodes_[index].variable = static_cast<int>(rng.below(static_cast<std::uint64_t>(dimension)));
            } else {
                nodes_[index].op = RogOp::Constant;
                nodes_[index].constant = rng.uniform(-1.0, 1.0);
            }
            return index;
        }
        static constexpr std::array<RogOp, 9> operators = {RogOp::Add, RogOp::Sub,   RogOp::Mul,
                                                           RogOp::Neg, RogOp::Abs,   RogOp::SinPi,
                                                           RogOp::CosPi, RogOp::Square, RogOp::Tanh};
        const RogOp op = operators[rng.below(operators.size())];
        nodes_[index].op = op;
        const int left = grow(rng, dimension, depth + 1);
        nodes_[index].left = left;
        if (op == RogOp::Add || op == RogOp::Sub || op == RogOp::Mul) {
            const int right = grow(rng, dimension, depth + 1);
            nodes_[index].right = right;
        }
        return index;
    }

    bool uses_variable() const {
        return std::any_of(nodes_.begin(), nodes_.end(), [](const RogNode &n) { return n.op == RogOp::Variable; });
    }

    bool flat_on_probe(int dimension) const {
        sampling::SamplePlan plan{static_cast<std::size_t>(dimension), 32, 0, 0, false};
        const auto points = sampling::scale_to_box(sampling::sobol_points(plan), Bounds::cube(dimension, -1.0, 1.0));
        double lo = INFINITY;
        double hi = -INFINITY;
        for (const auto &p : points) {
            const double v = eval(0, p);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return hi - lo < 1e-9;
    }

    double eval(int index, std::span<const double> x) const {
        const RogNode &n = nodes_[static_cast<std::size_t>(index)];
        switch (n.op) {
        case RogOp::Variable:
            return x[static_cast<std::size_t>(n.variable)];
        case RogOp::Constant:
            return n.constant;
        case RogOp::Add:
            return eval(n.left, x) + eval(n.right, x);
        case RogOp::Sub:
            return eval(n.left, x) - eval(n.right, x);
        case RogOp::Mul:
            return eval(n.left, x) * eval(n.right, x);
        case RogOp::Neg:
            return -eval(n.left, x);
        case RogOp::Abs:
            return std::abs(eval(n.left, x));
        case RogOp::SinPi:
            return std::sin(std::numbers::pi * eval(n.left, x));
        case RogOp::CosPi:
            return std::cos(std::numbers::pi * eval(n.left, x));
        case RogOp::Square: {
            const double u = eval(n.left, x);
            return u * u;
        }
        case RogOp::Tanh:
            return std::tanh(eval(n.left, x));
        }
        return 0.0;
    }

    std::vector<RogNode> nodes_;
};

void check_dimension(int dimension) {
    if (dimension < 1) {
        throw std::invalid_argument("dimension must be at least 1");
    }
}

}  // namespace

std::string_view to_string(SuiteId suite) {
    switch (suite) {
    case SuiteId::BbobLite:
        return "BBOB_LITE";
    case SuiteId::MabbobLite:
        return "MABBOB_LITE";
    case SuiteId::RogLite:
        return "ROG_LITE";
    }
    return "?";
}

SuiteId suite_from_string(std::string_view name) {
    if (name == "BBOB_LITE") {
        return SuiteId::BbobLite;
    }
    if (name == "MABBOB_LITE") {
        return SuiteId::MabbobLite;
    }
    if (name == "ROG_LITE") {
        return SuiteId::RogLite;
    }
    throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
}

Bounds Bounds::cube(int dimension, double lo, double hi) {
    return Bounds{std::vector<double>(static_cast<std::size_t>(dimension), lo),
                  std::vector<double>(static_cast<std::size_t>(dimension), hi)};
}

bool Bounds::contains(std::span<const double> x) const {
    if (x.size() != lower.size()) {
        return false;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) {
            return false;
        }
    }
    return true;
}

ProblemInstance::ProblemInstance(InstanceRecord record, Bounds bounds, std::optional<double> optimum_value,
                                 std::vector<double> optimum_location, std::shared_ptr<const Objective> objective)
    : record_(record),
      bounds_(std::move(bounds)),
      optimum_value_(optimum_value),
      optimum_location_(std::move(optimum_location)),
      objective_(std::move(objective)) {}

int ProblemInstance::uid() const {
    return record_.suite == SuiteId::BbobLite ? record_.function_id * 1000 + record_.instance_id : record_.instance_id;
}

Evaluation ProblemInstance::evaluate(std::span<const double> x) const {
    if (x.size() != static_cast<std::size_t>(record_.dimension)) {
        throw std::invalid_argument("point dimension does not match the instance");
    }
    if (!bounds_.contains(x)) {
        throw DomainError("out of domain");
    }
    Evaluation result;
    result.value = (*objective_)(x);
    if (optimum_value_) {
        result.error = result.value - *optimum_value_;
    }
    return result;
}

std::string_view bbob_function_name(int function_id) {
    if (function_id < 1 || function_id > bbob_function_count) {
        throw std::invalid_argument("unknown function");
    }
    return kBbobNames[static_cast<std::size_t>(function_id - 1)];
}

std::vector<double> random_rotation_matrix(std::uint64_t seed, int dimension) {
    check_dimension(dimension);
    Rng rng(seed);
    return random_rotation(rng, static_cast<std::size_t>(dimension));
}

ProblemInstance bbob_instance(int function_id, int instance_id, int dimension) {
    if (function_id < 1 || function_id > bbob_function_count) {
        throw std::invalid_argument("unknown function");
    }
    check_dimension(dimension);
    const auto d = static_cast<std::size_t>(dimension);
    const std::uint64_t seed = derive_seed("bbob", function_id, instance_id, dimension);
    Rng rng(seed);
    std::vector<double> xopt(d);
    for (double &v : xopt) {
        v = rng.uniform(-4.0, 4.0);
    }
    if (function_id == 5) {
        // The slope optimum sits on the boundary of the box.
        for (double &v : xopt) {
            v = v >= 0.0 ? 5.0 : -5.0;
        }
    }
    Matrix r = random_rotation(rng, d);
    Matrix q = random_rotation(rng, d);
    auto objective = std::make_shared<BbobFunction>(function_id, xopt, std::move(r), std::move(q));
    InstanceRecord record{SuiteId::BbobLite, function_id, instance_id, dimension, seed};
    return ProblemInstance(record, Bounds::cube(dimension, -5.0, 5.0), 0.0, std::move(xopt), std::move(objective));
}

ProblemInstance mabbob_instance(std::span<const int> component_fids, std::span<const int> component_iids,
                                std::span<const double> weights, std::uint64_t seed, int dimension,
                                int instance_id) {
    check_dimension(dimension);
    if (component_fids.empty() || component_fids.size() != component_iids.size() ||
        component_fids.size() != weights.size()) {
        throw std::invalid_argument("component lists must be non-empty and of equal length");
    }
    double total = 0.0;
    for (const double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw std::invalid_argument("weights must be finite and non-negative");
        }
        total += w;
    }
    if (total <= 0.0) {
        throw std::invalid_argument("at least one weight must be positive");
    }

    Rng rng(derive_seed("mabbob-optimum", seed, dimension));
    std::vector<double> shared(static_cast<std::size_t>(dimension));
    for (double &v : shared) {
        v = rng.uniform(-4.0, 4.0);
    }

    std::vector<MabbobFunction::Component> components;
    for (std::size_t i = 0; i < component_fids.size(); ++i) {
        if (weights[i] > 0.0) {
            components.push_back({bbob_instance(component_fids[i], component_iids[i], dimension), weights[i] / total});
        }
    }
    auto objective = std::make_shared<MabbobFunction>(std::move(components), shared);
    InstanceRecord record{SuiteId::MabbobLite, 0, instance_id, dimension, seed};
    return ProblemInstance(record, Bounds::cube(dimension, -5.0, 5.0), 0.0, std::move(shared), std::move(objective));
}

ProblemInstance mabbob_generated(std::uint64_t seed, int dimension, int instance_id) {
    Rng rng(derive_seed("mabbob-components", seed));
    const std::size_t count = 2 + rng.below(2);
    std::vector<int> pool(bbob_function_count);
    std::iota(pool.begin(), pool.end(), 1);
    std::vector<int> fids;
    std::vector<int> iids;
    std::vector<double> weights;
    for (std::size_t c = 0; c < count; ++c) {
        const auto pick = rng.below(pool.size());
        fids.push_back(pool[pick]);
        pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
        iids.push_back(1 + static_cast<int>(rng.below(100)));
        weights.push_back(rng.uniform(0.05, 1.0));
    }
    return mabbob_instance(fids, iids, weights, seed, dimension, instance_id);
}

ProblemInstance rog_instance(std::uint64_t seed, int dimension, int instance_id) {
    check_dimension(dimension);
    auto objective = std::make_shared<RogFunction>(seed, dimension);
    InstanceRecord record{SuiteId::RogLite, 0, instance_id, dimension, seed};
    return ProblemInstance(record, Bounds::cube(dimension, -1.0, 1.0), std::nullopt, {}, std::move(objective));
}

ProblemInstance make_instance(const InstanceRecord &record) {
    switch (record.suite) {
    case SuiteId::BbobLite:
        return bbob_instance(record.function_id, record.instance_id, record.dimension);
    case SuiteId::MabbobLite:
        return mabbob_generated(record.seed, record.dimension, record.instance_id);
    case SuiteId::RogLite:
        return rog_instance(record.seed, record.dimension, record.instance_id);
    }
    throw std::invalid_argument("unknown suite");
}

std::size_t InstanceSet::index_of(int uid) const {
    const auto it = std::find(instance_ids.begin(), instance_ids.end(), uid);
    if (it == instance_ids.end()) {
        throw std::out_of_range("instance " + std::to_string(uid) + " is not part of the set");
    }
    return static_cast<std::size_t>(it - instance_ids.begin());
}

InstanceSet make_instance_set(SuiteId suite, int dimension, const InstanceCounts &counts,
                              std::uint64_t instance_seed, std::span<const int> excluded_uids) {
    check_dimension(dimension);
    InstanceSet set;
    set.suite = suite;
    set.dimension = dimension;
    const std::set<int> excluded(excluded_uids.begin(), excluded_uids.end());
    auto push = [&](ProblemInstance instance, int group) {
        if (excluded.count(instance.uid()) != 0) {
            return;
        }
        set.instance_ids.push_back(instance.uid());
        set.cv_groups.push_back(group);
        set.instances.push_back(std::move(instance));
    };

    if (suite == SuiteId::BbobLite) {
        std::vector<int> fids = counts.bbob_functions;
        if (fids.empty()) {
            fids.resize(bbob_function_count);
            std::iota(fids.begin(), fids.end(), 1);
        }
        for (const int fid : fids) {
            for (int iid = 1; iid <= counts.bbob_instances; ++iid) {
                push(bbob_instance(fid, iid, dimension), iid);
            }
        }
        return set;
    }

    const std::string_view tag = to_string(suite);
    for (int k = 0; k < counts.generator_instances; ++k) {
        const std::uint64_t seed = derive_seed(tag, instance_seed, k, dimension);
        if (suite == SuiteId::MabbobLite) {
            push(mabbob_generated(seed, dimension, k), k);
        } else {
            push(rog_instance(seed, dimension, k), k);
        }
    }
    return set;
}

nlohmann::json to_json(const InstanceRecord &record) {
    return nlohmann::json{{"suite", std::string(to_string(record.suite))},
                          {"fid", record.function_id},
                          {"iid", record.instance_id},
                          {"d", record.dimension},
                          {"seed", record.seed}};
}

InstanceRecord record_from_json(const nlohmann::json &node) {
    InstanceRecord record;
    record.suite = suite_from_string(node.at("suite").get<std::string>());
    record.function_id = node.at("fid").get<int>();
    record.instance_id = node.at("iid").get<int>();
    record.dimension = node.at("d").get<int>();
    record.seed = node.at("seed").get<std::uint64_t>();
    return record;
}

nlohmann::json manifest_json(const InstanceSet &set) {
    nlohmann::json instances = nlohmann::json::array();
    for (std::size_t i = 0; i < set.size(); ++i) {
        auto node = to_json(set.instances[i].record());
        node["cv_group"] = set.cv_groups[i];
        instances.push_back(std::move(node));
    }
    return nlohmann::json{{"suite", std::string(to_string(set.suite))},
                          {"d", set.dimension},
                          {"instances", std::move(instances)}};
}

InstanceSet instance_set_from_manifest(const nlohmann::json &manifest) {
    InstanceSet set;
    set.suite = suite_from_string(manifest.at("suite").get<std::string>());
    set.dimension = manifest.at("d").get<int>();
    for (const auto &node : manifest.at("instances")) {
        auto instance = make_instance(record_from_json(node));
        set.instance_ids.push_back(instance.uid());
        set.cv_groups.push_back(node.at("cv_group").get<int>());
        set.instances.push_back(std::move(instance));
    }
    return set;
}

}  // namespace pias::suites
