#include "pias/harness.hpp"

#include "pias/csv.hpp"
#include "pias/features.hpp"
#include "pias/parallel.hpp"
#include "pias/portfolio.hpp"
#include "pias/seeding.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

namespace pias::harness {

namespace fs = std::filesystem;

namespace {

template <typename T>
std::vector<T> list_or(const nlohmann::json &node, const char *key, std::vector<T> fallback) {
    if (!node.contains(key)) {
        return fallback;
    }
    return node.at(key).get<std::vector<T>>();
}

std::string hex(std::uint64_t value) {
    char buffer[17];
    std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
    return buffer;
}

std::string suite_tag(suites::SuiteId suite, int dimension) {
    return std::string(suites::to_string(suite)) + "_d" + std::to_string(dimension);
}

fs::path trajectory_path(const fs::path &dir, optim::OptimizerId id) {
    return dir / "trajectories" / (std::string(optim::to_string(id)) + ".csv");
}

fs::path feature_path(const fs::path &dir, int ela_factor) {
    return dir / "features" / ("e" + std::to_string(ela_factor) + ".csv");
}

fs::path best_path(const fs::path &dir, int ela_factor) {
    return dir / "features" / ("e" + std::to_string(ela_factor) + "_best.csv");
}

fs::path portfolio_path(const fs::path &dir, int b_factor) {
    return dir / "portfolios" / ("B" + std::to_string(b_factor) + ".json");
}

std::vector<int> excluded_uids(const GridConfig &config, suites::SuiteId suite, int dimension) {
    std::vector<int> out;
    for (const auto &e : config.excluded) {
        if (e.suite == suite && e.dimension == dimension) {
            out.push_back(e.uid);
        }
    }
    return out;
}

suites::InstanceSet instance_set(const GridConfig &config, suites::SuiteId suite, int dimension) {
    const auto excluded = excluded_uids(config, suite, dimension);
    return suites::make_instance_set(suite, dimension, config.instances, config.instance_seed, excluded);
}

/// Verifies or creates the (suite, d) manifest; returns the instance set.
suites::InstanceSet prepare_suite_dir(const GridConfig &config, suites::SuiteId suite, int dimension) {
    const fs::path dir = suite_dir(config, suite, dimension);
    const std::string hash = config.run_hash(suite, dimension);
    const fs::path manifest = dir / "manifest.json";
    if (fs::exists(manifest)) {
        const auto stored = nlohmann::json::parse(read_file(manifest));
        if (stored.value("config_hash", std::string()) != hash) {
            throw ConfigError("store " + dir.string() + " was written with config hash " +
                              stored.value("config_hash", std::string("?")) + " but the current config hashes to " +
                              hash + "; use a fresh output directory or restore the original config");
        }
    } else if (fs::exists(dir) && !fs::is_empty(dir)) {
        throw ConfigError("store " + dir.string() + " has data but no manifest; refusing to mix runs");
    }
    fs::create_directories(dir / "trajectories");
    fs::create_directories(dir / "features");
    auto set = instance_set(config, suite, dimension);
    if (!fs::exists(manifest)) {
        nlohmann::json node;
        node["config_hash"] = hash;
        node["suite"] = suites::to_string(suite);
        node["d"] = dimension;
        node["max_budget"] = config.max_budget(dimension);
        node["checkpoints"] = config.checkpoints(dimension);
        write_file_atomic(dir / "instances.json", suites::manifest_json(set).dump(2) + "\n");
        write_file_atomic(manifest, node.dump(2) + "\n");
    }
    return set;
}

std::string feature_best_csv(std::span<const selection::FeatureRecord> records) {
    std::ostringstream out;
    out << "instance_id,rep,B_ELA,best_score\n";
    for (const auto &r : records) {
        out << r.features.provenance.instance_uid << ',' << r.features.provenance.repetition << ','
            << r.features.provenance.ela_budget << ',' << csv::number(r.best_score) << '\n';
    }
    return out.str();
}

}  // namespace

GridConfig GridConfig::from_json(const nlohmann::json &node) {
    if (!node.is_object()) {
        throw ConfigError("config must be a JSON object");
    }
    static const std::set<std::string> known = {
        "suites", "dimensions", "budget_factors", "ela_budget_factors", "portfolio_sizes",
        "manifest_portfolio_size", "optimizers", "n_reps", "instances", "instance_seed", "excluded",
        "master_seed", "output_dir", "jobs", "store_full_trajectories", "fold_count", "forest",
        "shapley_permutations", "portfolio_iterations"};
    for (const auto &[key, value] : node.items()) {
        if (!known.contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
    }
    GridConfig c;
    try {
        if (node.contains("suites")) {
            c.suites.clear();
            for (const auto &s : node.at("suites")) {
                c.suites.push_back(suites::suite_from_string(s.get<std::string>()));
            }
        }
        c.dimensions = list_or<int>(node, "dimensions", c.dimensions);
        c.budget_factors = list_or<int>(node, "budget_factors", c.budget_factors);
        c.ela_budget_factors = list_or<int>(node, "ela_budget_factors", c.ela_budget_factors);
        if (node.contains("portfolio_sizes")) {
            c.portfolio_sizes.clear();
            for (const auto &s : node.at("portfolio_sizes")) {
                c.portfolio_sizes.push_back(s.is_string() && s.get<std::string>() == "full" ? 0 : s.get<int>());
            }
        }
        c.manifest_portfolio_size = node.value("manifest_portfolio_size", c.manifest_portfolio_size);
        if (node.contains("optimizers")) {
            c.optimizers.clear();
            for (const auto &s : node.at("optimizers")) {
                c.optimizers.push_back(optim::optimizer_from_string(s.get<std::string>()));
            }
            std::sort(c.optimizers.begin(), c.optimizers.end(),
                      [](auto a, auto b) { return optim::canonical_index(a) < optim::canonical_index(b); });
        }
        c.n_reps = node.value("n_reps", c.n_reps);
        if (node.contains("instances")) {
            const auto &inst = node.at("instances");
            c.instances.bbob_functions = list_or<int>(inst, "bbob_functions", c.instances.bbob_functions);
            c.instances.bbob_instances = inst.value("bbob_instances", c.instances.bbob_instances);
            c.instances.generator_instances = inst.value("generator_instances", c.instances.generator_instances);
        }
        c.master_seed = node.value("master_seed", c.master_seed);
        c.instance_seed = node.value("instance_seed", c.master_seed);
        if (node.contains("excluded")) {
            for (const auto &e : node.at("excluded")) {
                c.excluded.push_back(ExcludedInstance{suites::suite_from_string(e.at("suite").get<std::string>()),
                                                      e.at("d").get<int>(), e.at("uid").get<int>()});
            }
        }
        c.output_dir = node.value("output_dir", c.output_dir.string());
        c.jobs = node.value("jobs", c.jobs);
        c.store_full_trajectories = node.value("store_full_trajectories", c.store_full_trajectories);
        c.fold_count = node.value("fold_count", c.fold_count);
        if (node.contains("forest")) {
            const auto &f = node.at("forest");
            c.forest.trees = f.value("trees", c.forest.trees);
            c.forest.min_leaf = f.value("min_leaf", c.forest.min_leaf);
            c.forest.max_features = f.value("max_features", c.forest.max_features);
            c.forest.max_depth = f.value("max_depth", c.forest.max_depth);
            c.forest.bootstrap = f.value("bootstrap", c.forest.bootstrap);
        }
        c.shapley_permutations = node.value("shapley_permutations", c.shapley_permutations);
        c.portfolio_iterations = node.value("portfolio_iterations", c.portfolio_iterations);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument &e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    auto positive = [](const std::vector<int> &values, const char *what) {
        if (values.empty() || std::any_of(values.begin(), values.end(), [](int v) { return v < 1; })) {
            throw ConfigError(std::string("config: ") + what + " must be a non-empty list of positive integers");
        }
    };
    positive(c.dimensions, "dimensions");
    positive(c.budget_factors, "budget_factors");
    positive(c.ela_budget_factors, "ela_budget_factors");
    if (c.suites.empty() || c.optimizers.empty()) {
        throw ConfigError("config: suites and optimizers must be non-empty");
    }
    if (c.n_reps < 1 || c.fold_count < 2 || c.manifest_portfolio_size < 1 || c.shapley_permutations < 1 ||
        c.portfolio_iterations < 1 || c.forest.trees < 1 || c.forest.min_leaf < 1) {
        throw ConfigError("config: counts out of range");
    }
    if (c.portfolio_sizes.empty() ||
        std::any_of(c.portfolio_sizes.begin(), c.portfolio_sizes.end(), [](int s) { return s < 0; })) {
        throw ConfigError("config: portfolio_sizes must list positive sizes or \"full\"");
    }
    return c;
}

nlohmann::json GridConfig::to_json() const {
    nlohmann::json node;
    nlohmann::json s = nlohmann::json::array();
    for (const auto id : suites) {
        s.push_back(suites::to_string(id));
    }
    node["suites"] = s;
    node["dimensions"] = dimensions;
    node["budget_factors"] = budget_factors;
    node["ela_budget_factors"] = ela_budget_factors;
    nlohmann::json sizes = nlohmann::json::array();
    for (const int k : portfolio_sizes) {
        sizes.push_back(k == 0 ? nlohmann::json("full") : nlohmann::json(k));
    }
    node["portfolio_sizes"] = sizes;
    node["manifest_portfolio_size"] = manifest_portfolio_size;
    nlohmann::json opts = nlohmann::json::array();
    for (const auto id : optimizers) {
        opts.push_back(optim::to_string(id));
    }
    node["optimizers"] = opts;
    node["n_reps"] = n_reps;
    node["instances"] = {{"bbob_functions", instances.bbob_functions},
                         {"bbob_instances", instances.bbob_instances},
                         {"generator_instances", instances.generator_instances}};
    node["instance_seed"] = instance_seed;
    nlohmann::json ex = nlohmann::json::array();
    for (const auto &e : excluded) {
        ex.push_back({{"suite", suites::to_string(e.suite)}, {"d", e.dimension}, {"uid", e.uid}});
    }
    node["excluded"] = ex;
    node["master_seed"] = master_seed;
    node["output_dir"] = output_dir.string();
    node["jobs"] = jobs;
    node["store_full_trajectories"] = store_full_trajectories;
    node["fold_count"] = fold_count;
    node["forest"] = {{"trees", forest.trees},
                      {"min_leaf", forest.min_leaf},
                      {"max_features", forest.max_features},
                      {"max_depth", forest.max_depth},
                      {"bootstrap", forest.bootstrap}};
    node["shapley_permutations"] = shapley_permutations;
    node["portfolio_iterations"] = portfolio_iterations;
    return node;
}

void GridConfig::cap_budget_factor(int factor) {
    std::erase_if(budget_factors, [factor](int f) { return f > factor; });
    if (budget_factors.empty()) {
        throw ConfigError("--max-budget-factor " + std::to_string(factor) + " removes every budget factor");
    }
}

int GridConfig::max_budget(int dimension) const {
    return *std::max_element(budget_factors.begin(), budget_factors.end()) * dimension;
}

std::vector<int> GridConfig::checkpoints(int dimension) const {
    const int max = max_budget(dimension);
    std::set<int> out;
    for (const int b : perf::default_checkpoints(dimension, max)) {
        out.insert(b);
    }
    for (const int f : budget_factors) {
        out.insert(f * dimension);
    }
    for (const auto &[f, e] : scenario_pairs()) {
        out.insert((f - e) * dimension);
    }
    out.insert(std::min(5 * dimension, max));
    out.insert(max);
    return {out.begin(), out.end()};
}

std::vector<std::pair<int, int>> GridConfig::scenario_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (const int f : budget_factors) {
        for (const int e : ela_budget_factors) {
            if (e < f) {
                out.emplace_back(f, e);
            }
        }
    }
    return out;
}

std::vector<int> GridConfig::used_ela_factors() const {
    std::vector<int> out;
    for (const int e : ela_budget_factors) {
        const bool used = std::any_of(budget_factors.begin(), budget_factors.end(), [e](int f) { return e < f; });
        if (used && std::find(out.begin(), out.end(), e) == out.end()) {
            out.push_back(e);
        }
    }
    return out;
}

std::size_t GridConfig::scenario_count() const {
    return suites.size() * dimensions.size() * portfolio_sizes.size() * scenario_pairs().size();
}

std::string GridConfig::run_hash(suites::SuiteId suite, int dimension) const {
    nlohmann::json key;
    key["suite"] = suites::to_string(suite);
    key["d"] = dimension;
    key["checkpoints"] = checkpoints(dimension);
    key["ela_budget_factors"] = used_ela_factors();
    nlohmann::json opts = nlohmann::json::array();
    for (const auto id : optimizers) {
        opts.push_back(optim::to_string(id));
    }
    key["optimizers"] = opts;
    key["n_reps"] = n_reps;
    key["instances"] = {{"bbob_functions", instances.bbob_functions},
                        {"bbob_instances", instances.bbob_instances},
                        {"generator_instances", instances.generator_instances}};
    key["instance_seed"] = instance_seed;
    key["excluded"] = excluded_uids(*this, suite, dimension);
    key["master_seed"] = master_seed;
    key["store_full_trajectories"] = store_full_trajectories;
    return hex(SeedHasher().add(std::string_view(key.dump())).value());
}

GridConfig load_config(const fs::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path.string());
    }
    nlohmann::json node;
    try {
        node = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return GridConfig::from_json(node);
}

fs::path suite_dir(const GridConfig &config, suites::SuiteId suite, int dimension) {
    return config.output_dir / suite_tag(suite, dimension);
}

fs::path results_dir(const GridConfig &config) { return config.output_dir / "results"; }

void write_file_atomic(const fs::path &path, const std::string &content) {
    fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + tmp.string());
        }
        out << content;
        if (!out) {
            throw std::runtime_error("write failed for " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingDependency("missing file " + path.string());
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

void write_trajectories_csv(std::ostream &out, std::span<const optim::Trajectory> trajectories) {
    out << "optimizer,instance_id,rep,seed,length,budget,best\n";
    for (const auto &t : trajectories) {
        const std::size_t n = t.full_resolution() ? t.best.size() : t.budgets.size();
        for (std::size_t k = 0; k < n; ++k) {
            const int budget = t.full_resolution() ? static_cast<int>(k + 1) : t.budgets[k];
            out << optim::to_string(t.optimizer) << ',' << t.instance_uid << ',' << t.repetition << ',' << t.seed
                << ',' << t.length << ',' << budget << ',' << csv::number(t.best[k]) << '\n';
        }
    }
}

std::vector<optim::Trajectory> read_trajectories_csv(std::istream &in) {
    std::vector<std::string> cells;
    if (!csv::read_row(in, cells) || cells.size() != 7 || cells[0] != "optimizer") {
        throw std::runtime_error("trajectory file: missing header");
    }
    std::vector<optim::Trajectory> out;
    while (csv::read_row(in, cells)) {
        if (cells.size() == 1 && cells[0].empty()) {
            continue;
        }
        if (cells.size() != 7) {
            throw std::runtime_error("trajectory file: malformed row");
        }
        const auto id = optim::optimizer_from_string(cells[0]);
        const int uid = std::stoi(cells[1]);
        const int rep = std::stoi(cells[2]);
        if (out.empty() || out.back().optimizer != id || out.back().instance_uid != uid ||
            out.back().repetition != rep) {
            optim::Trajectory t;
            t.optimizer = id;
            t.instance_uid = uid;
            t.repetition = rep;
            t.seed = std::stoull(cells[3]);
            t.length = std::stoi(cells[4]);
            out.push_back(std::move(t));
        }
        out.back().budgets.push_back(std::stoi(cells[5]));
        out.back().best.push_back(csv::parse_number(cells[6]));
    }
    // Full-resolution runs store every budget 1..length; restore the compact form.
    for (auto &t : out) {
        if (static_cast<int>(t.budgets.size()) == t.length && !t.budgets.empty() && t.budgets.front() == 1 &&
            t.budgets.back() == t.length) {
            t.budgets.clear();
        }
    }
    return out;
}

std::vector<perf::Normalizer> make_normalizers(const suites::InstanceSet &instances,
                                               std::span<const optim::Trajectory> trajectories, int window_start,
                                               int window_end) {
    std::map<int, std::vector<const optim::Trajectory *>> by_instance;
    for (const auto &t : trajectories) {
        by_instance[t.instance_uid].push_back(&t);
    }
    std::vector<perf::Normalizer> out;
    for (std::size_t i = 0; i < instances.size(); ++i) {
        if (instances.instances[i].optimum_value()) {
            out.push_back(perf::Normalizer::attainment());
            continue;
        }
        const auto it = by_instance.find(instances.instance_ids[i]);
        if (it == by_instance.end()) {
            throw MissingDependency("no trajectories for instance " + std::to_string(instances.instance_ids[i]));
        }
        out.push_back(perf::rog_normalize(it->second, window_start, window_end));
    }
    return out;
}

RunSummary cmd_run_suite(const GridConfig &config) {
    RunSummary summary;
    for (const auto suite : config.suites) {
        for (const int d : config.dimensions) {
            const auto set = prepare_suite_dir(config, suite, d);
            const fs::path dir = suite_dir(config, suite, d);
            const int max_budget = config.max_budget(d);
            const auto keep = config.checkpoints(d);

            for (const auto id : config.optimizers) {
                const fs::path path = trajectory_path(dir, id);
                if (fs::exists(path)) {
                    ++summary.files_skipped;
                    continue;
                }
                const std::array<optim::OptimizerId, 1> one{id};
                auto runs = optim::run_portfolio(one, set, max_budget, config.n_reps, config.master_seed, config.jobs);
                if (!config.store_full_trajectories) {
                    for (auto &t : runs) {
                        t = t.downsampled(keep);
                    }
                }
                std::ostringstream out;
                write_trajectories_csv(out, runs);
                write_file_atomic(path, out.str());
                ++summary.trajectory_files_written;
            }

            for (const int e : config.used_ela_factors()) {
                const fs::path fpath = feature_path(dir, e);
                const fs::path bpath = best_path(dir, e);
                if (fs::exists(fpath) && fs::exists(bpath)) {
                    summary.files_skipped += 2;
                    continue;
                }
                const int ela_budget = e * d;
                const std::size_t reps = static_cast<std::size_t>(config.n_reps);
                std::vector<selection::FeatureRecord> records(set.size() * reps);
                parallel_for(records.size(), config.jobs, [&](std::size_t slot) {
                    const auto &instance = set.instances[slot / reps];
                    const int rep = static_cast<int>(slot % reps);
                    const auto plan = features::feature_plan(instance, ela_budget, rep, config.master_seed);
                    const auto sample = features::draw_sample(instance, plan);
                    auto fv = features::compute_features(sample);
                    fv.provenance = features::Provenance{instance.uid(), ela_budget, rep};
                    records[slot] = selection::FeatureRecord{std::move(fv), features::best_score(sample)};
                });
                std::vector<features::FeatureVector> vectors;
                for (const auto &r : records) {
                    vectors.push_back(r.features);
                }
                std::ostringstream out;
                features::write_features_csv(out, vectors);
                write_file_atomic(bpath, feature_best_csv(records));
                write_file_atomic(fpath, out.str());
                summary.feature_files_written += 2;
            }
        }
    }
    return summary;
}

SuiteData load_suite(const GridConfig &config, suites::SuiteId suite, int dimension) {
    const fs::path dir = suite_dir(config, suite, dimension);
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) {
        throw MissingDependency("no run-suite output for " + suite_tag(suite, dimension) + " (expected " +
                                manifest.string() + ")");
    }
    const auto stored = nlohmann::json::parse(read_file(manifest));
    if (stored.value("config_hash", std::string()) != config.run_hash(suite, dimension)) {
        throw ConfigError("store " + dir.string() + " does not match the current config; rerun run-suite");
    }
    SuiteData data;
    data.instances = suites::instance_set_from_manifest(nlohmann::json::parse(read_file(dir / "instances.json")));
    for (const auto id : config.optimizers) {
        const fs::path path = trajectory_path(dir, id);
        if (!fs::exists(path)) {
            throw MissingDependency("missing trajectories " + path.string());
        }
        std::istringstream in(read_file(path));
        auto runs = read_trajectories_csv(in);
        data.trajectories.insert(data.trajectories.end(), std::make_move_iterator(runs.begin()),
                                 std::make_move_iterator(runs.end()));
    }
    const int max_budget = config.max_budget(dimension);
    data.normalizers =
        make_normalizers(data.instances, data.trajectories, std::min(5 * dimension, max_budget), max_budget);
    const auto budgets = config.checkpoints(dimension);
    data.table = perf::build_table(data.trajectories, suite, dimension, data.instances.instance_ids,
                                   config.optimizers, config.n_reps, budgets, data.normalizers);
    return data;
}

selection::FeatureStore load_features(const GridConfig &config, suites::SuiteId suite, int dimension,
                                      int ela_factor) {
    const fs::path dir = suite_dir(config, suite, dimension);
    const fs::path fpath = feature_path(dir, ela_factor);
    const fs::path bpath = best_path(dir, ela_factor);
    if (!fs::exists(fpath) || !fs::exists(bpath)) {
        throw MissingDependency("missing features " + fpath.string());
    }
    std::istringstream fin(read_file(fpath));
    const auto vectors = features::read_features_csv(fin);

    std::map<std::pair<int, int>, double> best;
    std::istringstream bin(read_file(bpath));
    std::vector<std::string> cells;
    csv::read_row(bin, cells);
    while (csv::read_row(bin, cells)) {
        if (cells.size() == 4) {
            best[{std::stoi(cells[0]), std::stoi(cells[1])}] = csv::parse_number(cells[3]);
        }
    }

    selection::FeatureStore store;
    store.ela_budget = ela_factor * dimension;
    for (const auto &fv : vectors) {
        const auto key = std::make_pair(fv.provenance.instance_uid, fv.provenance.repetition);
        const auto it = best.find(key);
        if (it == best.end()) {
            throw MissingDependency("no sample best for instance " + std::to_string(key.first));
        }
        auto &reps = store.by_instance[key.first];
        if (static_cast<int>(reps.size()) != key.second) {
            throw std::runtime_error("feature repetitions out of order in " + fpath.string());
        }
        reps.push_back(selection::FeatureRecord{fv, it->second});
    }
    return store;
}

std::vector<optim::OptimizerId> load_portfolio(const GridConfig &config, suites::SuiteId suite, int dimension,
                                               int b_factor) {
    const fs::path path = portfolio_path(suite_dir(config, suite, dimension), b_factor);
    if (!fs::exists(path)) {
        throw MissingDependency("missing portfolio manifest " + path.string() + "; run build-portfolio first");
    }
    const auto node = nlohmann::json::parse(read_file(path));
    std::vector<optim::OptimizerId> out;
    for (const auto &m : node.at("members")) {
        out.push_back(optim::optimizer_from_string(m.get<std::string>()));
    }
    return out;
}

int cmd_build_portfolio(const GridConfig &config) {
    int written = 0;
    for (const auto suite : config.suites) {
        for (const int d : config.dimensions) {
            const auto data = load_suite(config, suite, d);
            std::vector<std::size_t> everyone(data.table.instance_ids().size());
            std::iota(everyone.begin(), everyone.end(), std::size_t{0});
            const int size = std::min<int>(config.manifest_portfolio_size, static_cast<int>(config.optimizers.size()));
            for (const int f : config.budget_factors) {
                const portfolio::ComplementarityTarget target(data.table, everyone, f * d);
                const auto seed = derive_seed(config.master_seed, "portfolio", suites::to_string(suite), d, f);
                const auto selection = portfolio::select_portfolio(target, config.optimizers, size,
                                                                   config.portfolio_iterations, seed,
                                                                   config.shapley_permutations);
                const auto node = portfolio::manifest_json(selection, config.optimizers, suite, d, f);
                write_file_atomic(portfolio_path(suite_dir(config, suite, d), f), node.dump(2) + "\n");
                ++written;
            }
        }
    }
    return written;
}

SelectSummary cmd_select(const GridConfig &config) {
    struct Job {
        suites::SuiteId suite;
        int dimension;
        int size;
        int b_factor;
        int ela_factor;
    };
    std::vector<Job> jobs;
    for (const auto suite : config.suites) {
        for (const int d : config.dimensions) {
            for (const int size : config.portfolio_sizes) {
                for (const auto &[f, e] : config.scenario_pairs()) {
                    jobs.push_back(Job{suite, d, size, f, e});
                }
            }
        }
    }

    // Load every dependency up front so missing inputs fail before any work.
    std::map<std::pair<int, int>, SuiteData> suites_data;
    std::map<std::tuple<int, int, int>, selection::FeatureStore> stores;
    for (const auto suite : config.suites) {
        for (const int d : config.dimensions) {
            suites_data.emplace(std::make_pair(static_cast<int>(suite), d), load_suite(config, suite, d));
            for (const int e : config.used_ela_factors()) {
                stores.emplace(std::make_tuple(static_cast<int>(suite), d, e), load_features(config, suite, d, e));
            }
        }
    }

    std::vector<selection::ScenarioResult> results(jobs.size());
    parallel_for(jobs.size(), config.jobs, [&](std::size_t k) {
        const auto &job = jobs[k];
        const auto &data = suites_data.at({static_cast<int>(job.suite), job.dimension});
        const auto &store = stores.at({static_cast<int>(job.suite), job.dimension, job.ela_factor});
        selection::Scenario scenario;
        scenario.suite = job.suite;
        scenario.dimension = job.dimension;
        scenario.split = selection::BudgetSplit{job.b_factor * job.dimension, job.ela_factor * job.dimension};
        scenario.fold_count = config.fold_count;
        scenario.master_seed = config.master_seed;
        scenario.forest = config.forest;
        try {
            scenario.portfolio = job.size == 0 || job.size >= static_cast<int>(config.optimizers.size())
                                     ? config.optimizers
                                     : load_portfolio(config, job.suite, job.dimension, job.b_factor);
            if (job.size != 0 && static_cast<int>(scenario.portfolio.size()) != job.size &&
                job.size < static_cast<int>(config.optimizers.size())) {
                throw std::runtime_error("portfolio manifest has " + std::to_string(scenario.portfolio.size()) +
                                         " members, scenario expects " + std::to_string(job.size));
            }
            results[k] = selection::evaluate_scenario(scenario, data.instances, data.table, store, data.normalizers);
        } catch (const std::exception &e) {
            selection::ScenarioResult failed;
            failed.suite = job.suite;
            failed.dimension = job.dimension;
            failed.portfolio = scenario.portfolio;
            failed.split = scenario.split;
            const double nan = std::nan("");
            failed.sbs_perf = failed.vbs_full = failed.vbs_opt = failed.ela_perf = failed.a_star_perf = nan;
            failed.pias_perf = failed.budget_loss = failed.selection_loss = nan;
            std::string message = e.what();
            std::replace(message.begin(), message.end(), ',', ' ');
            std::replace(message.begin(), message.end(), ';', ' ');
            failed.flags.push_back("error: " + message);
            results[k] = std::move(failed);
        }
    });

    const fs::path out_dir = results_dir(config);
    fs::create_directories(out_dir / "scenarios");
    std::string table = selection::scenario_csv_header() + "\n";
    SelectSummary summary;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const auto &job = jobs[k];
        const std::string name = suite_tag(job.suite, job.dimension) + "_k" +
                                 (job.size == 0 ? std::string("full") : std::to_string(job.size)) + "_B" +
                                 std::to_string(job.b_factor) + "_E" + std::to_string(job.ela_factor) + ".json";
        auto node = selection::to_json(results[k]);
        node["portfolio_label"] = job.size == 0 ? nlohmann::json("full") : nlohmann::json(job.size);
        write_file_atomic(out_dir / "scenarios" / name, node.dump(1) + "\n");
        table += selection::scenario_csv_row(results[k]) + "\n";
        ++summary.rows;
        if (!results[k].flags.empty()) {
            ++summary.flagged;
        }
    }
    write_file_atomic(out_dir / "scenarios.csv", table);

    nlohmann::json run;
    run["scenario_count"] = summary.rows;
    run["flagged"] = summary.flagged;
    run["count_formula"] = "|suites| x |dimensions| x |portfolio_sizes| x |{(B, B_ELA): B_ELA < B}| = " +
                           std::to_string(config.suites.size()) + " x " + std::to_string(config.dimensions.size()) +
                           " x " + std::to_string(config.portfolio_sizes.size()) + " x " +
                           std::to_string(config.scenario_pairs().size());
    run["config"] = config.to_json();
    run["config"].erase("jobs");
    run["config"].erase("output_dir");
    write_file_atomic(out_dir / "run_summary.json", run.dump(2) + "\n");
    return summary;
}

}  // namespace pias::harness
