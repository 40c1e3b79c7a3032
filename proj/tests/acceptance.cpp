// Acceptance runner: one PASS/FAIL line per criterion, exit code 1 if any fails.

#include "pias/harness.hpp"
#include "pias/portfolio.hpp"
#include "pias/sampling.hpp"
#include "pias/seeding.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace pias;
namespace fs = std::filesystem;
using optim::OptimizerId;

namespace {

// Pinned tolerances and thresholds.
constexpr double kIdentityTol = 1e-12;
constexpr double kShapleyTol = 1e-12;
constexpr double kForestFitTol = 1e-12;
constexpr double kSignificance = 0.05;
constexpr double kSpearmanThreshold = 0.5;
constexpr double kViabilityMaxFraction = 0.25;
constexpr int kTrendBudgetFactor = 250;
constexpr int kTrendLargeElaFactor = 100;
constexpr int kViabilityMinBudgetFactor = 100;
constexpr double kMinimalGridSeconds = 60.0;
constexpr double kTrendSeconds = 30.0 * 60.0;

struct Verdict {
    bool pass = false;
    std::string detail;
};

struct Loaded {
    selection::ScenarioResult result;
    std::string label;
};

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

// One-sided binomial tail P(X >= k) for X ~ Bin(n, 1/2).
double sign_test_p(int successes, int n) {
    double p = 0.0;
    for (int i = successes; i <= n; ++i) {
        p += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
    }
    return std::min(1.0, p);
}

std::vector<double> average_ranks(const std::vector<double> &v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) {
            ++j;
        }
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        }
        i = j + 1;
    }
    return ranks;
}

double spearman(const std::vector<double> &a, const std::vector<double> &b) {
    const auto ra = average_ranks(a);
    const auto rb = average_ranks(b);
    const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / static_cast<double>(ra.size());
    const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / static_cast<double>(rb.size());
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

void run_grid(const harness::GridConfig &config) {
    harness::cmd_run_suite(config);
    harness::cmd_build_portfolio(config);
    harness::cmd_select(config);
}

std::vector<Loaded> load_results(const harness::GridConfig &config) {
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(harness::results_dir(config) / "scenarios")) {
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<Loaded> out;
    for (const auto &path : files) {
        const auto node = nlohmann::json::parse(harness::read_file(path));
        out.push_back({selection::scenario_result_from_json(node), node.at("portfolio_label").dump()});
    }
    return out;
}

harness::GridConfig fresh_config(nlohmann::json node, const fs::path &dir, unsigned jobs) {
    fs::remove_all(dir);
    node["output_dir"] = dir.string();
    node["jobs"] = jobs;
    return harness::GridConfig::from_json(node);
}

// One suite, d = 2, three functions x two instances, two optimizers.
nlohmann::json minimal_grid() {
    return nlohmann::json{
        {"suites", {"BBOB_LITE"}},
        {"dimensions", {2}},
        {"budget_factors", {10, 25, 50}},
        {"ela_budget_factors", {5, 10, 25}},
        {"portfolio_sizes", {1, "full"}},
        {"manifest_portfolio_size", 1},
        {"optimizers", {"ONE_PLUS_ONE_ES", "RANDOM_SEARCH"}},
        {"n_reps", 5},
        {"instances", {{"bbob_functions", {1, 3, 7}}, {"bbob_instances", 2}}},
        {"master_seed", 1},
        {"fold_count", 2},
    };
}

// BBOB_LITE d=2, size-4 portfolios, B >= 100d: serves criteria 7 and 9.
nlohmann::json trend_grid(std::uint64_t seed) {
    return nlohmann::json{
        {"suites", {"BBOB_LITE"}},
        {"dimensions", {2}},
        {"budget_factors", {100, 250, 500}},
        {"ela_budget_factors", {5, 10, 25, 50, 100}},
        {"portfolio_sizes", {4}},
        {"master_seed", seed},
    };
}

Verdict criterion_identities(const std::vector<Loaded> &scenarios, double elapsed) {
    double worst = 0.0;
    std::size_t checked = 0;
    bool monotone = true;
    auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
    for (const auto &s : scenarios) {
        const auto &r = s.result;
        for (const auto &rec : r.records) {
            track(rec.pias_perf, std::max(rec.ela_perf, rec.a_star_perf));
            track(rec.vbs_full - rec.pias_perf, rec.budget_loss + rec.selection_loss);
            monotone = monotone && rec.vbs_full >= rec.vbs_opt;
            ++checked;
        }
        for (const auto &inst : r.instances) {
            track(inst.vbs_full - inst.pias_perf, inst.budget_loss + inst.selection_loss);
            monotone = monotone && inst.vbs_full >= inst.vbs_opt;
        }
        track(r.vbs_full - r.pias_perf, r.budget_loss + r.selection_loss);
        monotone = monotone && r.vbs_full >= r.vbs_opt;
        if (r.vbs_full > r.sbs_perf) {
            track(selection::gap_closed(r.sbs_perf, r.vbs_full, r.vbs_full), 1.0);
            track(selection::gap_closed(r.sbs_perf, r.vbs_full, r.sbs_perf), 0.0);
        }
    }
    const bool pass = worst <= kIdentityTol && monotone && checked > 0 && elapsed < kMinimalGridSeconds;
    return {pass, std::to_string(scenarios.size()) + " scenarios, " + std::to_string(checked) +
                      " records, max deviation " + fmt(worst) + ", VBS_full >= VBS_opt " +
                      (monotone ? "holds" : "violated") + ", grid runtime " + fmt(elapsed, 3) + " s"};
}

Verdict criterion_attainment() {
    const double a = perf::attainment_score(1e2);
    const double b = perf::attainment_score(1e-8);
    const double c = perf::attainment_score(1e-3);
    return {a == 0.0 && b == 1.0 && c == 0.5,
            "score(1e2) = " + fmt(a, 17) + ", score(1e-8) = " + fmt(b, 17) + ", score(1e-3) = " + fmt(c, 17)};
}

// Trains on every instance of the minimal grid, then solves each (instance, feature rep)
// live through a counting evaluator.
Verdict criterion_budget(const harness::GridConfig &config) {
    const auto suite = suites::SuiteId::BbobLite;
    const int d = 2;
    const auto split = selection::BudgetSplit::make(50 * d, 10 * d);
    const auto data = harness::load_suite(config, suite, d);
    const auto store = harness::load_features(config, suite, d, 10);
    const auto &portfolio = config.optimizers;

    std::vector<features::FeatureVector> rows;
    std::vector<std::vector<double>> targets;
    std::vector<features::FeatureVector> all;
    for (std::size_t i = 0; i < data.table.instance_ids().size(); ++i) {
        std::vector<double> target;
        for (const auto id : portfolio) {
            target.push_back(data.table.mean_perf(i, data.table.optimizer_index(id), split.opt()));
        }
        for (const auto &rec : store.at(data.table.instance_ids()[i])) {
            rows.push_back(rec.features);
            targets.push_back(target);
        }
    }
    const auto retained = features::filter_features(rows);
    const auto model = selection::train_selector(rows, targets, retained, portfolio, config.forest, 3);
    const auto chooser = selection::model_chooser(model);

    const int max_budget = config.max_budget(d);
    std::size_t runs = 0;
    std::size_t exact = 0;
    std::size_t table_matches = 0;
    for (std::size_t i = 0; i < data.instances.instances.size(); ++i) {
        const auto &instance = data.instances.instances[i];
        const std::size_t row = data.table.instance_index(instance.uid());
        for (int rep = 0; rep < config.n_reps; ++rep) {
            long calls = 0;
            const features::EvaluateFn counting = [&](std::span<const double> x) {
                ++calls;
                return instance.evaluate(x);
            };
            const auto plan = features::feature_plan(instance, split.ela, rep, config.master_seed);
            const auto seed_of = [&](OptimizerId id) { return optim::run_seed(config.master_seed, instance, id, 0); };
            const auto out = selection::solve_instance(instance, chooser, split, plan, data.normalizers[row], seed_of,
                                                       max_budget, counting);
            ++runs;
            exact += calls == split.total ? 1 : 0;
            const double stored = data.table.at(row, data.table.optimizer_index(out.selected), 0,
                                                data.table.budget_index(split.opt()));
            table_matches += out.a_star_perf == stored ? 1 : 0;
        }
    }
    return {runs > 0 && exact == runs && table_matches == runs,
            std::to_string(exact) + "/" + std::to_string(runs) + " live solves charged exactly B = " +
                std::to_string(split.total) + " evaluations; " + std::to_string(table_matches) + "/" +
                std::to_string(runs) + " A* results equal the stored table prefix"};
}

Verdict criterion_sobol() {
    const sampling::SamplePlan plan{1, 3, 0, 0, false};
    const auto first = sampling::sobol_points(plan);
    const bool head = first[0][0] == 0.5 && first[1][0] == 0.75 && first[2][0] == 0.25;
    std::size_t cases = 0;
    std::size_t good = 0;
    for (const bool scramble : {false, true}) {
        for (std::size_t d = 1; d <= 8; ++d) {
            const sampling::SobolSequence seq(d, derive_seed("acceptance", static_cast<int>(d)), scramble);
            for (int k = 0; k <= 6; ++k) {
                const std::size_t n = std::size_t{1} << k;
                for (std::size_t j = 0; j < d; ++j) {
                    std::vector<int> hits(n, 0);
                    for (std::uint64_t i = 0; i < n; ++i) {
                        ++hits[static_cast<std::size_t>(std::floor(seq.at(i)[j] * static_cast<double>(n)))];
                    }
                    ++cases;
                    good += std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }) ? 1 : 0;
                }
            }
        }
    }
    return {head && good == cases, std::string("d=1 head (0.5, 0.75, 0.25) ") + (head ? "matches" : "differs") +
                                       "; " + std::to_string(good) + "/" + std::to_string(cases) +
                                       " (k, d, dim) blocks of the first 2^k sequence points stratified"};
}

Verdict criterion_shapley() {
    Rng rng(2024);
    const std::vector<OptimizerId> all{OptimizerId::RandomSearch, OptimizerId::OnePlusOneEs, OptimizerId::DeRand1Bin,
                                       OptimizerId::Pso};
    std::vector<std::vector<double>> perf(15, std::vector<double>(4));
    for (auto &row : perf) {
        for (auto &v : row) {
            v = rng.uniform();
        }
    }
    const portfolio::ComplementarityTarget target(all, perf);
    auto subset = [&](unsigned mask) {
        std::vector<OptimizerId> s;
        for (std::size_t k = 0; k < 4; ++k) {
            if (mask & (1u << k)) {
                s.push_back(all[k]);
            }
        }
        return s;
    };
    auto v = [&](unsigned mask) { return mask == 0 ? 0.0 : target.value(subset(mask)); };
    const double fact[] = {1, 1, 2, 6, 24};
    std::vector<double> exact(4, 0.0);
    for (std::size_t a = 0; a < 4; ++a) {
        for (unsigned mask = 0; mask < 16; ++mask) {
            if (!(mask & (1u << a))) {
                const int s = std::popcount(mask);
                exact[a] += fact[s] * fact[3 - s] / fact[4] * (v(mask | (1u << a)) - v(mask));
            }
        }
    }
    std::vector<std::vector<OptimizerId>> perms;
    auto p = all;
    do {
        perms.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    const auto est = portfolio::shapley_from_permutations(target, all, perms);
    double worst = 0.0;
    for (std::size_t a = 0; a < 4; ++a) {
        worst = std::max(worst, std::abs(est[a] - exact[a]));
    }
    const double efficiency = std::abs(std::accumulate(exact.begin(), exact.end(), 0.0) - target.value(all));
    return {worst <= kShapleyTol && efficiency <= kShapleyTol,
            "max |estimator - enumeration| = " + fmt(worst) + ", |sum phi - v(full)| = " + fmt(efficiency)};
}

Verdict criterion_forest() {
    Rng rng(77);
    selection::Dataset data{50, 3, 3, {}, {}};
    for (std::size_t i = 0; i < 150; ++i) {
        data.x.push_back(rng.uniform(-1, 1));
        data.y.push_back(rng.uniform());
    }
    selection::ForestConfig single;
    single.trees = 1;
    single.min_leaf = 1;
    single.bootstrap = false;
    single.max_features = 3;
    std::vector<std::size_t> rows(data.rows);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    const auto tree = selection::RegressionTree::grow(data, rows, single, 5);
    double worst = 0.0;
    std::vector<double> out(3);
    for (std::size_t r = 0; r < data.rows; ++r) {
        tree.predict(data.row(r), out);
        for (std::size_t k = 0; k < 3; ++k) {
            worst = std::max(worst, std::abs(out[k] - data.target(r)[k]));
        }
    }

    // Feature f1 decides the winner; a 0.05 margin around the boundary keeps the classes separable.
    const std::vector<OptimizerId> pair{OptimizerId::Pso, OptimizerId::CmaDiag};
    auto vector_of = [](double f0, double f1) {
        features::FeatureVector fv;
        fv.names = {"f0", "f1"};
        fv.values = {f0, f1};
        return fv;
    };
    std::vector<features::FeatureVector> train;
    std::vector<std::vector<double>> targets;
    for (int i = 0; i < 120; ++i) {
        const double f1 = (i % 2 == 0 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
        train.push_back(vector_of(rng.uniform(), f1));
        targets.push_back(f1 < 0 ? std::vector<double>{0.8, 0.3} : std::vector<double>{0.1, 0.6});
    }
    const std::vector<std::string> names{"f0", "f1"};
    const auto model = selection::train_selector(train, targets, names, pair, selection::ForestConfig{}, 8);
    int correct = 0;
    const int held_out = 200;
    for (int k = 0; k < held_out; ++k) {
        const double f1 = (k % 2 == 0 ? -1.0 : 1.0) * rng.uniform(0.05, 1.0);
        correct += selection::predict_select(model, vector_of(rng.uniform(), f1)) == (f1 < 0 ? pair[0] : pair[1]);
    }
    return {worst <= kForestFitTol && correct == held_out,
            "exact-fit max error " + fmt(worst) + ", held-out accuracy " + std::to_string(correct) + "/" +
                std::to_string(held_out)};
}

struct TrendRun {
    std::uint64_t seed = 0;
    std::vector<Loaded> scenarios;
};

Verdict criterion_trend_a(const std::vector<TrendRun> &runs, double elapsed) {
    int wins = 0;
    std::string per_seed;
    for (const auto &run : runs) {
        std::optional<double> large;
        std::optional<double> best_smaller;
        for (const auto &s : run.scenarios) {
            const auto &r = s.result;
            if (r.b_factor() != kTrendBudgetFactor || !r.gap_closed || !r.flags.empty()) {
                continue;
            }
            if (r.ela_factor() == kTrendLargeElaFactor) {
                large = *r.gap_closed;
            } else if (r.ela_factor() < kTrendLargeElaFactor) {
                best_smaller = std::max(best_smaller.value_or(-INFINITY), *r.gap_closed);
            }
        }
        const bool win = large && best_smaller && *large < *best_smaller;
        wins += win ? 1 : 0;
        per_seed += (per_seed.empty() ? "" : " ") + std::string(win ? "+" : "-");
    }
    const int n = static_cast<int>(runs.size());
    const double p = sign_test_p(wins, n);
    return {n >= 10 && p < kSignificance && elapsed < kTrendSeconds,
            "gap_closed(B_ELA=100d) < best smaller B_ELA in " + std::to_string(wins) + "/" + std::to_string(n) +
                " seeds [" + per_seed + "], sign test p = " + fmt(p) + ", runtime " + fmt(elapsed, 3) + " s"};
}

Verdict criterion_viability(const std::vector<TrendRun> &runs) {
    int wins = 0;
    int n = 0;
    for (const auto &run : runs) {
        for (const auto &s : run.scenarios) {
            const auto &r = s.result;
            const double fraction = static_cast<double>(r.split.ela) / static_cast<double>(r.split.total);
            if (r.b_factor() < kViabilityMinBudgetFactor || fraction > kViabilityMaxFraction) {
                continue;
            }
            ++n;
            wins += r.pias_perf > r.sbs_perf ? 1 : 0;
        }
    }
    const double p = sign_test_p(wins, n);
    return {n > 0 && 2 * wins > n && p < kSignificance,
            "PIAS_perf > SBS_full in " + std::to_string(wins) + "/" + std::to_string(n) +
                " scenarios (B >= 100d, B_ELA/B <= 0.25, " + std::to_string(runs.size()) +
                " seeds), binomial p = " + fmt(p)};
}

Verdict criterion_trend_b(const std::vector<Loaded> &scenarios, std::string &context) {
    std::map<double, std::vector<double>> by_fraction;
    std::map<std::string, std::vector<double>> by_suite;
    for (const auto &s : scenarios) {
        const auto &r = s.result;
        if (!r.flags.empty() || !r.relative_budget_loss) {
            continue;
        }
        // Same clamp as the relative-budget-loss figure data.
        const double v = std::clamp(*r.relative_budget_loss, 0.0, 1.0);
        by_fraction[static_cast<double>(r.split.ela) / static_cast<double>(r.split.total)].push_back(v);
        by_suite[std::string(suites::to_string(r.suite))].push_back(v);
    }
    std::vector<double> fractions;
    std::vector<double> means;
    for (const auto &[f, values] : by_fraction) {
        fractions.push_back(f);
        means.push_back(std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()));
    }
    const double rho = fractions.size() >= 3 ? spearman(fractions, means) : 0.0;
    for (const auto &[suite, values] : by_suite) {
        context += (context.empty() ? "" : ", ") + suite + " " +
                   fmt(std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size()), 3);
    }
    return {rho > kSpearmanThreshold, "Spearman rho = " + fmt(rho) + " over " + std::to_string(fractions.size()) +
                                           " distinct B_ELA/B fractions"};
}

Verdict criterion_determinism(const fs::path &root, unsigned jobs) {
    std::vector<std::map<std::string, std::string>> outputs;
    for (const char *name : {"determinism_a", "determinism_b"}) {
        const auto config = fresh_config(minimal_grid(), root / name, jobs);
        run_grid(config);
        const fs::path report = root / name / "report";
        harness::cmd_report(harness::results_dir(config), report);
        std::map<std::string, std::string> files;
        files["scenarios.csv"] = harness::read_file(harness::results_dir(config) / "scenarios.csv");
        for (const auto &entry : fs::directory_iterator(report)) {
            if (entry.path().extension() == ".csv") {
                files[entry.path().filename().string()] = harness::read_file(entry.path());
            }
        }
        outputs.push_back(std::move(files));
    }
    return {outputs[0] == outputs[1] && !outputs[0].empty(),
            std::to_string(outputs[0].size()) + " result CSVs compared byte for byte"};
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance checks for the budget-aware selection pipeline"};
    fs::path work = fs::temp_directory_path() / "pias_acceptance";
    int seeds = 10;
    unsigned jobs = 0;
    app.add_option("--work-dir", work, "scratch directory (wiped)");
    app.add_option("--seeds", seeds, "master seeds for the BBOB trend criteria")->check(CLI::PositiveNumber);
    app.add_option("--jobs", jobs, "worker threads (0 = all cores)");
    CLI11_PARSE(app, argc, argv);

    std::map<int, Verdict> verdicts;
    const std::map<int, std::string> titles = {
        {1, "definition identities"},  {2, "attainment anchors"}, {3, "budget exactness"},
        {4, "Sobol correctness"},      {5, "Shapley oracle"},     {6, "forest oracle"},
        {7, "trend A: large B_ELA"},   {8, "trend B: budget loss"}, {9, "PIAS viability"},
        {10, "end-to-end determinism"},
    };
    auto guarded = [&](int id, const std::function<Verdict()> &check) {
        try {
            verdicts[id] = check();
        } catch (const std::exception &e) {
            verdicts[id] = {false, std::string("threw: ") + e.what()};
        }
        const auto &v = verdicts[id];
        std::printf("criterion %2d %s: %s | %s\n", id, v.pass ? "PASS" : "FAIL", titles.at(id).c_str(),
                    v.detail.c_str());
        std::fflush(stdout);
    };

    fs::create_directories(work);
    const auto minimal = fresh_config(minimal_grid(), work / "minimal", jobs);
    guarded(1, [&] {
        const auto start = std::chrono::steady_clock::now();
        run_grid(minimal);
        const double elapsed = seconds_since(start);
        return criterion_identities(load_results(minimal), elapsed);
    });
    guarded(2, criterion_attainment);
    guarded(3, [&] { return criterion_budget(minimal); });
    guarded(4, criterion_sobol);
    guarded(5, criterion_shapley);
    guarded(6, criterion_forest);

    std::vector<TrendRun> trend_runs;
    double trend_elapsed = 0.0;
    auto trend = [&]() -> const std::vector<TrendRun> & {
        if (trend_runs.empty()) {
            const auto start = std::chrono::steady_clock::now();
            for (int s = 1; s <= seeds; ++s) {
                const auto config =
                    fresh_config(trend_grid(static_cast<std::uint64_t>(s)), work / ("trend_" + std::to_string(s)), jobs);
                run_grid(config);
                trend_runs.push_back({static_cast<std::uint64_t>(s), load_results(config)});
            }
            trend_elapsed = seconds_since(start);
        }
        return trend_runs;
    };
    guarded(7, [&] {
        const auto &runs = trend();
        return criterion_trend_a(runs, trend_elapsed);
    });

    std::string context;
    guarded(8, [&] {
        const auto config = fresh_config(nlohmann::json{{"master_seed", 1}}, work / "desk", jobs);
        run_grid(config);
        return criterion_trend_b(load_results(config), context);
    });
    std::printf("             context: mean relative budget loss by suite (%s); reference shares "
                "ROG 0.11, MA-BBOB 0.22, BBOB 0.28\n",
                context.empty() ? "none" : context.c_str());
    guarded(9, [&] { return criterion_viability(trend()); });
    guarded(10, [&] { return criterion_determinism(work, jobs); });

    const int passed = static_cast<int>(
        std::count_if(verdicts.begin(), verdicts.end(), [](const auto &kv) { return kv.second.pass; }));
    std::printf("acceptance: %d/%zu criteria passed\n", passed, verdicts.size());
    return passed == static_cast<int>(verdicts.size()) ? 0 : 1;
}
