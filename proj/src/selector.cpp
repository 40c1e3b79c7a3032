#include "pias/selector.hpp"

#include "pias/csv.hpp"
#include "pias/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pias::selection {

namespace {

constexpr double kGapTolerance = 1e-12;

double mean_perf_vector_entry(const perf::PerformanceTable &table, std::size_t instance, optim::OptimizerId id,
                              int budget) {
    return table.mean_perf(instance, table.optimizer_index(id), budget);
}

std::vector<double> target_vector(const perf::PerformanceTable &table, std::size_t instance,
                                  std::span<const optim::OptimizerId> portfolio, int budget) {
    std::vector<double> out;
    out.reserve(portfolio.size());
    for (const auto id : portfolio) {
        out.push_back(mean_perf_vector_entry(table, instance, id, budget));
    }
    return out;
}

double mean_of(const std::vector<double> &values) {
    return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

nlohmann::json optional_json(const std::optional<double> &value) {
    return value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

std::optional<double> optional_from_json(const nlohmann::json &node) {
    if (node.is_null()) {
        return std::nullopt;
    }
    return node.get<double>();
}

std::string optional_cell(const std::optional<double> &value) { return value ? csv::number(*value) : std::string(); }

}  // namespace

BudgetSplit BudgetSplit::make(int total, int ela) {
    if (ela < 1 || total <= ela) {
        throw std::invalid_argument("budget split requires 0 < B_ELA < B (got B=" + std::to_string(total) +
                                    ", B_ELA=" + std::to_string(ela) + ")");
    }
    return BudgetSplit{total, ela};
}

std::size_t argmax_canonical(std::span<const double> values, std::span<const optim::OptimizerId> portfolio) {
    if (values.empty() || values.size() != portfolio.size()) {
        throw std::invalid_argument("argmax needs one value per portfolio member");
    }
    std::size_t best = 0;
    for (std::size_t k = 1; k < values.size(); ++k) {
        if (values[k] > values[best] ||
            (values[k] == values[best] && canonical_index(portfolio[k]) < canonical_index(portfolio[best]))) {
            best = k;
        }
    }
    return best;
}

optim::OptimizerId sbs_full(const perf::PerformanceTable &table, std::span<const std::size_t> instances,
                            std::span<const optim::OptimizerId> portfolio, int budget) {
    if (instances.empty()) {
        throw std::invalid_argument("sbs_full needs at least one training instance");
    }
    std::vector<double> means;
    for (const auto id : portfolio) {
        double sum = 0.0;
        for (const std::size_t i : instances) {
            sum += mean_perf_vector_entry(table, i, id, budget);
        }
        means.push_back(sum / static_cast<double>(instances.size()));
    }
    return portfolio[argmax_canonical(means, portfolio)];
}

std::vector<VbsEntry> vbs(const perf::PerformanceTable &table, std::span<const std::size_t> instances,
                          std::span<const optim::OptimizerId> portfolio, int budget) {
    std::vector<VbsEntry> out;
    out.reserve(instances.size());
    for (const std::size_t i : instances) {
        const auto values = target_vector(table, i, portfolio, budget);
        const std::size_t best = argmax_canonical(values, portfolio);
        out.push_back(VbsEntry{values[best], portfolio[best]});
    }
    return out;
}

std::vector<double> SelectorModel::predict(const features::FeatureVector &features) const {
    std::vector<double> row;
    row.reserve(retained.size());
    for (const auto &name : retained) {
        row.push_back(features.at(name));
    }
    return forest.predict(row);
}

SelectorModel train_selector(std::span<const features::FeatureVector> features,
                             std::span<const std::vector<double>> targets, std::span<const std::string> retained,
                             std::span<const optim::OptimizerId> portfolio, const ForestConfig &config,
                             std::uint64_t seed, int fold) {
    if (retained.empty()) {
        throw NoUsableFeatures();
    }
    if (features.empty() || features.size() != targets.size()) {
        throw std::invalid_argument("train_selector needs one target vector per feature row");
    }
    Dataset data;
    data.rows = features.size();
    data.features = retained.size();
    data.outputs = portfolio.size();
    data.x.reserve(data.rows * data.features);
    data.y.reserve(data.rows * data.outputs);
    for (std::size_t r = 0; r < features.size(); ++r) {
        for (const auto &name : retained) {
            data.x.push_back(features[r].at(name));
        }
        if (targets[r].size() != portfolio.size()) {
            throw std::invalid_argument("target vector length differs from the portfolio size");
        }
        data.y.insert(data.y.end(), targets[r].begin(), targets[r].end());
    }
    SelectorModel model;
    model.forest = RegressionForest::fit(data, config, seed);
    model.retained.assign(retained.begin(), retained.end());
    model.portfolio.assign(portfolio.begin(), portfolio.end());
    model.fold = fold;
    model.seed = seed;
    return model;
}

optim::OptimizerId predict_select(const SelectorModel &model, const features::FeatureVector &features) {
    const auto predicted = model.predict(features);
    return model.portfolio[argmax_canonical(predicted, model.portfolio)];
}

double pias_perf(double ela_perf, double selected_perf) { return std::max(ela_perf, selected_perf); }

double gap_closed(double sbs, double vbs, double pias) {
    if (std::abs(vbs - sbs) <= kGapTolerance) {
        throw UndefinedGap();
    }
    if (vbs < sbs) {
        throw std::invalid_argument("gap_closed requires vbs >= sbs");
    }
    return (pias - sbs) / (vbs - sbs);
}

LossDecomposition decompose_loss(double vbs_full, double vbs_opt, double pias) {
    LossDecomposition out;
    out.budget_loss = vbs_full - vbs_opt;
    out.selection_loss = vbs_opt - pias;
    if (vbs_full > pias) {
        out.relative_budget_loss = out.budget_loss / (vbs_full - pias);
    }
    return out;
}

std::vector<std::vector<int>> cv_split(std::span<const int> ids, int k, std::uint64_t seed) {
    if (k < 1) {
        throw std::invalid_argument("fold count must be positive");
    }
    std::vector<int> unique(ids.begin(), ids.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    if (unique.size() < static_cast<std::size_t>(k)) {
        throw std::invalid_argument("fewer instances (" + std::to_string(unique.size()) + ") than folds (" +
                                    std::to_string(k) + ")");
    }
    Rng rng(seed);
    for (std::size_t i = unique.size(); i > 1; --i) {
        std::swap(unique[i - 1], unique[rng.below(i)]);
    }
    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < unique.size(); ++i) {
        folds[i % folds.size()].push_back(unique[i]);
    }
    for (auto &fold : folds) {
        std::sort(fold.begin(), fold.end());
    }
    return folds;
}

const std::vector<FeatureRecord> &FeatureStore::at(int uid) const {
    const auto it = by_instance.find(uid);
    if (it == by_instance.end()) {
        throw std::out_of_range("no features for instance " + std::to_string(uid) + " at B_ELA " +
                                std::to_string(ela_budget));
    }
    return it->second;
}

Trainer forest_trainer(const ForestConfig &config) {
    return [config](const TrainingSet &set) -> Chooser {
        auto model = std::make_shared<SelectorModel>(
            train_selector(set.rows, set.targets, set.retained, set.portfolio, config, set.seed, set.fold));
        return [model](const features::FeatureVector &fv) { return predict_select(*model, fv); };
    };
}

Chooser model_chooser(const SelectorModel &model) {
    return [&model](const features::FeatureVector &fv) { return predict_select(model, fv); };
}

bool ScenarioResult::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

ScenarioResult evaluate_scenario(const Scenario &scenario, const suites::InstanceSet &instances,
                                 const perf::PerformanceTable &table, const FeatureStore &store,
                                 std::span<const perf::Normalizer> normalizers, const Trainer &trainer) {
    const auto &split = scenario.split;
    const auto &portfolio = scenario.portfolio;
    const int b_total = split.total;
    const int b_opt = split.opt();
    if (portfolio.empty()) {
        throw std::invalid_argument("scenario portfolio is empty");
    }
    if (!table.has_budget(b_total) || !table.has_budget(b_opt)) {
        throw std::invalid_argument("performance table lacks checkpoint B or B_opt");
    }
    if (store.ela_budget != split.ela) {
        throw std::invalid_argument("feature store budget differs from B_ELA");
    }
    const auto &uids = table.instance_ids();
    if (normalizers.size() != uids.size()) {
        throw std::invalid_argument("one normalizer per table instance is required");
    }
    if (scenario.fold_count < 2) {
        throw std::invalid_argument("cross-validation needs at least two folds");
    }

    ScenarioResult result;
    result.suite = scenario.suite;
    result.dimension = scenario.dimension;
    result.portfolio = portfolio;
    result.split = split;

    std::vector<int> groups(uids.size());
    for (std::size_t i = 0; i < uids.size(); ++i) {
        groups[i] = instances.cv_groups[instances.index_of(uids[i])];
    }
    const auto folds = cv_split(groups, scenario.fold_count,
                                derive_seed(scenario.master_seed, "cv", suites::to_string(scenario.suite),
                                            scenario.dimension));
    std::vector<int> fold_of(uids.size(), -1);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        for (std::size_t i = 0; i < uids.size(); ++i) {
            if (std::binary_search(folds[f].begin(), folds[f].end(), groups[i])) {
                fold_of[i] = static_cast<int>(f);
            }
        }
    }

    std::vector<features::FeatureVector> all_vectors;
    for (const int uid : uids) {
        for (const auto &record : store.at(uid)) {
            all_vectors.push_back(record.features);
        }
    }
    const auto retained = features::filter_features(all_vectors);
    const bool fallback = retained.empty();
    if (fallback) {
        result.flags.emplace_back("no_usable_features");
    }

    std::vector<std::size_t> everyone(uids.size());
    std::iota(everyone.begin(), everyone.end(), std::size_t{0});
    const auto vbs_full_all = vbs(table, everyone, portfolio, b_total);
    const auto vbs_opt_all = vbs(table, everyone, portfolio, b_opt);
    const Trainer train = trainer ? trainer : forest_trainer(scenario.forest);

    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::vector<std::size_t> training;
        std::vector<std::size_t> testing;
        for (std::size_t i = 0; i < uids.size(); ++i) {
            (fold_of[i] == static_cast<int>(f) ? testing : training).push_back(i);
        }
        std::sort(testing.begin(), testing.end(), [&](std::size_t a, std::size_t b) { return uids[a] < uids[b]; });
        const auto sbs = sbs_full(table, training, portfolio, b_total);
        result.fold_sbs.push_back(sbs);

        Chooser choose;
        if (fallback) {
            choose = [sbs](const features::FeatureVector &) { return sbs; };
        } else {
            TrainingSet set;
            set.retained = retained;
            set.portfolio = portfolio;
            set.fold = static_cast<int>(f);
            set.seed = derive_seed(scenario.master_seed, "selector", suites::to_string(scenario.suite),
                                   scenario.dimension, static_cast<int>(portfolio.size()), b_total, split.ela,
                                   static_cast<int>(f));
            for (const std::size_t i : training) {
                const auto target = target_vector(table, i, portfolio, b_opt);
                for (const auto &record : store.at(uids[i])) {
                    set.rows.push_back(record.features);
                    set.targets.push_back(target);
                }
            }
            choose = train(set);
        }

        for (const std::size_t i : testing) {
            const auto &reps = store.at(uids[i]);
            if (reps.empty()) {
                throw std::invalid_argument("instance " + std::to_string(uids[i]) + " has no feature repetitions");
            }
            InstanceSummary summary;
            summary.instance_uid = uids[i];
            summary.function_id = instances.instances[instances.index_of(uids[i])].function_id();
            summary.fold = static_cast<int>(f);
            summary.sbs = sbs;
            summary.sbs_perf = mean_perf_vector_entry(table, i, sbs, b_total);
            summary.vbs_full = vbs_full_all[i].best_perf;
            summary.vbs_opt = vbs_opt_all[i].best_perf;
            for (std::size_t r = 0; r < reps.size(); ++r) {
                RepRecord rec;
                rec.instance_uid = uids[i];
                rec.repetition = static_cast<int>(r);
                rec.selected = choose(reps[r].features);
                rec.ela_perf = normalizers[i](reps[r].best_score);
                rec.a_star_perf = mean_perf_vector_entry(table, i, rec.selected, b_opt);
                rec.pias_perf = pias_perf(rec.ela_perf, rec.a_star_perf);
                rec.vbs_full = summary.vbs_full;
                rec.vbs_opt = summary.vbs_opt;
                const auto loss = decompose_loss(rec.vbs_full, rec.vbs_opt, rec.pias_perf);
                rec.budget_loss = loss.budget_loss;
                rec.selection_loss = loss.selection_loss;
                summary.ela_perf += rec.ela_perf;
                summary.a_star_perf += rec.a_star_perf;
                summary.pias_perf += rec.pias_perf;
                result.records.push_back(rec);
            }
            const auto n = static_cast<double>(reps.size());
            summary.ela_perf /= n;
            summary.a_star_perf /= n;
            summary.pias_perf /= n;
            const auto loss = decompose_loss(summary.vbs_full, summary.vbs_opt, summary.pias_perf);
            summary.budget_loss = loss.budget_loss;
            summary.selection_loss = loss.selection_loss;
            result.instances.push_back(summary);
        }
    }

    auto column = [&](auto member) {
        std::vector<double> values;
        for (const auto &s : result.instances) {
            values.push_back(s.*member);
        }
        return mean_of(values);
    };
    result.sbs_perf = column(&InstanceSummary::sbs_perf);
    result.vbs_full = column(&InstanceSummary::vbs_full);
    result.vbs_opt = column(&InstanceSummary::vbs_opt);
    result.ela_perf = column(&InstanceSummary::ela_perf);
    result.a_star_perf = column(&InstanceSummary::a_star_perf);
    result.pias_perf = column(&InstanceSummary::pias_perf);
    try {
        result.gap_closed = gap_closed(result.sbs_perf, result.vbs_full, result.pias_perf);
    } catch (const UndefinedGap &) {
        result.flags.emplace_back("undefined_gap");
    }
    const auto loss = decompose_loss(result.vbs_full, result.vbs_opt, result.pias_perf);
    result.budget_loss = loss.budget_loss;
    result.selection_loss = loss.selection_loss;
    result.relative_budget_loss = loss.relative_budget_loss;
    return result;
}

LiveOutcome solve_instance(const suites::ProblemInstance &instance, const Chooser &chooser, const BudgetSplit &split,
                           const sampling::SamplePlan &plan, const perf::Normalizer &normalizer,
                           const std::function<std::uint64_t(optim::OptimizerId)> &optimizer_seed,
                           int planning_budget, const features::EvaluateFn &evaluate) {
    if (plan.count != static_cast<std::size_t>(split.ela)) {
        throw std::invalid_argument("sample plan size differs from B_ELA");
    }
    const auto sample = features::draw_sample(instance, plan, evaluate);
    auto fv = features::compute_features(sample);
    fv.provenance = features::Provenance{instance.uid(), split.ela, plan.repetition_index};

    LiveOutcome out;
    out.selected = chooser(fv);
    const optim::ScoreFn score = [&evaluate](std::span<const double> x) { return evaluate(x).score(); };
    const auto trajectory =
        optim::run(out.selected, instance.bounds(), score, split.opt(), optimizer_seed(out.selected), planning_budget);
    out.ela_perf = normalizer(features::best_score(sample));
    out.a_star_perf = normalizer(trajectory.best_at(split.opt()));
    out.pias_perf = pias_perf(out.ela_perf, out.a_star_perf);
    return out;
}

nlohmann::json to_json(const ScenarioResult &result) {
    nlohmann::json node;
    node["suite"] = suites::to_string(result.suite);
    node["d"] = result.dimension;
    nlohmann::json members = nlohmann::json::array();
    for (const auto id : result.portfolio) {
        members.push_back(optim::to_string(id));
    }
    node["portfolio"] = members;
    node["B"] = result.split.total;
    node["B_ELA"] = result.split.ela;
    node["B_opt"] = result.split.opt();
    nlohmann::json sbs = nlohmann::json::array();
    for (const auto id : result.fold_sbs) {
        sbs.push_back(optim::to_string(id));
    }
    node["fold_sbs"] = sbs;
    node["sbs_perf"] = result.sbs_perf;
    node["vbs_full"] = result.vbs_full;
    node["vbs_opt"] = result.vbs_opt;
    node["ela_perf"] = result.ela_perf;
    node["a_star_perf"] = result.a_star_perf;
    node["pias_perf"] = result.pias_perf;
    node["gap_closed"] = optional_json(result.gap_closed);
    node["budget_loss"] = result.budget_loss;
    node["selection_loss"] = result.selection_loss;
    node["relative_budget_loss"] = optional_json(result.relative_budget_loss);
    node["flags"] = result.flags;

    nlohmann::json summaries = nlohmann::json::array();
    for (const auto &s : result.instances) {
        summaries.push_back({{"instance_id", s.instance_uid},
                             {"fid", s.function_id},
                             {"fold", s.fold},
                             {"sbs", optim::to_string(s.sbs)},
                             {"sbs_perf", s.sbs_perf},
                             {"vbs_full", s.vbs_full},
                             {"vbs_opt", s.vbs_opt},
                             {"ela_perf", s.ela_perf},
                             {"a_star_perf", s.a_star_perf},
                             {"pias_perf", s.pias_perf},
                             {"budget_loss", s.budget_loss},
                             {"selection_loss", s.selection_loss}});
    }
    node["instances"] = summaries;

    nlohmann::json records = nlohmann::json::array();
    for (const auto &r : result.records) {
        records.push_back({{"instance_id", r.instance_uid},
                           {"rep", r.repetition},
                           {"selected", optim::to_string(r.selected)},
                           {"ela_perf", r.ela_perf},
                           {"a_star_perf", r.a_star_perf},
                           {"pias_perf", r.pias_perf},
                           {"vbs_full", r.vbs_full},
                           {"vbs_opt", r.vbs_opt},
                           {"budget_loss", r.budget_loss},
                           {"selection_loss", r.selection_loss}});
    }
    node["records"] = records;
    return node;
}

ScenarioResult scenario_result_from_json(const nlohmann::json &node) {
    ScenarioResult result;
    result.suite = suites::suite_from_string(node.at("suite").get<std::string>());
    result.dimension = node.at("d").get<int>();
    for (const auto &m : node.at("portfolio")) {
        result.portfolio.push_back(optim::optimizer_from_string(m.get<std::string>()));
    }
    result.split = BudgetSplit{node.at("B").get<int>(), node.at("B_ELA").get<int>()};
    for (const auto &m : node.at("fold_sbs")) {
        result.fold_sbs.push_back(optim::optimizer_from_string(m.get<std::string>()));
    }
    result.sbs_perf = node.at("sbs_perf").get<double>();
    result.vbs_full = node.at("vbs_full").get<double>();
    result.vbs_opt = node.at("vbs_opt").get<double>();
    result.ela_perf = node.at("ela_perf").get<double>();
    result.a_star_perf = node.at("a_star_perf").get<double>();
    result.pias_perf = node.at("pias_perf").get<double>();
    result.gap_closed = optional_from_json(node.at("gap_closed"));
    result.budget_loss = node.at("budget_loss").get<double>();
    result.selection_loss = node.at("selection_loss").get<double>();
    result.relative_budget_loss = optional_from_json(node.at("relative_budget_loss"));
    result.flags = node.at("flags").get<std::vector<std::string>>();
    for (const auto &s : node.at("instances")) {
        InstanceSummary summary;
        summary.instance_uid = s.at("instance_id").get<int>();
        summary.function_id = s.at("fid").get<int>();
        summary.fold = s.at("fold").get<int>();
        summary.sbs = optim::optimizer_from_string(s.at("sbs").get<std::string>());
        summary.sbs_perf = s.at("sbs_perf").get<double>();
        summary.vbs_full = s.at("vbs_full").get<double>();
        summary.vbs_opt = s.at("vbs_opt").get<double>();
        summary.ela_perf = s.at("ela_perf").get<double>();
        summary.a_star_perf = s.at("a_star_perf").get<double>();
        summary.pias_perf = s.at("pias_perf").get<double>();
        summary.budget_loss = s.at("budget_loss").get<double>();
        summary.selection_loss = s.at("selection_loss").get<double>();
        result.instances.push_back(summary);
    }
    for (const auto &r : node.at("records")) {
        RepRecord rec;
        rec.instance_uid = r.at("instance_id").get<int>();
        rec.repetition = r.at("rep").get<int>();
        rec.selected = optim::optimizer_from_string(r.at("selected").get<std::string>());
        rec.ela_perf = r.at("ela_perf").get<double>();
        rec.a_star_perf = r.at("a_star_perf").get<double>();
        rec.pias_perf = r.at("pias_perf").get<double>();
        rec.vbs_full = r.at("vbs_full").get<double>();
        rec.vbs_opt = r.at("vbs_opt").get<double>();
        rec.budget_loss = r.at("budget_loss").get<double>();
        rec.selection_loss = r.at("selection_loss").get<double>();
        result.records.push_back(rec);
    }
    return result;
}

std::string scenario_csv_header() {
    return "suite,d,portfolio_size,B_factor,B_ELA_factor,sbs_perf,vbs_full,vbs_opt,pias_perf,gap_closed,"
           "budget_loss,selection_loss,relative_budget_loss,flags";
}

std::string scenario_csv_row(const ScenarioResult &r) {
    std::string flags;
    for (const auto &f : r.flags) {
        flags += (flags.empty() ? "" : ";") + f;
    }
    const std::vector<std::string> cells = {std::string(suites::to_string(r.suite)),
                                            std::to_string(r.dimension),
                                            std::to_string(r.portfolio.size()),
                                            std::to_string(r.b_factor()),
                                            std::to_string(r.ela_factor()),
                                            csv::number(r.sbs_perf),
                                            csv::number(r.vbs_full),
                                            csv::number(r.vbs_opt),
                                            csv::number(r.pias_perf),
                                            optional_cell(r.gap_closed),
                                            csv::number(r.budget_loss),
                                            csv::number(r.selection_loss),
                                            optional_cell(r.relative_budget_loss),
                                            flags};
    return csv::join(cells);
}

}  // namespace pias::selection
