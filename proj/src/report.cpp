#include "pias/harness.hpp"

#include "pias/csv.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace pias::harness {

namespace fs = std::filesystem;

namespace {

struct Loaded {
    selection::ScenarioResult result;
    std::string portfolio_label;
    int size_key = 0;
};

bool excluded_from_views(const selection::ScenarioResult &r) {
    return std::any_of(r.flags.begin(), r.flags.end(), [](const std::string &f) {
        return f == "no_usable_features" || f.rfind("error", 0) == 0;
    });
}

std::string key_cells(const Loaded &s) {
    const auto &r = s.result;
    return std::string(suites::to_string(r.suite)) + ',' + std::to_string(r.dimension) + ',' + s.portfolio_label +
           ',' + std::to_string(r.b_factor()) + ',' + std::to_string(r.ela_factor());
}

double fraction(const selection::ScenarioResult &r) {
    return static_cast<double>(r.ela_factor()) / static_cast<double>(r.b_factor());
}

std::vector<Loaded> load_results(const fs::path &results) {
    const fs::path dir = results / "scenarios";
    if (!fs::is_directory(dir)) {
        throw MissingDependency("no scenario results under " + dir.string() + "; run select first");
    }
    std::vector<fs::path> files;
    for (const auto &entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() == ".json") {
            files.push_back(entry.path());
        }
    }
    std::vector<Loaded> out;
    for (const auto &path : files) {
        const auto node = nlohmann::json::parse(read_file(path));
        Loaded s;
        s.result = selection::scenario_result_from_json(node);
        const auto label = node.value("portfolio_label", nlohmann::json(nullptr));
        if (label.is_string()) {
            s.portfolio_label = label.get<std::string>();
            s.size_key = INT_MAX;
        } else if (label.is_number_integer()) {
            s.size_key = label.get<int>();
            s.portfolio_label = std::to_string(s.size_key);
        } else {
            s.size_key = static_cast<int>(s.result.portfolio.size());
            s.portfolio_label = std::to_string(s.size_key);
        }
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const Loaded &a, const Loaded &b) {
        const auto ka = std::make_tuple(std::string(suites::to_string(a.result.suite)), a.result.dimension,
                                        a.size_key, a.result.b_factor(), a.result.ela_factor());
        const auto kb = std::make_tuple(std::string(suites::to_string(b.result.suite)), b.result.dimension,
                                        b.size_key, b.result.b_factor(), b.result.ela_factor());
        return ka < kb;
    });
    return out;
}

}  // namespace

void cmd_report(const fs::path &results, const fs::path &out) {
    const auto scenarios = load_results(results);
    fs::create_directories(out);
    const std::string key_header = "suite,d,portfolio,B_factor,B_ELA_factor";

    std::ostringstream heat;
    heat << key_header << ",function,pias_perf,sbs_perf,relative_to_sbs\n";
    for (const auto &s : scenarios) {
        if (excluded_from_views(s.result)) {
            continue;
        }
        std::map<int, std::pair<double, double>> sums;
        std::map<int, int> counts;
        for (const auto &inst : s.result.instances) {
            sums[inst.function_id].first += inst.pias_perf;
            sums[inst.function_id].second += inst.sbs_perf;
            ++counts[inst.function_id];
        }
        double mean_pias = 0.0;
        double mean_sbs = 0.0;
        for (const auto &[fid, sum] : sums) {
            const double pias = sum.first / counts[fid];
            const double sbs = sum.second / counts[fid];
            mean_pias += pias;
            mean_sbs += sbs;
            heat << key_cells(s) << ',' << fid << ',' << csv::number(pias) << ',' << csv::number(sbs) << ','
                 << csv::number(pias - sbs) << '\n';
        }
        mean_pias /= static_cast<double>(sums.size());
        mean_sbs /= static_cast<double>(sums.size());
        heat << key_cells(s) << ",mean," << csv::number(mean_pias) << ',' << csv::number(mean_sbs) << ','
             << csv::number(mean_pias - mean_sbs) << '\n';
    }
    write_file_atomic(out / "fig2_heatmap.csv", heat.str());

    std::ostringstream gap_bbob;
    std::ostringstream gap_other;
    gap_bbob << key_header << ",gap_closed\n";
    gap_other << key_header << ",gap_closed\n";
    for (const auto &s : scenarios) {
        if (excluded_from_views(s.result) || !s.result.gap_closed) {
            continue;
        }
        auto &target = s.result.suite == suites::SuiteId::BbobLite ? gap_bbob : gap_other;
        target << key_cells(s) << ',' << csv::number(*s.result.gap_closed) << '\n';
    }
    write_file_atomic(out / "fig3_gap_closed_bbob.csv", gap_bbob.str());
    write_file_atomic(out / "fig4_gap_closed_other.csv", gap_other.str());

    std::ostringstream scatter;
    std::ostringstream per_instance;
    std::ostringstream decomposition;
    std::ostringstream relative;
    scatter << key_header << ",feature_fraction,sbs_perf,pias_perf\n";
    per_instance << key_header << ",instance_id,function,sbs_perf,pias_perf\n";
    decomposition << key_header << ",B_opt_factor,budget_loss,selection_loss\n";
    relative << key_header << ",feature_fraction,relative_budget_loss\n";

    struct Curve {
        std::vector<double> values;
    };
    std::map<std::pair<std::string, double>, Curve> curves;
    std::map<std::string, std::vector<double>> suite_shares;
    std::size_t unflagged = 0;
    for (const auto &s : scenarios) {
        const auto &r = s.result;
        if (!r.flags.empty()) {
            continue;
        }
        ++unflagged;
        scatter << key_cells(s) << ',' << csv::number(fraction(r)) << ',' << csv::number(r.sbs_perf) << ','
                << csv::number(r.pias_perf) << '\n';
        for (const auto &inst : r.instances) {
            per_instance << key_cells(s) << ',' << inst.instance_uid << ',' << inst.function_id << ','
                         << csv::number(inst.sbs_perf) << ',' << csv::number(inst.pias_perf) << '\n';
        }
        decomposition << key_cells(s) << ',' << (r.b_factor() - r.ela_factor()) << ',' << csv::number(r.budget_loss)
                      << ',' << csv::number(r.selection_loss) << '\n';
        if (r.relative_budget_loss) {
            // Negative selection loss (sampling beat VBS_opt) pushes the raw ratio past 1.
            const double value = std::clamp(*r.relative_budget_loss, 0.0, 1.0);
            relative << key_cells(s) << ',' << csv::number(fraction(r)) << ',' << csv::number(value) << '\n';
            const std::string suite(suites::to_string(r.suite));
            curves[{suite, fraction(r)}].values.push_back(value);
            suite_shares[suite].push_back(value);
        }
    }
    write_file_atomic(out / "fig5_pias_vs_sbs.csv", scatter.str());
    write_file_atomic(out / "fig5_instances.csv", per_instance.str());
    write_file_atomic(out / "fig6_decomposition.csv", decomposition.str());
    write_file_atomic(out / "fig7_relative_budget_loss.csv", relative.str());

    std::ostringstream curve;
    curve << "suite,feature_fraction,n,mean,ci_low,ci_high\n";
    for (const auto &[key, c] : curves) {
        const double n = static_cast<double>(c.values.size());
        double mean = 0.0;
        for (const double v : c.values) {
            mean += v;
        }
        mean /= n;
        double half = 0.0;
        if (c.values.size() > 1) {
            double ss = 0.0;
            for (const double v : c.values) {
                ss += (v - mean) * (v - mean);
            }
            half = 1.959963984540054 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
        }
        curve << key.first << ',' << csv::number(key.second) << ',' << c.values.size() << ',' << csv::number(mean)
              << ',' << csv::number(mean - half) << ',' << csv::number(mean + half) << '\n';
    }
    write_file_atomic(out / "fig7_curve.csv", curve.str());

    nlohmann::json summary;
    summary["scenarios"] = scenarios.size();
    summary["unflagged_scenarios"] = unflagged;
    nlohmann::json shares = nlohmann::json::object();
    for (const auto &[suite, values] : suite_shares) {
        double mean = 0.0;
        for (const double v : values) {
            mean += v;
        }
        shares[suite] = mean / static_cast<double>(values.size());
    }
    summary["mean_relative_budget_loss"] = shares;
    summary["reference_budget_loss_share"] = {{"ROG", 0.11}, {"MA-BBOB", 0.22}, {"BBOB", 0.28}};
    write_file_atomic(out / "summary.json", summary.dump(2) + "\n");
}

}  // namespace pias::harness
