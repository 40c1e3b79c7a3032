#include "pias/perfdb.hpp"

#include "pias/csv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace pias::perf {

double attainment_score(double error) {
    if (!(error >= 0.0)) {
        throw std::invalid_argument("attainment requires a non-negative error");
    }
    if (error <= attainment_lower_error) {
        return 1.0;
    }
    if (error >= attainment_upper_error) {
        return 0.0;
    }
    return std::clamp((2.0 - std::log10(error)) / 10.0, 0.0, 1.0);
}

Normalizer Normalizer::attainment() { return Normalizer{}; }

Normalizer Normalizer::extrema(double v_min, double v_max) {
    Normalizer n;
    n.attainment_ = false;
    n.v_min_ = v_min;
    n.v_max_ = v_max;
    return n;
}

double Normalizer::operator()(double score) const {
    if (attainment_) {
        return attainment_score(score);
    }
    if (degenerate()) {
        return 0.5;
    }
    return std::clamp((v_max_ - score) / (v_max_ - v_min_), 0.0, 1.0);
}

Normalizer rog_normalize(std::span<const optim::Trajectory *const> runs, int window_start, int window_end) {
    if (runs.empty()) {
        throw std::invalid_argument("rog_normalize needs at least one trajectory");
    }
    double v_min = INFINITY;
    double v_max = -INFINITY;
    for (const auto *run : runs) {
        const int start = std::clamp(window_start, 1, run->length);
        const int end = std::clamp(window_end, 1, run->length);
        v_max = std::max(v_max, run->best_at(start));
        v_min = std::min(v_min, run->best_at(end));
    }
    return Normalizer::extrema(v_min, v_max);
}

double perf_at(const optim::Trajectory &trajectory, int budget, const Normalizer &normalizer) {
    return normalizer(trajectory.best_at(budget));
}

std::vector<int> default_checkpoints(int dimension, int max_budget) {
    std::vector<int> out;
    for (const int factor : {10, 15, 25, 50, 100, 250, 500}) {
        const int b = factor * dimension;
        if (b >= 1 && b <= max_budget) {
            out.push_back(b);
        }
    }
    return out;
}

PerformanceTable::PerformanceTable(suites::SuiteId suite, int dimension, std::vector<int> instance_ids,
                                   std::vector<optim::OptimizerId> optimizers, int reps, std::vector<int> budgets)
    : suite_(suite),
      dimension_(dimension),
      instance_ids_(std::move(instance_ids)),
      optimizers_(std::move(optimizers)),
      reps_(reps),
      budgets_(std::move(budgets)) {
    if (!std::is_sorted(budgets_.begin(), budgets_.end())) {
        throw std::invalid_argument("budget checkpoints must be sorted");
    }
    values_.assign(instance_ids_.size() * optimizers_.size() * static_cast<std::size_t>(reps_) * budgets_.size(),
                   std::nan(""));
}

std::size_t PerformanceTable::instance_index(int uid) const {
    const auto it = std::find(instance_ids_.begin(), instance_ids_.end(), uid);
    if (it == instance_ids_.end()) {
        throw std::out_of_range("instance " + std::to_string(uid) + " not in table");
    }
    return static_cast<std::size_t>(it - instance_ids_.begin());
}

std::size_t PerformanceTable::optimizer_index(optim::OptimizerId id) const {
    const auto it = std::find(optimizers_.begin(), optimizers_.end(), id);
    if (it == optimizers_.end()) {
        throw std::out_of_range("optimizer " + std::string(optim::to_string(id)) + " not in table");
    }
    return static_cast<std::size_t>(it - optimizers_.begin());
}

std::size_t PerformanceTable::budget_index(int budget) const {
    const auto it = std::lower_bound(budgets_.begin(), budgets_.end(), budget);
    if (it == budgets_.end() || *it != budget) {
        throw std::out_of_range("budget " + std::to_string(budget) + " is not a table checkpoint");
    }
    return static_cast<std::size_t>(it - budgets_.begin());
}

bool PerformanceTable::has_budget(int budget) const {
    return std::binary_search(budgets_.begin(), budgets_.end(), budget);
}

double PerformanceTable::mean_perf(std::size_t instance, std::size_t optimizer, int budget) const {
    const std::size_t b = budget_index(budget);
    double sum = 0.0;
    for (int rep = 0; rep < reps_; ++rep) {
        sum += at(instance, optimizer, rep, b);
    }
    return sum / static_cast<double>(reps_);
}

PerformanceTable build_table(std::span<const optim::Trajectory> trajectories, suites::SuiteId suite, int dimension,
                             std::span<const int> instance_ids, std::span<const optim::OptimizerId> optimizers,
                             int reps, std::span<const int> budgets, std::span<const Normalizer> normalizers) {
    if (normalizers.size() != instance_ids.size()) {
        throw std::invalid_argument("one normalizer per instance is required");
    }
    std::vector<int> sorted_budgets(budgets.begin(), budgets.end());
    std::sort(sorted_budgets.begin(), sorted_budgets.end());
    sorted_budgets.erase(std::unique(sorted_budgets.begin(), sorted_budgets.end()), sorted_budgets.end());

    PerformanceTable table(suite, dimension, std::vector<int>(instance_ids.begin(), instance_ids.end()),
                           std::vector<optim::OptimizerId>(optimizers.begin(), optimizers.end()), reps,
                           sorted_budgets);

    std::map<std::tuple<int, int, int>, const optim::Trajectory *> index;
    for (const auto &t : trajectories) {
        index[{canonical_index(t.optimizer), t.instance_uid, t.repetition}] = &t;
    }
    for (std::size_t i = 0; i < instance_ids.size(); ++i) {
        for (std::size_t o = 0; o < optimizers.size(); ++o) {
            for (int rep = 0; rep < reps; ++rep) {
                const auto it = index.find({canonical_index(optimizers[o]), instance_ids[i], rep});
                if (it == index.end()) {
                    throw std::runtime_error("incomplete run set: missing " +
                                             std::string(optim::to_string(optimizers[o])) + " on instance " +
                                             std::to_string(instance_ids[i]) + " rep " + std::to_string(rep));
                }
                for (std::size_t b = 0; b < sorted_budgets.size(); ++b) {
                    table.set(i, o, rep, b, perf_at(*it->second, sorted_budgets[b], normalizers[i]));
                }
            }
        }
    }
    return table;
}

void write_table_csv(std::ostream &out, const PerformanceTable &table) {
    out << "suite,d,instance_id,optimizer,rep,budget,perf\n";
    const auto suite = suites::to_string(table.suite());
    for (std::size_t i = 0; i < table.instance_ids().size(); ++i) {
        for (std::size_t o = 0; o < table.optimizers().size(); ++o) {
            for (int rep = 0; rep < table.reps(); ++rep) {
                for (std::size_t b = 0; b < table.budgets().size(); ++b) {
                    out << suite << ',' << table.dimension() << ',' << table.instance_ids()[i] << ','
                        << optim::to_string(table.optimizers()[o]) << ',' << rep << ',' << table.budgets()[b] << ','
                        << csv::number(table.at(i, o, rep, b)) << '\n';
                }
            }
        }
    }
}

PerformanceTable read_table_csv(std::istream &in) {
    std::vector<std::string> cells;
    if (!csv::read_row(in, cells) || cells.size() != 7 || cells[0] != "suite") {
        throw std::runtime_error("performance table: missing header");
    }
    struct Row {
        int instance;
        optim::OptimizerId optimizer;
        int rep;
        int budget;
        double perf;
    };
    std::vector<Row> rows;
    std::string suite_name;
    int dimension = 0;
    std::vector<int> instances;
    std::vector<optim::OptimizerId> optimizers;
    std::vector<int> budgets;
    int max_rep = -1;
    auto remember = [](auto &list, const auto &value) {
        if (std::find(list.begin(), list.end(), value) == list.end()) {
            list.push_back(value);
        }
    };
    while (csv::read_row(in, cells)) {
        if (cells.size() == 1 && cells[0].empty()) {
            continue;
        }
        if (cells.size() != 7) {
            throw std::runtime_error("performance table: malformed row");
        }
        suite_name = cells[0];
        dimension = std::stoi(cells[1]);
        Row row{std::stoi(cells[2]), optim::optimizer_from_string(cells[3]), std::stoi(cells[4]), std::stoi(cells[5]),
                csv::parse_number(cells[6])};
        remember(instances, row.instance);
        remember(optimizers, row.optimizer);
        remember(budgets, row.budget);
        max_rep = std::max(max_rep, row.rep);
        rows.push_back(row);
    }
    if (rows.empty()) {
        throw std::runtime_error("performance table: no rows");
    }
    std::sort(budgets.begin(), budgets.end());
    PerformanceTable table(suites::suite_from_string(suite_name), dimension, instances, optimizers, max_rep + 1,
                           budgets);
    if (rows.size() != table.cell_count()) {
        throw std::runtime_error("incomplete run set: performance table is not dense");
    }
    for (const auto &row : rows) {
        table.set(table.instance_index(row.instance), table.optimizer_index(row.optimizer), row.rep,
                  table.budget_index(row.budget), row.perf);
    }
    return table;
}

}  // namespace pias::perf
