#include "pias/features.hpp"

#include "pias/csv.hpp"
#include "pias/seeding.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

namespace pias::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kRidge = 1e-10;
constexpr double kTiny = 1e-12;

double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) {
        return kNaN;
    }
    const double m = mean_of(v);
    double ss = 0.0;
    for (const double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double ma = mean_of(a);
    const double mb = mean_of(b);
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) {
        return kNaN;
    }
    return sab / std::sqrt(saa * sbb);
}

double distance(const sampling::Point &a, const sampling::Point &b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        s += (a[j] - b[j]) * (a[j] - b[j]);
    }
    return std::sqrt(s);
}

struct Moments {
    double skewness = kNaN;
    double kurtosis = kNaN;
};

// Bias-corrected sample skewness (G1) and excess kurtosis (G2).
Moments distribution(std::span<const double> y) {
    const auto n = static_cast<double>(y.size());
    const double m = mean_of(y);
    double m2 = 0.0;
    double m3 = 0.0;
    double m4 = 0.0;
    for (const double v : y) {
        const double c = v - m;
        m2 += c * c;
        m3 += c * c * c;
        m4 += c * c * c * c;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    Moments out;
    if (m2 <= 0.0) {
        return out;
    }
    const double g1 = m3 / std::pow(m2, 1.5);
    const double g2 = m4 / (m2 * m2) - 3.0;
    out.skewness = g1 * std::sqrt(n * (n - 1.0)) / (n - 2.0);
    out.kurtosis = ((n + 1.0) * g2 + 6.0) * (n - 1.0) / ((n - 2.0) * (n - 3.0));
    return out;
}

struct Fit {
    double adjusted_r2 = kNaN;
    Eigen::VectorXd coefficients;
};

// Ridge-jittered least squares on [1, design]; reports adjusted R^2.
Fit least_squares(const Eigen::MatrixXd &design, const Eigen::VectorXd &y) {
    const auto n = design.rows();
    const auto p = design.cols();
    Eigen::MatrixXd a(n, p + 1);
    a.col(0).setOnes();
    a.rightCols(p) = design;
    Eigen::MatrixXd gram = a.transpose() * a;
    gram.diagonal().array() += kRidge;
    Fit fit;
    const Eigen::VectorXd beta = gram.ldlt().solve(a.transpose() * y);
    fit.coefficients = beta.tail(p);
    const double sst = (y.array() - y.mean()).square().sum();
    const double sse = (y - a * beta).squaredNorm();
    const auto dof = static_cast<double>(n - p - 1);
    if (sst > 0.0 && dof > 0.0) {
        const double r2 = 1.0 - sse / sst;
        fit.adjusted_r2 = 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / dof;
    }
    return fit;
}

double coefficient_ratio(const Eigen::VectorXd &coefficients) {
    const Eigen::ArrayXd magnitude = coefficients.array().abs();
    if (magnitude.size() == 0 || magnitude.minCoeff() < kTiny) {
        return kNaN;
    }
    return magnitude.maxCoeff() / magnitude.minCoeff();
}

std::vector<double> epsilon_grid() {
    std::vector<double> grid{0.0};
    for (int half_steps = -10; half_steps <= 30; ++half_steps) {
        grid.push_back(std::pow(10.0, 0.5 * half_steps));
    }
    return grid;
}

struct InformationContent {
    double h_max = kNaN;
    double eps_s = kNaN;
    double m0 = kNaN;
};

InformationContent information_content(const Sample &s, const std::vector<std::vector<double>> &dist) {
    const std::size_t n = s.size();
    // Greedy nearest-neighbour tour from the first sample point; ties go to the lowest index.
    std::vector<std::size_t> tour{0};
    std::vector<bool> visited(n, false);
    visited[0] = true;
    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t from = tour.back();
        std::size_t next = n;
        for (std::size_t j = 0; j < n; ++j) {
            if (!visited[j] && (next == n || dist[from][j] < dist[from][next])) {
                next = j;
            }
        }
        visited[next] = true;
        tour.push_back(next);
    }
    std::vector<double> slope(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
        const double dx = dist[tour[k]][tour[k + 1]];
        const double dy = s.y_norm[tour[k + 1]] - s.y_norm[tour[k]];
        slope[k] = dx > 0.0 ? dy / dx : 0.0;
    }

    auto symbols = [&](double eps) {
        std::vector<int> out(slope.size());
        for (std::size_t k = 0; k < slope.size(); ++k) {
            out[k] = slope[k] < -eps ? -1 : (slope[k] > eps ? 1 : 0);
        }
        return out;
    };
    auto entropy = [](const std::vector<int> &sym) {
        if (sym.size() < 2) {
            return kNaN;
        }
        std::array<std::array<double, 3>, 3> counts{};
        for (std::size_t k = 0; k + 1 < sym.size(); ++k) {
            counts[static_cast<std::size_t>(sym[k] + 1)][static_cast<std::size_t>(sym[k + 1] + 1)] += 1.0;
        }
        const auto pairs = static_cast<double>(sym.size() - 1);
        double h = 0.0;
        for (std::size_t p = 0; p < 3; ++p) {
            for (std::size_t q = 0; q < 3; ++q) {
                if (p != q && counts[p][q] > 0.0) {
                    const double prob = counts[p][q] / pairs;
                    h -= prob * std::log(prob) / std::log(6.0);
                }
            }
        }
        return h;
    };

    InformationContent ic;
    for (const double eps : epsilon_grid()) {
        const double h = entropy(symbols(eps));
        if (std::isnan(h)) {
            return ic;
        }
        ic.h_max = std::isnan(ic.h_max) ? h : std::max(ic.h_max, h);
        if (std::isnan(ic.eps_s) && h < 0.05) {
            ic.eps_s = eps;
        }
    }

    // Partial information at eps = 0: drop neutral symbols, merge runs, count what remains.
    const auto sym = symbols(0.0);
    std::size_t changes = 0;
    int last = 0;
    for (const int v : sym) {
        if (v != 0 && v != last) {
            ++changes;
            last = v;
        }
    }
    ic.m0 = static_cast<double>(changes) / static_cast<double>(sym.size());
    return ic;
}

struct NearestBetter {
    double mean_ratio = kNaN;
    double sd_ratio = kNaN;
    double fitness_cor = kNaN;
};

NearestBetter nearest_better(const Sample &s, const std::vector<std::vector<double>> &dist) {
    const std::size_t n = s.size();
    std::vector<double> nn(n, INFINITY);
    std::vector<double> nb(n, INFINITY);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            nn[i] = std::min(nn[i], dist[i][j]);
            if (s.y[j] < s.y[i]) {
                nb[i] = std::min(nb[i], dist[i][j]);
            }
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (std::isinf(nb[i])) {
            nb[i] = nn[i];
        }
    }
    NearestBetter out;
    const double mean_nb = mean_of(nb);
    if (mean_nb > 0.0) {
        out.mean_ratio = mean_of(nn) / mean_nb;
    }
    const double sd_nb = sample_sd(nb);
    if (sd_nb > 0.0) {
        out.sd_ratio = sample_sd(nn) / sd_nb;
    }
    std::vector<double> ratio(n);
    for (std::size_t i = 0; i < n; ++i) {
        ratio[i] = nn[i] > 0.0 ? nb[i] / nn[i] : kNaN;
    }
    if (std::none_of(ratio.begin(), ratio.end(), [](double r) { return std::isnan(r); })) {
        out.fitness_cor = pearson(ratio, s.y_norm);
    }
    return out;
}

std::vector<std::size_t> order_by_value(const Sample &s) {
    std::vector<std::size_t> order(s.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.y[a] < s.y[b]; });
    return order;
}

double mean_pairwise(std::span<const std::size_t> members, const std::vector<std::vector<double>> &dist) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t a = 0; a < members.size(); ++a) {
        for (std::size_t b = a + 1; b < members.size(); ++b) {
            sum += dist[members[a]][members[b]];
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : kNaN;
}

}  // namespace

Sample make_sample(std::vector<sampling::Point> x, std::vector<double> y, std::optional<double> optimum) {
    if (x.size() != y.size()) {
        throw std::invalid_argument("sample points and values differ in length");
    }
    Sample s;
    s.x = std::move(x);
    s.y = std::move(y);
    s.optimum = optimum;
    s.y_norm.assign(s.y.size(), 0.5);
    if (!s.y.empty()) {
        const auto [lo, hi] = std::minmax_element(s.y.begin(), s.y.end());
        const double y_min = *lo;
        const double y_max = *hi;
        if (y_max > y_min) {
            for (std::size_t i = 0; i < s.y.size(); ++i) {
                s.y_norm[i] = (s.y[i] - y_min) / (y_max - y_min);
            }
        }
    }
    return s;
}

Sample sample_instance(const suites::ProblemInstance &instance, const std::vector<sampling::Point> &points) {
    std::vector<double> y;
    y.reserve(points.size());
    for (const auto &p : points) {
        y.push_back(instance.evaluate(p).value);
    }
    return make_sample(points, std::move(y), instance.optimum_value());
}

sampling::SamplePlan feature_plan(const suites::ProblemInstance &instance, int ela_budget, int repetition,
                                  std::uint64_t master_seed) {
    if (ela_budget < 1) {
        throw std::invalid_argument("feature budget must be positive");
    }
    sampling::SamplePlan plan;
    plan.dimension = static_cast<std::size_t>(instance.dimension());
    plan.count = static_cast<std::size_t>(ela_budget);
    plan.repetition_index = repetition;
    plan.scramble_seed = derive_seed(master_seed, "features", suites::to_string(instance.suite()), instance.uid(),
                                     instance.dimension(), repetition);
    return plan;
}

Sample draw_sample(const suites::ProblemInstance &instance, const sampling::SamplePlan &plan,
                   const EvaluateFn &evaluate) {
    auto points = sampling::scale_to_box(sampling::sobol_points(plan), instance.bounds());
    std::vector<double> y;
    y.reserve(points.size());
    for (const auto &p : points) {
        y.push_back(evaluate ? evaluate(p).value : instance.evaluate(p).value);
    }
    return make_sample(std::move(points), std::move(y), instance.optimum_value());
}

double FeatureVector::at(std::string_view name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) {
            return values[i];
        }
    }
    throw std::out_of_range("missing feature '" + std::string(name) + "'");
}

const std::vector<std::string> &feature_names() {
    static const std::vector<std::string> names = {
        "distr.skewness",
        "distr.kurtosis",
        "meta.lin.R2",
        "meta.lin.coef_ratio",
        "meta.quad.R2",
        "meta.quad.cond",
        "ic.h_max",
        "ic.eps_s",
        "ic.m0",
        "nbc.nn_nb_mean_ratio",
        "nbc.nn_nb_sd_ratio",
        "nbc.nb_fitness_cor",
        "disp.ratio_mean_10",
        "fdc",
    };
    return names;
}

FeatureVector compute_features(const Sample &sample) {
    const std::size_t n = sample.size();
    if (n < min_sample_size) {
        throw InsufficientSample("feature computation needs at least 10 sampled points");
    }
    const std::size_t d = sample.x.front().size();
    if (d < 1) {
        throw std::invalid_argument("sample points must have at least one coordinate");
    }

    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            dist[i][j] = dist[j][i] = distance(sample.x[i], sample.x[j]);
        }
    }

    const Moments moments = distribution(sample.y_norm);

    Eigen::MatrixXd linear(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    Eigen::MatrixXd quadratic(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * d));
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        y(r) = sample.y_norm[i];
        for (std::size_t j = 0; j < d; ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            linear(r, c) = sample.x[i][j];
            quadratic(r, c) = sample.x[i][j];
            quadratic(r, c + static_cast<Eigen::Index>(d)) = sample.x[i][j] * sample.x[i][j];
        }
    }
    const Fit lin = least_squares(linear, y);
    const Fit quad = least_squares(quadratic, y);

    const InformationContent ic = information_content(sample, dist);
    const NearestBetter nbc = nearest_better(sample, dist);

    const auto order = order_by_value(sample);
    const std::size_t top = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(0.1 * static_cast<double>(n))));
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const double disp_all = mean_pairwise(all, dist);
    const double disp_top = mean_pairwise(std::span(order).first(top), dist);
    const double dispersion = disp_all > 0.0 ? disp_top / disp_all : kNaN;

    std::vector<double> to_best(n);
    for (std::size_t i = 0; i < n; ++i) {
        to_best[i] = dist[i][order.front()];
    }
    const double fdc = pearson(sample.y_norm, to_best);

    FeatureVector fv;
    fv.names = feature_names();
    fv.values = {
        moments.skewness,
        moments.kurtosis,
        lin.adjusted_r2,
        coefficient_ratio(lin.coefficients),
        quad.adjusted_r2,
        coefficient_ratio(quad.coefficients.tail(static_cast<Eigen::Index>(d))),
        ic.h_max,
        ic.eps_s,
        ic.m0,
        nbc.mean_ratio,
        nbc.sd_ratio,
        nbc.fitness_cor,
        dispersion,
        fdc,
    };
    return fv;
}

std::vector<std::string> filter_features(std::span<const FeatureVector> vectors) {
    if (vectors.empty()) {
        throw std::invalid_argument("filter_features needs at least one feature vector");
    }
    const auto &names = vectors.front().names;
    for (const auto &v : vectors) {
        if (v.names != names) {
            throw std::invalid_argument("feature vectors have different key sets");
        }
    }
    std::vector<std::string> kept;
    for (std::size_t k = 0; k < names.size(); ++k) {
        double lo = INFINITY;
        double hi = -INFINITY;
        bool finite = true;
        for (const auto &v : vectors) {
            const double value = v.values[k];
            if (!std::isfinite(value)) {
                finite = false;
                break;
            }
            lo = std::min(lo, value);
            hi = std::max(hi, value);
        }
        if (finite && hi - lo >= kTiny) {
            kept.push_back(names[k]);
        }
    }
    return kept;
}

double best_score(const Sample &sample) {
    if (sample.y.empty()) {
        throw std::invalid_argument("empty sample");
    }
    const double best = *std::min_element(sample.y.begin(), sample.y.end());
    return sample.optimum ? std::max(0.0, best - *sample.optimum) : best;
}

double ela_best(const Sample &sample, const perf::Normalizer &normalizer) { return normalizer(best_score(sample)); }

void write_features_csv(std::ostream &out, std::span<const FeatureVector> vectors) {
    const std::vector<std::string> &names = vectors.empty() ? feature_names() : vectors.front().names;
    out << "instance_id,rep,B_ELA," << csv::join(names) << '\n';
    for (const auto &v : vectors) {
        out << v.provenance.instance_uid << ',' << v.provenance.repetition << ',' << v.provenance.ela_budget;
        for (const double value : v.values) {
            out << ',' << csv::number(value);
        }
        out << '\n';
    }
}

std::vector<FeatureVector> read_features_csv(std::istream &in) {
    std::vector<std::string> cells;
    if (!csv::read_row(in, cells) || cells.size() < 3 || cells[0] != "instance_id") {
        throw std::runtime_error("feature matrix: missing header");
    }
    const std::vector<std::string> names(cells.begin() + 3, cells.end());
    std::vector<FeatureVector> out;
    while (csv::read_row(in, cells)) {
        if (cells.size() == 1 && cells[0].empty()) {
            continue;
        }
        if (cells.size() != names.size() + 3) {
            throw std::runtime_error("feature matrix: malformed row");
        }
        FeatureVector v;
        v.names = names;
        v.provenance = {std::stoi(cells[0]), std::stoi(cells[2]), std::stoi(cells[1])};
        for (std::size_t k = 3; k < cells.size(); ++k) {
            v.values.push_back(csv::parse_number(cells[k]));
        }
        out.push_back(std::move(v));
    }
    return out;
}

}  // namespace pias::features
