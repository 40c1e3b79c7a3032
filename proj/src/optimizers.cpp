#include "pias/optimizers.hpp"

#include "pias/parallel.hpp"
#include "pias/sampling.hpp"
#include "pias/seeding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace pias::optim {

namespace {

constexpr std::array<std::string_view, 8> kNames = {
    "RANDOM_SEARCH", "ONE_PLUS_ONE_ES", "DE_RAND_1_BIN", "PSO", "NELDER_MEAD_RESTART", "SA_GAUSS", "CMA_DIAG",
    "SOBOL_SEARCH",
};

struct BudgetExhausted {};

/// Shared evaluation wrapper: clamps, counts, and records best-so-far.
class Context {
public:
    Context(const suites::Bounds &bounds, const ScoreFn &score, int budget, std::uint64_t seed, int planning_budget)
        : bounds_(bounds), score_(score), budget_(budget), planning_budget_(planning_budget), rng_(seed) {
        trace_.reserve(static_cast<std::size_t>(budget));
    }

    std::size_t dimension() const { return bounds_.lower.size(); }
    int planning_budget() const { return planning_budget_; }
    Rng &rng() { return rng_; }
    const suites::Bounds &bounds() const { return bounds_; }
    double range(std::size_t j) const { return bounds_.upper[j] - bounds_.lower[j]; }

    double mean_range() const {
        double sum = 0.0;
        for (std::size_t j = 0; j < dimension(); ++j) {
            sum += range(j);
        }
        return sum / static_cast<double>(dimension());
    }

    void clamp(std::vector<double> &x) const {
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] = std::clamp(x[j], bounds_.lower[j], bounds_.upper[j]);
        }
    }

    /// Clamps `x` in place and returns its score.
    double evaluate(std::vector<double> &x) {
        if (used_ >= budget_) {
            throw BudgetExhausted{};
        }
        clamp(x);
        const double value = score_(x);
        ++used_;
        best_ = std::min(best_, value);
        trace_.push_back(best_);
        return value;
    }

    std::vector<double> random_point() {
        std::vector<double> x(dimension());
        for (std::size_t j = 0; j < x.size(); ++j) {
            x[j] = rng_.uniform(bounds_.lower[j], bounds_.upper[j]);
        }
        return x;
    }

    int used() const { return used_; }
    std::vector<double> take_trace() { return std::move(trace_); }

private:
    const suites::Bounds &bounds_;
    const ScoreFn &score_;
    int budget_;
    int planning_budget_;
    Rng rng_;
    int used_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
    std::vector<double> trace_;
};

void random_search(Context &ctx) {
    for (;;) {
        auto x = ctx.random_point();
        ctx.evaluate(x);
    }
}

void sobol_search(Context &ctx) {
    const std::size_t d = ctx.dimension();
    if (d > sampling::max_sobol_dimension) {
        random_search(ctx);
    }
    const sampling::SobolSequence sequence(d, ctx.rng().next(), true);
    for (std::uint64_t index = 1;; ++index) {
        auto u = sequence.at(index);
        for (std::size_t j = 0; j < d; ++j) {
            u[j] = ctx.bounds().lower[j] + u[j] * ctx.range(j);
        }
        ctx.evaluate(u);
    }
}

// (1+1)-ES with the one-fifth success rule; restarts once the step size collapses.
void one_plus_one_es(Context &ctx) {
    const std::size_t d = ctx.dimension();
    const double up = 1.5;
    const double down = std::pow(up, -0.25);
    for (;;) {
        auto parent = ctx.random_point();
        double parent_score = ctx.evaluate(parent);
        double sigma = 0.2 * ctx.mean_range();
        while (sigma > 1e-12 * ctx.mean_range()) {
            std::vector<double> child(d);
            for (std::size_t j = 0; j < d; ++j) {
                child[j] = parent[j] + sigma * ctx.rng().normal();
            }
            const double child_score = ctx.evaluate(child);
            if (child_score <= parent_score) {
                parent = std::move(child);
                parent_score = child_score;
                sigma *= up;
            } else {
                sigma *= down;
            }
        }
    }
}

void de_rand_1_bin(Context &ctx) {
    const std::size_t d = ctx.dimension();
    const auto np = static_cast<std::size_t>(population_size(static_cast<int>(d), ctx.planning_budget()));
    constexpr double f = 0.5;
    constexpr double cr = 0.9;
    std::vector<std::vector<double>> pop(np);
    std::vector<double> scores(np);
    for (std::size_t i = 0; i < np; ++i) {
        pop[i] = ctx.random_point();
        scores[i] = ctx.evaluate(pop[i]);
    }
    for (;;) {
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t r1 = 0;
            std::size_t r2 = 0;
            std::size_t r3 = 0;
            do {
                r1 = ctx.rng().below(np);
            } while (r1 == i);
            do {
                r2 = ctx.rng().below(np);
            } while (r2 == i || r2 == r1);
            do {
                r3 = ctx.rng().below(np);
            } while (r3 == i || r3 == r1 || r3 == r2);
            const std::size_t forced = ctx.rng().below(d);
            std::vector<double> trial = pop[i];
            for (std::size_t j = 0; j < d; ++j) {
                if (j == forced || ctx.rng().uniform() < cr) {
                    trial[j] = pop[r1][j] + f * (pop[r2][j] - pop[r3][j]);
                }
            }
            const double s = ctx.evaluate(trial);
            if (s <= scores[i]) {
                pop[i] = std::move(trial);
                scores[i] = s;
            }
        }
    }
}

// Constriction-coefficient PSO with a ring (lbest) neighbourhood.
void pso(Context &ctx) {
    const std::size_t d = ctx.dimension();
    const auto np = static_cast<std::size_t>(population_size(static_cast<int>(d), ctx.planning_budget()));
    constexpr double inertia = 0.7298;
    constexpr double c1 = 1.49618;
    constexpr double c2 = 1.49618;
    std::vector<std::vector<double>> x(np);
    std::vector<std::vector<double>> v(np, std::vector<double>(d));
    std::vector<std::vector<double>> pbest(np);
    std::vector<double> pbest_score(np);
    for (std::size_t i = 0; i < np; ++i) {
        x[i] = ctx.random_point();
        for (std::size_t j = 0; j < d; ++j) {
            v[i][j] = 0.25 * ctx.range(j) * (2.0 * ctx.rng().uniform() - 1.0);
        }
        pbest_score[i] = ctx.evaluate(x[i]);
        pbest[i] = x[i];
    }
    for (;;) {
        for (std::size_t i = 0; i < np; ++i) {
            std::size_t leader = i;
            for (const std::size_t k : {(i + np - 1) % np, (i + 1) % np}) {
                if (pbest_score[k] < pbest_score[leader]) {
                    leader = k;
                }
            }
            for (std::size_t j = 0; j < d; ++j) {
                const double vmax = 0.5 * ctx.range(j);
                v[i][j] = inertia * v[i][j] + c1 * ctx.rng().uniform() * (pbest[i][j] - x[i][j]) +
                          c2 * ctx.rng().uniform() * (pbest[leader][j] - x[i][j]);
                v[i][j] = std::clamp(v[i][j], -vmax, vmax);
                x[i][j] += v[i][j];
            }
            const double s = ctx.evaluate(x[i]);
            if (s < pbest_score[i]) {
                pbest_score[i] = s;
                pbest[i] = x[i];
            }
        }
    }
}

void nelder_mead_restart(Context &ctx) {
    const std::size_t d = ctx.dimension();
    const double scale = ctx.mean_range();
    for (int restart = 0;; ++restart) {
        std::vector<std::vector<double>> simplex(d + 1);
        std::vector<double> fs(d + 1);
        simplex[0] = ctx.random_point();
        const double step = 0.1;
        for (std::size_t k = 1; k <= d; ++k) {
            simplex[k] = simplex[0];
            const std::size_t j = k - 1;
            const double delta = step * ctx.range(j);
            simplex[k][j] += simplex[k][j] + delta <= ctx.bounds().upper[j] ? delta : -delta;
        }
        for (std::size_t k = 0; k <= d; ++k) {
            fs[k] = ctx.evaluate(simplex[k]);
        }
        for (;;) {
            std::vector<std::size_t> order(d + 1);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fs[a] < fs[b]; });
            const std::size_t best = order.front();
            const std::size_t worst = order.back();
            const std::size_t second = order[d - 1];

            double diameter = 0.0;
            for (std::size_t k = 0; k <= d; ++k) {
                for (std::size_t j = 0; j < d; ++j) {
                    diameter = std::max(diameter, std::abs(simplex[k][j] - simplex[best][j]));
                }
            }
            if (diameter < 1e-8 * scale || fs[worst] - fs[best] <= 1e-15 * (std::abs(fs[best]) + 1e-300)) {
                break;
            }

            std::vector<double> centroid(d, 0.0);
            for (std::size_t k = 0; k <= d; ++k) {
                if (k == worst) {
                    continue;
                }
                for (std::size_t j = 0; j < d; ++j) {
                    centroid[j] += simplex[k][j] / static_cast<double>(d);
                }
            }
            auto along = [&](double t) {
                std::vector<double> p(d);
                for (std::size_t j = 0; j < d; ++j) {
                    p[j] = centroid[j] + t * (simplex[worst][j] - centroid[j]);
                }
                return p;
            };

            auto reflected = along(-1.0);
            const double fr = ctx.evaluate(reflected);
            if (fr < fs[best]) {
                auto expanded = along(-2.0);
                const double fe = ctx.evaluate(expanded);
                if (fe < fr) {
                    simplex[worst] = std::move(expanded);
                    fs[worst] = fe;
                } else {
                    simplex[worst] = std::move(reflected);
                    fs[worst] = fr;
                }
                continue;
            }
            if (fr < fs[second]) {
                simplex[worst] = std::move(reflected);
                fs[worst] = fr;
                continue;
            }
            const bool outside = fr < fs[worst];
            auto contracted = along(outside ? -0.5 : 0.5);
            const double fc = ctx.evaluate(contracted);
            if (fc < (outside ? fr : fs[worst])) {
                simplex[worst] = std::move(contracted);
                fs[worst] = fc;
                continue;
            }
            for (std::size_t k = 0; k <= d; ++k) {
                if (k == best) {
                    continue;
                }
                for (std::size_t j = 0; j < d; ++j) {
                    simplex[k][j] = simplex[best][j] + 0.5 * (simplex[k][j] - simplex[best][j]);
                }
                fs[k] = ctx.evaluate(simplex[k]);
            }
        }
    }
}

// Gaussian-proposal annealing. The temperature tracks a running mean of the
// observed uphill moves so the acceptance rule is independent of the
// objective's scale.
void sa_gauss(Context &ctx) {
    const std::size_t d = ctx.dimension();
    const double horizon = static_cast<double>(std::max(1, ctx.planning_budget()));
    auto current = ctx.random_point();
    double current_score = ctx.evaluate(current);
    double uphill = 0.0;
    for (;;) {
        const double progress = std::min(1.0, static_cast<double>(ctx.used()) / horizon);
        const double cooling = (1.0 - progress) * (1.0 - progress);
        const double sigma = 0.2 * (0.01 + 0.99 * (1.0 - progress));
        std::vector<double> proposal(d);
        for (std::size_t j = 0; j < d; ++j) {
            proposal[j] = current[j] + sigma * ctx.range(j) * ctx.rng().normal();
        }
        const double s = ctx.evaluate(proposal);
        const double delta = s - current_score;
        const double u = ctx.rng().uniform();
        if (delta <= 0.0) {
            current = std::move(proposal);
            current_score = s;
            continue;
        }
        uphill = uphill == 0.0 ? delta : 0.9 * uphill + 0.1 * delta;
        const double temperature = 0.5 * uphill * cooling;
        if (temperature > 0.0 && u < std::exp(-delta / temperature)) {
            current = std::move(proposal);
            current_score = s;
        }
    }
}

// Separable CMA-ES with restarts.
void cma_diag(Context &ctx) {
    const std::size_t n = ctx.dimension();
    const auto dn = static_cast<double>(n);
    const auto lambda = static_cast<std::size_t>(population_size(static_cast<int>(n), ctx.planning_budget()));
    const std::size_t mu = std::max<std::size_t>(1, lambda / 2);
    std::vector<double> w(mu);
    for (std::size_t i = 0; i < mu; ++i) {
        w[i] = std::log(static_cast<double>(mu) + 0.5) - std::log(static_cast<double>(i) + 1.0);
    }
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    double w2 = 0.0;
    for (double &wi : w) {
        wi /= wsum;
        w2 += wi * wi;
    }
    const double mueff = 1.0 / w2;
    const double cc = 4.0 / (dn + 4.0);
    const double cs = (mueff + 2.0) / (dn + mueff + 3.0);
    const double ds = 1.0 + 2.0 * std::max(0.0, std::sqrt((mueff - 1.0) / (dn + 1.0)) - 1.0) + cs;
    const double sep = (dn + 2.0) / 3.0;
    const double c1 = std::min(1.0, sep * 2.0 / ((dn + 1.3) * (dn + 1.3) + mueff));
    const double cmu =
        std::min(1.0 - c1, sep * 2.0 * (mueff - 2.0 + 1.0 / mueff) / ((dn + 2.0) * (dn + 2.0) + mueff));
    const double chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));
    const double scale = ctx.mean_range();

    for (;;) {
        std::vector<double> mean = ctx.random_point();
        double sigma = 0.3 * scale;
        std::vector<double> diag(n, 1.0);
        std::vector<double> ps(n, 0.0);
        std::vector<double> pc(n, 0.0);
        int generation = 0;
        for (;;) {
            ++generation;
            std::vector<std::vector<double>> ys(lambda, std::vector<double>(n));
            std::vector<double> scores(lambda);
            for (std::size_t k = 0; k < lambda; ++k) {
                std::vector<double> x(n);
                for (std::size_t j = 0; j < n; ++j) {
                    x[j] = mean[j] + sigma * std::sqrt(diag[j]) * ctx.rng().normal();
                }
                scores[k] = ctx.evaluate(x);
                for (std::size_t j = 0; j < n; ++j) {
                    ys[k][j] = (x[j] - mean[j]) / sigma;
                }
            }
            std::vector<std::size_t> order(lambda);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

            std::vector<double> yw(n, 0.0);
            for (std::size_t i = 0; i < mu; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    yw[j] += w[i] * ys[order[i]][j];
                }
            }
            double ps_norm2 = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                mean[j] += sigma * yw[j];
                ps[j] = (1.0 - cs) * ps[j] + std::sqrt(cs * (2.0 - cs) * mueff) * yw[j] / std::sqrt(diag[j]);
                ps_norm2 += ps[j] * ps[j];
            }
            const double ps_norm = std::sqrt(ps_norm2);
            const double threshold = (1.4 + 2.0 / (dn + 1.0)) * chi_n *
                                     std::sqrt(1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(generation)));
            const double hsig = ps_norm < threshold ? 1.0 : 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                pc[j] = (1.0 - cc) * pc[j] + hsig * std::sqrt(cc * (2.0 - cc) * mueff) * yw[j];
                double rank_mu = 0.0;
                for (std::size_t i = 0; i < mu; ++i) {
                    rank_mu += w[i] * ys[order[i]][j] * ys[order[i]][j];
                }
                diag[j] = (1.0 - c1 - cmu) * diag[j] +
                          c1 * (pc[j] * pc[j] + (1.0 - hsig) * cc * (2.0 - cc) * diag[j]) + cmu * rank_mu;
            }
            sigma *= std::exp(std::min(1.0, (cs / ds) * (ps_norm / chi_n - 1.0)));

            const auto [lo, hi] = std::minmax_element(diag.begin(), diag.end());
            double max_step = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                max_step = std::max(max_step, sigma * std::sqrt(diag[j]));
            }
            const bool collapsed = max_step < 1e-11 * scale;
            const bool ill_conditioned = *hi > 1e14 * *lo;
            const bool flat = scores[order.front()] == scores[order.back()] && generation > 10;
            if (collapsed || ill_conditioned || flat || !std::isfinite(sigma)) {
                break;
            }
        }
    }
}

}  // namespace

std::string_view to_string(OptimizerId id) { return kNames[static_cast<std::size_t>(canonical_index(id))]; }

OptimizerId optimizer_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kNames.size(); ++i) {
        if (kNames[i] == name) {
            return all_optimizers[i];
        }
    }
    throw std::invalid_argument("unknown optimizer '" + std::string(name) + "'");
}

double Trajectory::best_at(int budget) const {
    if (budget < 1 || budget > length) {
        throw std::out_of_range("budget " + std::to_string(budget) + " outside trajectory of length " +
                                std::to_string(length));
    }
    if (full_resolution()) {
        return best[static_cast<std::size_t>(budget - 1)];
    }
    const auto it = std::lower_bound(budgets.begin(), budgets.end(), budget);
    if (it == budgets.end() || *it != budget) {
        throw std::out_of_range("budget " + std::to_string(budget) + " was not recorded");
    }
    return best[static_cast<std::size_t>(it - budgets.begin())];
}

Trajectory Trajectory::downsampled(std::span<const int> keep) const {
    Trajectory out = *this;
    out.budgets.assign(keep.begin(), keep.end());
    std::sort(out.budgets.begin(), out.budgets.end());
    out.budgets.erase(std::unique(out.budgets.begin(), out.budgets.end()), out.budgets.end());
    out.best.clear();
    for (const int b : out.budgets) {
        out.best.push_back(best_at(b));
    }
    return out;
}

int population_size(int dimension, int planning_budget) {
    const int natural = 4 + static_cast<int>(std::floor(3.0 * std::log(static_cast<double>(dimension)))) * 2;
    return std::max(4, std::min(natural, planning_budget / 10));
}

Trajectory run(OptimizerId optimizer, const suites::Bounds &bounds, const ScoreFn &score, int max_budget,
               std::uint64_t seed, int planning_budget) {
    if (max_budget < 1) {
        throw std::invalid_argument("max_budget must be at least 1");
    }
    if (planning_budget <= 0) {
        planning_budget = max_budget;
    }
    Context ctx(bounds, score, max_budget, seed, planning_budget);
    try {
        switch (optimizer) {
        case OptimizerId::RandomSearch:
            random_search(ctx);
            break;
        case OptimizerId::OnePlusOneEs:
            one_plus_one_es(ctx);
            break;
        case OptimizerId::DeRand1Bin:
            de_rand_1_bin(ctx);
            break;
        case OptimizerId::Pso:
            pso(ctx);
            break;
        case OptimizerId::NelderMeadRestart:
            nelder_mead_restart(ctx);
            break;
        case OptimizerId::SaGauss:
            sa_gauss(ctx);
            break;
        case OptimizerId::CmaDiag:
            cma_diag(ctx);
            break;
        case OptimizerId::SobolSearch:
            sobol_search(ctx);
            break;
        }
    } catch (const BudgetExhausted &) {
    }
    if (ctx.used() != max_budget) {
        throw std::logic_error("optimizer stopped before exhausting its budget");
    }
    Trajectory trajectory;
    trajectory.optimizer = optimizer;
    trajectory.seed = seed;
    trajectory.length = max_budget;
    trajectory.best = ctx.take_trace();
    return trajectory;
}

Trajectory run(OptimizerId optimizer, const suites::ProblemInstance &instance, int max_budget, std::uint64_t seed,
               int planning_budget) {
    const ScoreFn score = [&instance](std::span<const double> x) { return instance.evaluate(x).score(); };
    Trajectory trajectory = run(optimizer, instance.bounds(), score, max_budget, seed, planning_budget);
    trajectory.instance_uid = instance.uid();
    return trajectory;
}

std::uint64_t run_seed(std::uint64_t master_seed, const suites::ProblemInstance &instance, OptimizerId optimizer,
                       int repetition) {
    return derive_seed(master_seed, "run", suites::to_string(instance.suite()), instance.uid(), instance.dimension(),
                       to_string(optimizer), repetition);
}

std::vector<Trajectory> run_portfolio(std::span<const OptimizerId> portfolio, const suites::InstanceSet &instances,
                                      int max_budget, int n_reps, std::uint64_t master_seed, unsigned jobs) {
    if (n_reps < 1) {
        throw std::invalid_argument("n_reps must be at least 1");
    }
    const std::size_t per_optimizer = instances.size() * static_cast<std::size_t>(n_reps);
    std::vector<Trajectory> out(portfolio.size() * per_optimizer);
    parallel_for(out.size(), jobs, [&](std::size_t slot) {
        const std::size_t o = slot / per_optimizer;
        const std::size_t i = (slot % per_optimizer) / static_cast<std::size_t>(n_reps);
        const int rep = static_cast<int>(slot % static_cast<std::size_t>(n_reps));
        const auto &instance = instances.instances[i];
        const auto seed = run_seed(master_seed, instance, portfolio[o], rep);
        out[slot] = run(portfolio[o], instance, max_budget, seed);
        out[slot].repetition = rep;
    });
    return out;
}

}  // namespace pias::optim
