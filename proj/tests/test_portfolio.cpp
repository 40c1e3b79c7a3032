#include "pias/portfolio.hpp"
#include "pias/seeding.hpp"

#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

using namespace pias;
using namespace pias::portfolio;
using optim::OptimizerId;

namespace {

std::vector<OptimizerId> first_n(std::size_t n) {
    return {optim::all_optimizers.begin(), optim::all_optimizers.begin() + static_cast<std::ptrdiff_t>(n)};
}

ComplementarityTarget random_target(std::size_t algorithms, std::size_t instances, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> perf(instances, std::vector<double>(algorithms));
    for (auto &row : perf) {
        for (auto &v : row) {
            v = rng.uniform();
        }
    }
    return ComplementarityTarget(first_n(algorithms), perf);
}

std::vector<OptimizerId> members_of(const std::vector<OptimizerId> &all, unsigned mask) {
    std::vector<OptimizerId> out;
    for (std::size_t k = 0; k < all.size(); ++k) {
        if (mask & (1u << k)) {
            out.push_back(all[k]);
        }
    }
    return out;
}

// Exact Shapley by enumerating all subsets; v(empty) = 0.
std::vector<double> brute_force_shapley(const ComplementarityTarget &t, const std::vector<OptimizerId> &all) {
    const std::size_t n = all.size();
    std::vector<double> factorial(n + 1, 1.0);
    for (std::size_t k = 1; k <= n; ++k) {
        factorial[k] = factorial[k - 1] * static_cast<double>(k);
    }
    auto v = [&](unsigned mask) { return mask == 0 ? 0.0 : t.value(members_of(all, mask)); };
    std::vector<double> phi(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
            if (mask & (1u << a)) {
                continue;
            }
            const auto s = static_cast<std::size_t>(std::popcount(mask));
            const double w = factorial[s] * factorial[n - s - 1] / factorial[n];
            phi[a] += w * (v(mask | (1u << a)) - v(mask));
        }
    }
    return phi;
}

std::vector<std::vector<OptimizerId>> all_permutations(std::vector<OptimizerId> p) {
    std::sort(p.begin(), p.end());
    std::vector<std::vector<OptimizerId>> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

}  // namespace

TEST_SUITE("portfolio") {
    TEST_CASE("complementarity examples") {
        const ComplementarityTarget crossed({OptimizerId::RandomSearch, OptimizerId::Pso}, {{1.0, 0.0}, {0.0, 1.0}});
        const std::vector<OptimizerId> both{OptimizerId::RandomSearch, OptimizerId::Pso};
        CHECK(crossed.vbs_mean(both) == 1.0);
        CHECK(crossed.sbs_mean(both) == 0.5);
        CHECK(crossed.value(both) == 0.5);
        const std::vector<OptimizerId> one{OptimizerId::Pso};
        CHECK(crossed.value(one) == 0.0);
        CHECK_THROWS_AS(crossed.value(std::span<const OptimizerId>{}), std::invalid_argument);

        const ComplementarityTarget same({OptimizerId::RandomSearch, OptimizerId::Pso}, {{0.3, 0.3}, {0.7, 0.7}});
        CHECK(same.value(both) == 0.0);
    }

    TEST_CASE("v is non-negative, zero on singletons, and VBS grows with the subset") {
        const auto t = random_target(6, 15, 3);
        const auto all = first_n(6);
        for (unsigned mask = 1; mask < (1u << 6); ++mask) {
            const auto s = members_of(all, mask);
            CHECK(t.value(s) >= 0.0);
            if (s.size() == 1) {
                CHECK(t.value(s) == 0.0);
            }
            for (unsigned sup = mask; sup < (1u << 6); sup = (sup + 1) | mask) {
                CHECK(t.vbs_mean(s) <= t.vbs_mean(members_of(all, sup)));
            }
        }
    }

    TEST_CASE("table-backed target uses mean-over-repetition performance") {
        const std::vector<OptimizerId> p{OptimizerId::RandomSearch, OptimizerId::Pso};
        perf::PerformanceTable table(suites::SuiteId::RogLite, 2, {1, 2}, p, 2, {20});
        table.set(0, 0, 0, 0, 0.9);
        table.set(0, 0, 1, 0, 0.7);
        table.set(0, 1, 0, 0, 0.1);
        table.set(0, 1, 1, 0, 0.3);
        table.set(1, 0, 0, 0, 0.0);
        table.set(1, 0, 1, 0, 0.2);
        table.set(1, 1, 0, 0, 1.0);
        table.set(1, 1, 1, 0, 0.8);
        const std::vector<std::size_t> rows{0, 1};
        const ComplementarityTarget t(table, rows, 20);
        CHECK(t.vbs_mean(p) == doctest::Approx(0.85));
        CHECK(t.sbs_mean(p) == doctest::Approx(0.55));
        CHECK(t.value(p) == doctest::Approx(0.3));
    }

    TEST_CASE("full enumeration of orderings equals the exact Shapley values") {
        const auto t = random_target(4, 12, 7);
        const auto all = first_n(4);
        const auto exact = brute_force_shapley(t, all);
        const auto perms = all_permutations(all);
        REQUIRE(perms.size() == 24);
        const auto est = shapley_from_permutations(t, all, perms);
        for (std::size_t a = 0; a < 4; ++a) {
            CHECK(est[a] == doctest::Approx(exact[a]).epsilon(1e-12));
        }
    }

    TEST_CASE("exact Shapley efficiency up to six algorithms") {
        for (std::size_t n = 2; n <= 6; ++n) {
            const auto t = random_target(n, 10, 100 + n);
            const auto all = first_n(n);
            const auto phi = brute_force_shapley(t, all);
            CHECK(std::accumulate(phi.begin(), phi.end(), 0.0) == doctest::Approx(t.value(all)).epsilon(1e-12));
            const auto est = shapley_estimate(t, all, 50, 1);
            CHECK(std::accumulate(est.begin(), est.end(), 0.0) == doctest::Approx(t.value(all)).epsilon(1e-12));
        }
    }

    TEST_CASE("identical algorithms receive equal estimates at 2000 permutations") {
        Rng rng(13);
        std::vector<std::vector<double>> perf(20, std::vector<double>(5));
        for (auto &row : perf) {
            for (auto &v : row) {
                v = rng.uniform();
            }
            row[3] = row[1];
        }
        const ComplementarityTarget t(first_n(5), perf);
        const auto all = first_n(5);
        const auto exact = brute_force_shapley(t, all);
        CHECK(exact[1] == doctest::Approx(exact[3]).epsilon(1e-12));
        const auto est = shapley_estimate(t, all, 2000, 21);
        // Shapley values here are O(0.05); 0.01 is well beyond the Monte-Carlo spread.
        CHECK(std::abs(est[1] - est[3]) < 0.01);
        for (std::size_t a = 0; a < 5; ++a) {
            CHECK(std::abs(est[a] - exact[a]) < 0.01);
        }
        CHECK(shapley_estimate(t, all, 100, 5) == shapley_estimate(t, all, 100, 5));
    }

    TEST_CASE("size equal to the portfolio returns the full portfolio") {
        const auto t = random_target(5, 8, 2);
        const auto all = first_n(5);
        const auto sel = select_portfolio(t, all, 5, 10, 3);
        CHECK(sel.members == all);
        CHECK(sel.complementarity == t.value(all));
        CHECK(sel.shapley_values.size() == 5);
        CHECK_THROWS_AS(select_portfolio(t, all, 6, 10, 3), std::invalid_argument);
    }

    TEST_CASE("subset search matches the exhaustive optimum over C(5,4)") {
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto t = random_target(5, 20, 200 + seed);
            const auto all = first_n(5);
            double best = -1.0;
            std::vector<OptimizerId> best_set;
            for (unsigned mask = 0; mask < 32; ++mask) {
                if (std::popcount(mask) != 4) {
                    continue;
                }
                const auto s = members_of(all, mask);
                const double v = t.value(s);
                if (v > best || (v == best && s < best_set)) {
                    best = v;
                    best_set = s;
                }
            }
            const auto sel = select_portfolio(t, all, 4, 500, seed);
            CHECK(sel.complementarity == best);
            CHECK(sel.members == best_set);
        }
    }

    TEST_CASE("search beats the greedy extension floor and is deterministic") {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const auto t = random_target(8, 25, 300 + seed);
            const auto all = first_n(8);
            // Greedy: best pair, then best single extensions.
            std::vector<OptimizerId> greedy;
            double best_pair = -1.0;
            for (std::size_t a = 0; a < 8; ++a) {
                for (std::size_t b = a + 1; b < 8; ++b) {
                    const std::vector<OptimizerId> s{all[a], all[b]};
                    if (t.value(s) > best_pair) {
                        best_pair = t.value(s);
                        greedy = s;
                    }
                }
            }
            while (greedy.size() < 4) {
                double best = -1.0;
                OptimizerId pick = all[0];
                for (const auto id : all) {
                    if (std::find(greedy.begin(), greedy.end(), id) != greedy.end()) {
                        continue;
                    }
                    auto s = greedy;
                    s.push_back(id);
                    std::sort(s.begin(), s.end());
                    if (t.value(s) > best) {
                        best = t.value(s);
                        pick = id;
                    }
                }
                greedy.push_back(pick);
                std::sort(greedy.begin(), greedy.end());
            }
            const auto sel = select_portfolio(t, all, 4, 500, seed);
            CHECK(sel.complementarity >= t.value(greedy));
            CHECK(std::is_sorted(sel.members.begin(), sel.members.end()));
            CHECK(sel.members.size() == 4);
            const auto again = select_portfolio(t, all, 4, 500, seed);
            CHECK(again.members == sel.members);
            CHECK(again.shapley_values == sel.shapley_values);
        }
    }

    TEST_CASE("all-zero Shapley values fall back to uniform draws") {
        std::vector<std::vector<double>> flat(6, std::vector<double>(6, 0.4));
        const ComplementarityTarget t(first_n(6), flat);
        const auto sel = select_portfolio(t, first_n(6), 3, 50, 1);
        CHECK(sel.complementarity == 0.0);
        // Every subset ties at zero, so the lexicographically smallest wins.
        CHECK(sel.members == first_n(3));
    }

    TEST_CASE("manifest carries the search description and named Shapley values") {
        const auto t = random_target(4, 10, 9);
        const auto all = first_n(4);
        const auto sel = select_portfolio(t, all, 2, 40, 2, 30);
        const auto m = manifest_json(sel, all, suites::SuiteId::BbobLite, 5, 100);
        CHECK(m["suite"] == "BBOB_LITE");
        CHECK(m["d"] == 5);
        CHECK(m["B_factor"] == 100);
        CHECK(m["members"].size() == 2);
        CHECK(m["shapley_values"].size() == 4);
        CHECK(m["shapley_values"].contains(std::string(optim::to_string(all[2]))));
        CHECK(m.contains("search"));
        CHECK(m["complementarity"].get<double>() == sel.complementarity);
    }
}
