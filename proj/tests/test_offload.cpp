#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oppnet/offload.hpp"

using namespace oppnet;
using doctest::Approx;

namespace {

PopularityModel two_class() { return PopularityModel::explicit_pmf({{1, 0.5}, {4, 0.5}}); }

// Theorem-1 delay of a deterministic table with mu = 1.
double table_delay(const PopularityModel& pop, const AllocationPolicy& p)
{
    return expected_delay_bound(pop, p.as_rule(), 1.0);
}

} // namespace

TEST_CASE("square-root allocation")
{
    auto p = sqrt_allocation(two_class(), 3.0);
    CHECK(p.table.at(1) == Approx(2.0));
    CHECK(p.table.at(4) == Approx(4.0));
    CHECK(p.mean_copies(two_class()) == Approx(3.0));

    auto d = sqrt_allocation(PopularityModel::degenerate(17), 2.5);
    CHECK(d.table.at(17) == Approx(2.5));

    auto z = PopularityModel::zipf(1, 1, 30);
    auto a = sqrt_allocation(z, 2.0), b = sqrt_allocation(z, 4.0);
    for (int n = 1; n <= 30; ++n)
        CHECK(b.table.at(n) == Approx(2.0 * a.table.at(n)));
    CHECK_THROWS(sqrt_allocation(z, 0.0));
}

TEST_CASE("qos allocation on the two-class instance")
{
    QosDiagnostics diag;
    auto p = qos_allocation(two_class(), 1.0, 1.0, 1.0, &diag);
    CHECK(diag.multiplier == Approx(2.0 / std::exp(1.0)).epsilon(1e-10));
    CHECK(p.table.at(1) == Approx(1.0 - std::log(2.0)).epsilon(1e-10));
    CHECK(p.table.at(4) == Approx(std::log(2.0 * std::exp(1.0))).epsilon(1e-10));
    CHECK(p.mean_copies(two_class()) == Approx(1.0).epsilon(1e-12));

    // grid search over the budget line 0.5 rho1 + 0.5 rho4 = 1, step 1e-3
    double best = 1e300;
    for (int i = 0; i <= 2000; ++i) {
        const double r1 = i * 1e-3;
        best = std::min(best, qos_objective(two_class(), {{1, r1}, {4, 2.0 - r1}}, 1.0, 1.0));
    }
    CHECK(std::abs(diag.objective - best) <= 1e-6);
    CHECK(diag.objective <= best + 1e-15);
}

TEST_CASE("qos allocation edge cases")
{
    for (double ttl : {0.01, 1.0, 30.0}) {
        auto p = qos_allocation(PopularityModel::degenerate(9), 2.0, ttl, 3.0);
        CHECK(p.table.at(9) == Approx(3.0).epsilon(1e-12));
    }
    QosDiagnostics diag;
    auto z = PopularityModel::zipf(1, 1, 30);
    auto p = qos_allocation(z, 1.0, 1.0, 0.3, &diag);
    CHECK(p.table.at(1) == 0.0);
    CHECK(p.table.at(30) > 0.0);
    CHECK(diag.active.size() < 30);
    CHECK(diag.active.back() == 30);
    CHECK(p.mean_copies(z) == Approx(0.3).epsilon(1e-9));
    CHECK_THROWS(qos_allocation(z, 1.0, 0.0, 1.0));
}

TEST_CASE("qos allocation satisfies KKT and beats every baseline")
{
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const int lo = 1 + static_cast<int>(10 * rng.uniform());
        auto pop = trial % 2 ? PopularityModel::zipf(0.2 + 2.8 * rng.uniform(), lo, lo + 5 + static_cast<int>(60 * rng.uniform()))
                             : PopularityModel::bounded_pareto(0.2 + 2.8 * rng.uniform(), lo, lo + 80);
        const double mu = 0.2 + 3 * rng.uniform(), ttl = 0.05 + 2 * rng.uniform(), c = 0.2 + 10 * rng.uniform();
        QosDiagnostics diag;
        auto q = qos_allocation(pop, mu, ttl, c, &diag);
        const double a = mu * ttl;
        CHECK(std::abs(q.mean_copies(pop) - c) <= 1e-8 * c);
        for (int n : pop.support()) {
            const double r = q.table.at(n);
            REQUIRE(r >= 0.0);
            const double grad = n * a * std::exp(-r * a);
            if (r > 0.0)
                CHECK(std::abs(grad - diag.multiplier) <= 1e-8 * diag.multiplier);
            else
                CHECK(grad <= diag.multiplier * (1 + 1e-8)); // slackness
        }
        std::vector<AllocationPolicy> others{baseline_allocation(PolicyKind::Uniform, pop, c),
                                            baseline_allocation(PolicyKind::SqrtOptimal, pop, c),
                                            baseline_allocation(PolicyKind::PowerLaw, pop, c, 1.0)};
        if (pop.n_max() > 1 && pop.expectation([](int n) { return std::log(double(n)); }) > 0)
            others.push_back(baseline_allocation(PolicyKind::Log, pop, c));
        for (const auto& b : others) {
            CHECK(std::abs(b.mean_copies(pop) - c) <= 1e-6);
            CHECK(diag.objective <= qos_objective(pop, b.table, mu, ttl) + 1e-12);
        }
    }
}

TEST_CASE("baseline allocations")
{
    auto z = PopularityModel::zipf(1, 1, 30);
    auto pw = baseline_allocation(PolicyKind::PowerLaw, z, 2.0, 0.5);
    auto sq = sqrt_allocation(z, 2.0);
    for (int n = 1; n <= 30; ++n)
        CHECK(pw.table.at(n) == Approx(sq.table.at(n)).epsilon(1e-14));
    auto u = baseline_allocation(PolicyKind::Uniform, z, 2.0);
    for (const auto& [n, r] : u.table)
        CHECK(r == Approx(2.0));
    auto k0 = baseline_allocation(PolicyKind::PowerLaw, z, 2.0, 0.0);
    CHECK(k0.table == u.table);
    auto lg = baseline_allocation(PolicyKind::Log, z, 2.0);
    CHECK(lg.table.at(1) == 0.0);
    CHECK(lg.mean_copies(z) == Approx(2.0));
    CHECK_THROWS(baseline_allocation(PolicyKind::Log, PopularityModel::degenerate(1), 2.0));

    auto r = baseline_allocation(PolicyKind::Random, z, 2.0, 0.0, 50, 8);
    CHECK(std::accumulate(r.counts.begin(), r.counts.end(), 0) == 100);
    CHECK(r.mean_copies(z) == Approx(2.0));
    auto rule = r.as_rule();
    CHECK(rule.mean(5) == Approx(2.0).epsilon(1e-9));
}

TEST_CASE("the square-root exponent minimizes the delay bound")
{
    std::vector<PopularityModel> pops{PopularityModel::zipf(1, 1, 30), PopularityModel::zipf(2, 1, 30),
                                      PopularityModel::zipf(3, 1, 30), PopularityModel::bounded_pareto(2, 50, 500),
                                      two_class()};
    for (const auto& pop : pops) {
        double best = 1e300, best_k = -1;
        for (double k : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double d = table_delay(pop, baseline_allocation(PolicyKind::PowerLaw, pop, 10.0, k));
            if (d < best) {
                best = d;
                best_k = k;
            }
        }
        CHECK(best_k == 0.5);
    }
}

TEST_CASE("systematic rounding")
{
    AllocationPolicy p = sqrt_allocation(PopularityModel::zipf(1, 1, 30), 3.0);
    std::vector<int> pops;
    for (int i = 0; i < 200; ++i)
        pops.push_back(1 + i % 30);
    std::vector<double> mean(pops.size(), 0.0);
    double target = 0.0;
    for (int n : pops)
        target += p.table.at(n);
    const int draws = 4000;
    for (int s = 0; s < draws; ++s) {
        auto c = realize_counts(p, pops, s);
        const int total = std::accumulate(c.begin(), c.end(), 0);
        CHECK(std::abs(total - target) < 1.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            CHECK(std::abs(c[i] - p.table.at(pops[i])) < 1.0);
            mean[i] += c[i];
        }
    }
    for (std::size_t i = 0; i < pops.size(); ++i)
        CHECK(std::abs(mean[i] / draws - p.table.at(pops[i])) <= 0.04);
}

TEST_CASE("integer targets")
{
    auto t = integer_targets({1, 1, 1}, 10);
    CHECK(std::accumulate(t.begin(), t.end(), 0) == 10);
    CHECK(t == std::vector<int>{4, 3, 3});
    auto u = integer_targets({1, 4, 9}, 14);
    CHECK(u == std::vector<int>{1, 4, 9});
    CHECK(integer_targets({0.5, 0.0}, 3) == std::vector<int>{3, 0});
}

TEST_CASE("evaluate offloading")
{
    OffloadInputs in;
    in.rates = RateModel::constant(0.8);
    in.popularity = PopularityModel::degenerate(5);
    in.nodes = 60;
    in.contents = 20;
    in.replications = 400;
    auto u = baseline_allocation(PolicyKind::Uniform, in.popularity, 3.0);
    CHECK(evaluate_offloading(u, in, 0.0, Via::Analytic).value == 0.0);
    CHECK(evaluate_offloading(u, in, 0.0, Via::Simulation).value == 0.0);
    const double expect = 1.0 - std::exp(-3.0 * 0.8 * 0.4);
    CHECK(evaluate_offloading(u, in, 0.4, Via::Analytic).value == Approx(expect).epsilon(1e-12));
    auto sim = evaluate_offloading(u, in, 0.4, Via::Simulation);
    CHECK(std::abs(sim.value - expect) <= 3 * sim.std_error);
}

TEST_CASE("offloading ratio is monotone in ttl and budget")
{
    OffloadInputs in;
    in.rates = RateModel::gamma(1, 1);
    in.popularity = PopularityModel::zipf(1, 1, 30);
    for (auto kind : {PolicyKind::Uniform, PolicyKind::SqrtOptimal, PolicyKind::Log}) {
        double prev = 0.0;
        for (double ttl : {0.05, 0.1, 0.2, 0.5, 1.0}) {
            const double r = evaluate_offloading(baseline_allocation(kind, in.popularity, 2.0), in, ttl, Via::Analytic).value;
            CHECK(r >= prev);
            prev = r;
        }
        prev = 0.0;
        for (double c : {0.5, 1.0, 2.0, 4.0}) {
            const double r = evaluate_offloading(baseline_allocation(kind, in.popularity, c), in, 0.2, Via::Analytic).value;
            CHECK(r >= prev);
            prev = r;
        }
    }
    double prev = 0.0;
    for (double c : {0.5, 1.0, 2.0, 4.0}) {
        const double r = evaluate_offloading(qos_allocation(in.popularity, 1.0, 0.2, c), in, 0.2, Via::Analytic).value;
        CHECK(r >= prev);
        prev = r;
    }
}

TEST_CASE("popularity-blind allocation")
{
    OffloadInputs in;
    in.rates = RateModel::gamma(1, 1);
    in.nodes = 120;
    in.contents = 30;
    BlindOptions o;
    o.budget = 3.0;
    o.replications = 60;

    SUBCASE("no reallocation is exactly the uniform policy")
    {
        in.popularity = PopularityModel::zipf(1, 1, 20);
        o.update_every = 0;
        auto r = run_popularity_blind(in, o);
        CHECK(r.blind.value == r.uniform.value);
        CHECK(r.reallocations == 0);
        for (int e : r.final_estimates)
            CHECK(e >= 1);
    }
    SUBCASE("equal popularities stay statistically uniform")
    {
        in.popularity = PopularityModel::degenerate(20);
        o.update_every = 10;
        auto r = run_popularity_blind(in, o);
        CHECK(r.reallocations > 0);
        CHECK(std::abs(r.blind.value - r.uniform.value) <= 1.96 * std::hypot(r.blind.std_error, r.uniform.std_error));
        CHECK(r.sqrt_optimal.value == r.uniform.value);
    }
    SUBCASE("estimates count deliveries")
    {
        in.popularity = PopularityModel::zipf(1, 1, 20);
        o.update_every = 5;
        auto r = run_popularity_blind(in, o);
        auto scn = offload_scenario(in);
        for (std::size_t c = 0; c < scn.contents.size(); ++c)
            CHECK(r.final_estimates[c] == scn.contents[c].popularity() + 1);
        REQUIRE(!r.trajectory.empty());
        CHECK(r.trajectory.front().deliveries == 5);
    }
}

TEST_CASE("temporal experiment with identical windows")
{
    TemporalInputs t;
    t.base.rates = RateModel::gamma(2, 1);
    t.base.popularity = PopularityModel::zipf(2, 1, 30);
    t.base.nodes = 80;
    t.base.contents = 30;
    t.base.replications = 20;
    t.second_rates = RateModel::gamma(2, 1);
    t.windows = {0.1, 1.0};
    t.ttl = 0.3;
    t.budget = 2.0;
    auto rows = temporal_offload_experiment(t);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows)
        CHECK(r.optimal_average.value == r.optimal_window_based.value);
}
