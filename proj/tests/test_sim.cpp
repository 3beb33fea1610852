#include <doctest.h>

#include <cmath>
#include <set>

#include "ks.hpp"
#include "oppnet/analytic.hpp"
#include "oppnet/sim.hpp"

using namespace oppnet;
using doctest::Approx;

namespace {

// A hand-built scenario over a dense rate matrix.
Scenario manual(Eigen::MatrixXd rates, std::vector<ContentSpec> contents, Protocol protocol = {})
{
    Scenario s;
    s.nodes = static_cast<int>(rates.rows());
    s.rates = RateMatrix::dense(std::move(rates));
    s.contents = std::move(contents);
    s.protocol = protocol;
    return s;
}

Eigen::MatrixXd homogeneous(int n, double rate)
{
    Eigen::MatrixXd m = Eigen::MatrixXd::Constant(n, n, rate);
    m.diagonal().setZero();
    return m;
}

ContentSpec content(int id, std::vector<int> req, std::vector<int> hold)
{
    ContentSpec c;
    c.id = id;
    c.requesters = std::move(req);
    c.holders = hold;
    c.holder_ranking = std::move(hold);
    return c;
}

std::vector<double> delays(const std::vector<DeliveryRecord>& rs)
{
    std::vector<double> d;
    for (const auto& r : rs)
        d.push_back(r.delay);
    return d;
}

} // namespace

TEST_CASE("rate matrix")
{
    auto p = RateMatrix::procedural(RateModel::gamma(1, 1), 50, 4);
    CHECK(p(3, 7) == p(7, 3));
    CHECK(p(3, 7) > 0.0);
    CHECK(p(3, 3) == 0.0);
    auto d = p.to_dense();
    CHECK(d(10, 20) == p(10, 20));
    CHECK_THROWS(RateMatrix::dense(Eigen::MatrixXd::Ones(3, 2)));
    Eigen::MatrixXd asym = homogeneous(3, 1.0);
    asym(0, 1) = 2.0;
    CHECK_THROWS(RateMatrix::dense(asym));
    CHECK_THROWS(RateMatrix::dense(homogeneous(3, 0.0)));
}

TEST_CASE("build_scenario with deterministic counts")
{
    auto scn = build_scenario(RateModel::constant(1), PopularityModel::degenerate(5),
                              AvailabilityRule::deterministic(AvailabilityFunction::linear(2)), 100, 3, 42);
    REQUIRE(scn.contents.size() == 3);
    for (const auto& c : scn.contents) {
        CHECK(c.popularity() == 5);
        CHECK(c.availability() == 10);
        std::set<int> all(c.requesters.begin(), c.requesters.end());
        all.insert(c.holders.begin(), c.holders.end());
        CHECK(all.size() == 15);
    }
}

TEST_CASE("build_scenario is deterministic")
{
    auto make = [] {
        BuildOptions o;
        o.selection = HolderSelection::WeightedByProductOfRatesToRequesters;
        return build_scenario(RateModel::gamma(1, 1), PopularityModel::zipf(1, 1, 30),
                              AvailabilityRule::binomial(AvailabilityFunction::linear(0.3)), 200, 40, 7, o);
    };
    auto a = make(), b = make();
    for (std::size_t c = 0; c < a.contents.size(); ++c) {
        CHECK(a.contents[c].requesters == b.contents[c].requesters);
        CHECK(a.contents[c].holders == b.contents[c].holders);
    }
    CHECK(a.rates(3, 9) == b.rates(3, 9));
}

TEST_CASE("build_scenario rejects impossible sizes")
{
    CHECK_THROWS(build_scenario(RateModel::constant(1), PopularityModel::degenerate(5),
                                AvailabilityRule::deterministic(AvailabilityFunction::linear(2)), 12, 1, 1));
    CHECK_THROWS(build_scenario(RateModel::constant(1), PopularityModel::degenerate(50),
                                AvailabilityRule::deterministic(AvailabilityFunction::linear(1)), 20, 1, 1));
}

TEST_CASE("stratified popularity keeps the marginal and tracks the pmf")
{
    auto pop = PopularityModel::zipf(1.0, 1, 10);
    auto rule = AvailabilityRule::uncorrelated({{1, 1.0}});
    auto scn = build_scenario(RateModel::constant(1), pop, rule, 50, 1000, 3);
    std::vector<int> counts(11, 0);
    for (const auto& c : scn.contents)
        counts[c.popularity()]++;
    for (int n = 1; n <= 10; ++n)
        CHECK(std::abs(counts[n] - 1000 * pop.pmf(n)) <= 1.0 + 1e-9);
}

TEST_CASE("weighted holder selection is uniform under constant rates")
{
    BuildOptions o;
    o.selection = HolderSelection::WeightedByProductOfRatesToRequesters;
    const int nodes = 20, contents = 20000;
    auto scn = build_scenario(RateModel::constant(2), PopularityModel::degenerate(1),
                              AvailabilityRule::uncorrelated({{1, 1.0}}), nodes, contents, 5, o);
    // holder identity relative to the requester is uniform over the 19 others
    std::vector<int> counts(nodes, 0);
    for (const auto& c : scn.contents)
        counts[(c.holders[0] - c.requesters[0] + nodes) % nodes]++;
    double chi2 = 0.0;
    const double expect = double(contents) / (nodes - 1);
    for (int d = 1; d < nodes; ++d)
        chi2 += (counts[d] - expect) * (counts[d] - expect) / expect;
    CHECK(counts[0] == 0);
    CHECK(chi2 < 43.8); // 99.9% quantile, 18 dof
}

TEST_CASE("weighted selection favours strong links")
{
    Eigen::MatrixXd r = homogeneous(4, 1.0);
    r(0, 1) = r(1, 0) = 3.0;
    auto rates = RateMatrix::dense(r);
    Rng rng(1);
    int hits = 0;
    const int draws = 60000;
    for (int i = 0; i < draws; ++i)
        hits += rank_holders(rates, {0}, HolderSelection::WeightedByProductOfRatesToRequesters, 1, rng)[0] == 1;
    // weights 3:1:1
    CHECK(std::abs(hits / double(draws) - 0.6) <= 4 * std::sqrt(0.24 / draws));
}

TEST_CASE("static: single exponential holder")
{
    auto scn = manual(homogeneous(2, 2.0), {content(0, {0}, {1})});
    auto rec = simulate_static(scn, {100000, 1e9, 11, 0});
    auto m = estimate_metrics(rec, {});
    CHECK(std::abs(m.mean_delay.value - 0.5) <= 3 * m.mean_delay.std_error);
}

TEST_CASE("static: minimum of two exponentials")
{
    Eigen::MatrixXd r = homogeneous(3, 1.0);
    r(0, 2) = r(2, 0) = 3.0;
    auto scn = manual(r, {content(0, {0}, {1, 2})});
    auto rec = simulate_static(scn, {100000, 1e9, 12, 0});
    double tail = 0;
    for (const auto& x : rec)
        tail += x.delay > 0.25;
    const double p = std::exp(-1.0);
    CHECK(std::abs(tail / rec.size() - p) <= 3 * std::sqrt(p * (1 - p) / rec.size()));
}

TEST_CASE("static: pareto residual CCDF")
{
    auto scn = manual(homogeneous(2, 3.0), {content(0, {0}, {1})});
    scn.contact_law = ContactLaw::ParetoRenewal;
    scn.t0 = 1.0;
    auto rec = simulate_static(scn, {100000, 1e9, 13, 0});
    double tail = 0;
    for (const auto& x : rec)
        tail += x.delay > 1.0;
    CHECK(std::abs(tail / rec.size() - 0.125) <= 3 * std::sqrt(0.125 * 0.875 / rec.size()));
}

TEST_CASE("static: empty holder sets are censored and flagged")
{
    auto scn = manual(homogeneous(3, 1.0), {content(0, {0}, {}), content(1, {1}, {2})});
    auto rec = simulate_static(scn, {10, 5.0, 1, 0});
    for (const auto& r : rec) {
        if (r.content == 0) {
            CHECK(r.censored);
            CHECK(r.no_holders);
            CHECK(r.delay == 5.0);
        } else {
            CHECK_FALSE(r.no_holders);
        }
    }
}

TEST_CASE("static matches 1/(m lambda) per content on a homogeneous network")
{
    auto scn = build_scenario(RateModel::constant(0.7), PopularityModel::zipf(1, 2, 20),
                              AvailabilityRule::deterministic(AvailabilityFunction::sqrt(2)), 200, 30, 8);
    auto rec = simulate_static(scn, {400, 1e9, 3, 0});
    for (const auto& c : scn.contents) {
        std::vector<DeliveryRecord> mine;
        for (const auto& r : rec)
            if (r.content == c.id)
                mine.push_back(r);
        auto m = estimate_metrics(mine, {});
        const double expect = 1.0 / (c.availability() * 0.7);
        CHECK(std::abs(m.mean_delay.value - expect) <= 3.5 * m.mean_delay.std_error);
    }
}

TEST_CASE("simulation is deterministic regardless of worker count")
{
    BuildOptions o;
    o.protocol = Protocol::multihop(0.6);
    auto scn = build_scenario(RateModel::gamma(1, 1), PopularityModel::zipf(1, 1, 20),
                              AvailabilityRule::deterministic(AvailabilityFunction::linear(0.5)), 100, 15, 9, o);
    auto a = simulate_multihop(scn, {4, 1e9, 77, 1});
    auto b = simulate_multihop(scn, {4, 1e9, 77, 4});
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        CHECK(a[i].delay == b[i].delay);

    scn.protocol = Protocol::fixed();
    auto c = simulate_static(scn, {4, 1e9, 77, 1});
    auto d = simulate_static(scn, {4, 1e9, 77, 3});
    for (std::size_t i = 0; i < c.size(); ++i)
        CHECK(c[i].delay == d[i].delay);
}

TEST_CASE("multihop without cooperation equals static")
{
    std::vector<int> req{0, 1, 2, 3, 4, 5};
    auto stat = manual(homogeneous(10, 1.5), {content(0, req, {8, 9})});
    auto hop = manual(homogeneous(10, 1.5), {content(0, req, {8, 9})}, Protocol::multihop(0.0));
    auto a = simulate_static(stat, {3000, 1e9, 1, 0});
    auto b = simulate_multihop(hop, {3000, 1e9, 2, 0});
    CHECK(ks_pvalue(delays(a), delays(b)) > 0.01);
}

TEST_CASE("multihop harmonic oracle on a homogeneous network")
{
    const double lambda = 2.0;
    std::vector<int> req;
    for (int k = 0; k < 10; ++k)
        req.push_back(k);
    auto scn = manual(homogeneous(12, lambda), {content(0, req, {10, 11})}, Protocol::multihop());
    auto rec = simulate_multihop(scn, {20000, 1e9, 5, 0});
    auto m = estimate_metrics(rec, {});
    double h = 0;
    for (int k = 2; k <= 11; ++k)
        h += 1.0 / k;
    const double expect = h / (lambda * 10.0);
    // requesters of one run share a history, so use per-run means
    std::vector<double> per_run(20000, 0.0);
    for (const auto& r : rec)
        per_run[r.replication] += r.delay / 10.0;
    double s = 0, s2 = 0;
    for (double x : per_run) {
        s += x;
        s2 += x * x;
    }
    const double mean = s / per_run.size();
    const double se = std::sqrt((s2 / per_run.size() - mean * mean) / per_run.size());
    CHECK(mean == Approx(m.mean_delay.value));
    CHECK(std::abs(mean - expect) <= 3 * se);
}

TEST_CASE("multihop holder logs")
{
    BuildOptions o;
    o.protocol = Protocol::multihop(0.7, 1);
    auto scn = build_scenario(RateModel::gamma(1, 1), PopularityModel::zipf(0.5, 2, 30),
                              AvailabilityRule::binomial(AvailabilityFunction::linear(0.3)), 150, 25, 10, o);
    std::vector<HolderLog> logs;
    (void)simulate_multihop(scn, {5, 1e9, 6, 0}, &logs);
    REQUIRE(logs.size() == 125);
    for (const auto& log : logs) {
        int prev = log.initial, accepted = 0;
        for (std::size_t e = 0; e < log.holders.size(); ++e) {
            accepted += log.accepted[e];
            CHECK(log.holders[e] >= prev);
            CHECK(log.holders[e] == log.initial + accepted);
            CHECK(log.holders[e] <= log.initial + 1);
            prev = log.holders[e];
        }
    }

    scn.protocol = Protocol::multihop(1.0);
    (void)simulate_multihop(scn, {3, 1e9, 6, 0}, &logs);
    for (const auto& log : logs) {
        for (std::size_t e = 0; e < log.holders.size(); ++e)
            CHECK(log.holders[e] == log.initial + static_cast<int>(e) + 1);
        for (std::size_t e = 1; e < log.times.size(); ++e)
            CHECK(log.times[e] >= log.times[e - 1]);
    }
}

TEST_CASE("multihop rejects Pareto contacts and the static protocol")
{
    auto scn = manual(homogeneous(3, 1.0), {content(0, {0}, {1})}, Protocol::multihop());
    scn.contact_law = ContactLaw::ParetoRenewal;
    CHECK_THROWS(simulate_multihop(scn, {1, 1e9, 1, 0}));
    auto st = manual(homogeneous(3, 1.0), {content(0, {0}, {1})});
    CHECK_THROWS(simulate_multihop(st, {1, 1e9, 1, 0}));
    CHECK_THROWS(simulate_static(manual(homogeneous(3, 1.0), {content(0, {0}, {1})}, Protocol::multihop()), {1, 1e9, 1, 0}));
}

TEST_CASE("alternating hazard inversion")
{
    CHECK(alternating_hazard_inverse(1.0, 2.0, 2.0, 0.1, 0) == Approx(0.5));
    CHECK(alternating_hazard_inverse(0.5, 1.0, 5.0, 1.0, 0) == Approx(0.5));
    CHECK(alternating_hazard_inverse(0.5, 1.0, 5.0, 1.0, 1) == Approx(0.1));
    // one full window at rate 1 (hazard 1) then rate 5
    CHECK(alternating_hazard_inverse(2.0, 1.0, 5.0, 1.0, 0) == Approx(1.2));
    CHECK(alternating_hazard_inverse(7.0, 1.0, 5.0, 1.0, 0) == Approx(3.0));
    CHECK(alternating_hazard_inverse(3.0, 1.0, 5.0, std::numeric_limits<double>::infinity(), 0) == Approx(3.0));
    CHECK(std::isinf(alternating_hazard_inverse(3.0, 0.0, 0.0, 1.0, 0)));
}

TEST_CASE("temporal windows")
{
    auto pop = PopularityModel::zipf(1.0, 1, 10);
    auto rule = AvailabilityRule::deterministic(AvailabilityFunction::sqrt(2));
    auto scn = build_scenario(RateModel::gamma(1, 1), pop, rule, 80, 40, 4);

    SUBCASE("identical windows reduce to the static simulation")
    {
        auto tmp = scn;
        tmp.second_window = tmp.rates;
        auto a = simulate_temporal(tmp, 0.05, 0, {80, 1e9, 1, 0});
        auto b = simulate_static(scn, {80, 1e9, 2, 0});
        REQUIRE(a.size() >= 10000);
        CHECK(ks_pvalue(delays(a), delays(b)) > 0.01);
    }
    SUBCASE("very long first window reduces to the first-window rates")
    {
        auto tmp = scn;
        tmp.second_window = RateMatrix::procedural(RateModel::gamma(5, 1), 80, 99);
        auto a = simulate_temporal(tmp, 1e12, 0, {40, 1e9, 1, 0});
        auto b = simulate_static(scn, {40, 1e9, 2, 0});
        CHECK(ks_pvalue(delays(a), delays(b)) > 0.01);
    }
    SUBCASE("fast alternation behaves like the averaged rate")
    {
        auto one = manual(homogeneous(6, 1.0), {content(0, {0, 1, 2}, {3, 4, 5})});
        one.second_window = RateMatrix::dense(homogeneous(6, 5.0));
        auto rec = simulate_temporal(one, 1e-3, 0, {30000, 1e9, 3, 0});
        auto m = estimate_metrics(rec, {});
        CHECK(std::abs(m.mean_delay.value - 1.0 / 9.0) <= 3 * m.mean_delay.std_error + 1e-3);
    }
}

TEST_CASE("trace replay")
{
    ContactTrace tr;
    tr.nodes = 4;
    tr.start = 10.0;
    tr.duration = 10.0;
    tr.events = {{11.0, 0, 1}, {12.0, 1, 2}, {13.0, 2, 3}, {15.0, 0, 3}};
    auto c = content(0, {1, 2, 3}, {0});
    auto stat = replay_trace(tr, {c}, Protocol::fixed(), 1);
    REQUIRE(stat.size() == 3);
    CHECK(stat[0].delay == 1.0);
    CHECK(stat[1].censored);
    CHECK(stat[2].delay == 5.0);
    auto hop = replay_trace(tr, {c}, Protocol::multihop(), 1);
    CHECK(hop[0].delay == 1.0);
    CHECK(hop[1].delay == 2.0);
    CHECK(hop[2].delay == 3.0);
    auto capped = replay_trace(tr, {c}, Protocol::multihop(1.0, 1), 1);
    CHECK(capped[1].delay == 2.0);
    CHECK(capped[2].delay == 5.0);
}

TEST_CASE("estimate_metrics")
{
    std::vector<DeliveryRecord> three(3);
    for (int i = 0; i < 3; ++i) {
        three[i].requester = i;
        three[i].delay = i + 1.0;
    }
    auto m = estimate_metrics(three, {2.0});
    CHECK(m.mean_delay.value == Approx(2.0));
    CHECK(m.access_probability[0].value == Approx(2.0 / 3.0));

    std::vector<DeliveryRecord> censored(4);
    for (int i = 0; i < 4; ++i) {
        censored[i].requester = i;
        censored[i].delay = 10.0;
        censored[i].censored = true;
    }
    auto c = estimate_metrics(censored, {5.0});
    CHECK(c.mean_is_lower_bound);
    CHECK(c.mean_delay_text() == "≥10");
    CHECK(c.access_probability[0].value == 0.0);
    CHECK(c.censored_fraction == 1.0);

    Rng rng(21);
    std::vector<DeliveryRecord> ex(10000);
    for (int i = 0; i < 10000; ++i) {
        ex[i].requester = i;
        ex[i].delay = -std::log(rng.uniform());
    }
    auto e = estimate_metrics(ex, {});
    CHECK(e.mean_delay.value >= 0.97);
    CHECK(e.mean_delay.value <= 1.03);
    CHECK(e.mean_delay.ci_low <= 1.0);
    CHECK(e.mean_delay.ci_high >= 1.0);
    CHECK_THROWS(estimate_metrics({}, {}));
}

TEST_CASE("access probability interval at the boundary")
{
    std::vector<DeliveryRecord> all(100);
    for (int i = 0; i < 100; ++i) {
        all[i].requester = i;
        all[i].delay = 0.5;
    }
    auto m = estimate_metrics(all, {1.0, 0.1});
    CHECK(m.access_probability[0].value == 1.0);
    CHECK(m.access_probability[0].ci_high == 1.0);
    CHECK(m.access_probability[0].ci_low == Approx(0.9630065017930143).epsilon(1e-12));
    CHECK(m.access_probability[1].value == 0.0);
    CHECK(m.access_probability[1].ci_low == 0.0);
    CHECK(m.access_probability[1].ci_high == Approx(1 - 0.9630065017930143).epsilon(1e-10));

    // away from the boundary the interval is close to the normal one
    Rng rng(5);
    std::vector<DeliveryRecord> half(20000);
    for (int i = 0; i < 20000; ++i) {
        half[i].requester = i;
        half[i].delay = rng.uniform();
    }
    auto h = estimate_metrics(half, {0.5}).access_probability[0];
    CHECK(h.ci_high - h.ci_low == Approx(2 * 1.959963984540054 * h.std_error).epsilon(1e-3));
    CHECK(h.ci_low <= 0.5);
    CHECK(h.ci_high >= 0.5);
}
