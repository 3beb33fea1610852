// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failures. `acceptance 4 7` runs only criteria 4 and 7.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "oppnet/analytic.hpp"
#include "oppnet/offload.hpp"
#include "oppnet/sim.hpp"

using namespace oppnet;

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

struct Outcome {
    bool pass = true;
    std::string detail;
};

std::string fmt(const char* f, auto... args)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

bool separated_above(const Interval& hi, const Interval& lo) { return hi.ci_low > lo.ci_high; }

AvailabilityRule det(AvailabilityFunction f) { return AvailabilityRule::deterministic(std::move(f)); }

// ---------------------------------------------------------------------------

Outcome ac1()
{
    const auto rates = RateModel::gamma(1.0, 1.0);
    const auto pop = PopularityModel::bounded_pareto(2.0, 50, 500);
    const auto rule = det(AvailabilityFunction::linear(0.2));
    const auto agg = AggregateRateLaw::for_model(rates);
    const int sizes[] = {500, 1000, 2000};
    const double max_delay[] = {0.06, 0.025, 0.016}, max_prob[] = {0.065, 0.018, 0.012};

    Outcome out;
    for (int i = 0; i < 3; ++i) {
        const auto scn = build_scenario(rates, pop, rule, sizes[i], 200, derive_seed(101, {std::uint64_t(i)}));
        const auto rec = simulate_static(scn, {20, inf, derive_seed(102, {std::uint64_t(i)}), 0});
        const double ttl = delay_quantile(rec, 0.5);
        const auto m = estimate_metrics(rec, {ttl}, ClusterBy::Request);
        const double d = expected_delay_exact(pop, rule, agg, HolderView::Realized).value;
        const double p = access_probability_exact(pop, rule, agg, ttl, HolderView::Realized).value;
        const double ed = rel(m.mean_delay.value, d), ep = rel(m.access_probability[0].value, p);
        out.pass = out.pass && ed <= max_delay[i] && ep <= max_prob[i];
        out.detail += fmt("N=%d delay %.2f%% (<=%.1f) P %.2f%% (<=%.1f); ", sizes[i], 100 * ed, 100 * max_delay[i],
                          100 * ep, 100 * max_prob[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------

struct Triple {
    RateModel rates;
    PopularityModel pop;
    AvailabilityRule rule;
    double ttl;
};

Triple random_triple(int trial, Rng& rng)
{
    const int pick = trial % 5;
    RateModel rates = pick == 0   ? RateModel::gamma(0.2 + 2 * rng.uniform(), 0.1 + 2.0 * rng.uniform())
                      : pick == 1 ? RateModel::uniform(0.05 + 0.2 * rng.uniform(), 0.5 + 2 * rng.uniform())
                      : pick == 2 ? RateModel::pareto_mean_cv(0.5 + rng.uniform(), 0.2 + 1.5 * rng.uniform())
                      : pick == 3 ? RateModel::empirical({0.1 + rng.uniform(), 0.5 + rng.uniform(), 0.05 + 2 * rng.uniform()})
                                  : RateModel::gamma(0.5 + rng.uniform(), 0.3 * rng.uniform());
    const int lo = 1 + static_cast<int>(20 * rng.uniform());
    const int hi = lo + 5 + static_cast<int>(55 * rng.uniform());
    PopularityModel pop = trial % 2 ? PopularityModel::zipf(0.3 + 2.5 * rng.uniform(), lo, hi)
                                    : PopularityModel::bounded_pareto(0.3 + 2.5 * rng.uniform(), lo, hi);
    const int form = trial % 4;
    AvailabilityRule rule = form == 0   ? det(AvailabilityFunction::linear(0.2 + rng.uniform()))
                            : form == 1 ? det(AvailabilityFunction::sqrt(1 + 3 * rng.uniform()))
                            : form == 2 ? det(AvailabilityFunction::power(1 + 2 * rng.uniform(), 0.3 + 0.5 * rng.uniform()))
                                        : AvailabilityRule::binomial(AvailabilityFunction::linear(0.2 + 0.7 * rng.uniform()));
    return {rates, pop, rule, 0.05 + rng.uniform()};
}

Outcome ac2()
{
    Rng rng(2002);
    int triples = 0, analytic_violations = 0, sims = 0, sim_checks = 0, sim_violations = 0, equal_checked = 0;
    double worst_equal = 0.0;
    for (int trial = 0; trial < 240; ++trial) {
        const auto t = random_triple(trial, rng);
        const auto agg = AggregateRateLaw::for_model(t.rates, 20000, derive_seed(2003, {std::uint64_t(trial)}));
        const double mu = t.rates.mean();
        const double pb = access_probability_bound(t.pop, t.rule, mu, t.ttl);
        const auto pe = access_probability_exact(t.pop, t.rule, agg, t.ttl);
        bool ok = pb >= pe.value - 3 * pe.std_error - 1e-12;
        double db = expected_delay_bound(t.pop, t.rule, mu), de = inf;
        try {
            const auto d = expected_delay_exact(t.pop, t.rule, agg);
            de = d.value;
            ok = ok && db <= d.value + 3 * d.std_error + 1e-12;
        } catch (const InfiniteMoment&) {
            // infinite exact delay satisfies the bound
        }
        analytic_violations += !ok;
        ++triples;

        if (trial % 6 == 0) {
            const int nodes = 400;
            const auto scn = build_scenario(t.rates, t.pop, t.rule, nodes, 60, derive_seed(2004, {std::uint64_t(trial)}));
            const auto rec = simulate_static(scn, {4, inf, derive_seed(2005, {std::uint64_t(trial)}), 0});
            const auto m = estimate_metrics(rec, {t.ttl}, ClusterBy::Request);
            ++sims;
            ++sim_checks;
            // the simulator realizes integer holder counts
            const double pr = access_probability_bound(t.pop, t.rule, mu, t.ttl, HolderView::Realized);
            double dr = inf; // a class rounded to zero holders has no finite bound
            try {
                dr = expected_delay_bound(t.pop, t.rule, mu, HolderView::Realized);
            } catch (const std::domain_error&) {
            }
            sim_violations += m.access_probability[0].ci_low > pr;
            if (m.censored_fraction == 0.0 && std::isfinite(de) && std::isfinite(dr)) {
                ++sim_checks;
                sim_violations += m.mean_delay.ci_high < dr;
            }
        }
    }
    // constant rates with deterministic rules: bound and exact coincide
    for (int k = 0; k < 40; ++k) {
        const double lambda = 0.2 + 3 * rng.uniform();
        const auto pop = PopularityModel::zipf(0.3 + 2 * rng.uniform(), 1 + k % 7, 30 + k);
        const auto rule = det(k % 2 ? AvailabilityFunction::linear(0.3 + rng.uniform())
                                    : AvailabilityFunction::sqrt(1 + rng.uniform()));
        const auto agg = AggregateRateLaw::for_model(RateModel::constant(lambda));
        const double ttl = 0.05 + rng.uniform();
        worst_equal = std::max({worst_equal,
                                std::abs(expected_delay_exact(pop, rule, agg).value - expected_delay_bound(pop, rule, lambda)),
                                std::abs(access_probability_exact(pop, rule, agg, ttl).value
                                         - access_probability_bound(pop, rule, lambda, ttl))});
        ++equal_checked;
    }
    const double rate = static_cast<double>(sim_violations) / sim_checks;
    Outcome out;
    out.pass = triples >= 200 && analytic_violations == 0 && worst_equal <= 1e-9 && rate <= 0.05;
    out.detail = fmt("%d triples, %d analytic violations; equality subfamily %d cases, max gap %.1e; "
                     "%d simulated, %d/%d checks on the wrong side (%.1f%%, <=5%%)",
                     triples, analytic_violations, equal_checked, worst_equal, sims, sim_violations, sim_checks,
                     100 * rate);
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac3()
{
    Outcome out;
    double worst = 0.0;
    struct Case {
        double c, n0, mu, cv, ttl;
    };
    const Case closed[] = {{0.2, 50, 1, 1, 0.05}, {0.5, 20, 2, 0.5, 0.02}, {0.1, 100, 1, 2, 0.1}, {1.0, 10, 0.5, 0.8, 0.3}};
    for (const auto& k : closed) {
        const auto v = bp2_closed_forms(k.c, k.n0, k.mu, k.cv, k.ttl);
        worst = std::max({worst, rel(bp2_delay_numeric(k.c, k.n0, k.mu, k.cv), v.delay),
                          rel(bp2_probability_numeric(k.c, k.n0, k.mu, k.cv, k.ttl), v.probability)});
    }
    out.pass = worst <= 1e-3;
    out.detail = fmt("closed vs quadrature max rel %.1e (<=1e-3); discrete generic gap:", worst);

    // discrete bounded popularity on [n0, n_max] against the continuous closed forms
    const double n0 = 50, mu = 1, cv = 1, c_delay = 0.2, c_prob = 2.0, ttl = 0.1;
    const auto agg = AggregateRateLaw::for_model(RateModel::gamma(mu, cv));
    const auto v = bp2_closed_forms(c_delay, n0, mu, cv, ttl);
    const auto pv = bp2_closed_forms(c_prob, n0, mu, cv, ttl);
    for (int factor : {20, 40, 100}) {
        const auto pop = PopularityModel::bounded_pareto(2.0, static_cast<int>(n0), static_cast<int>(factor * n0));
        const double gd = rel(expected_delay_exact(pop, det(AvailabilityFunction::linear(c_delay)), agg).value, v.delay);
        const double gp = rel(access_probability_exact(pop, det(AvailabilityFunction::log(c_prob)), agg, ttl).value,
                              pv.probability);
        out.pass = out.pass && gd <= 0.03 && gp <= 0.03;
        out.detail += fmt(" n_max=%d*n0 delay %.2f%% P %.2f%%;", factor, 100 * gd, 100 * gp);
    }
    out.detail += " (<=3%)";
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac4()
{
    Outcome out;
    const auto pop = PopularityModel::bounded_pareto(2.0, 50, 1000);
    const auto rule = det(AvailabilityFunction::linear(0.2));
    const BuildOptions opts{.protocol = Protocol::multihop()};
    for (double cv : {0.5, 1.0}) {
        const auto rates = RateModel::pareto_mean_cv(1.0, cv);
        const auto scn = build_scenario(rates, pop, rule, 2000, 100, derive_seed(401, {std::uint64_t(cv * 10)}), opts);
        const auto rec = simulate_multihop(scn, {4, inf, derive_seed(402, {std::uint64_t(cv * 10)}), 0});
        const auto m = estimate_metrics(rec, {}, ClusterBy::Run);
        const double r3 = multihop_delay(pop, rule, 1.0).value;
        const double h = multihop_delay_harmonic(pop, rule, 1.0, HolderView::Realized);
        const double e3 = rel(r3, m.mean_delay.value), eh = rel(h, m.mean_delay.value);
        out.pass = out.pass && e3 <= 0.10 && eh <= 0.03;
        out.detail += fmt("CV=%.1f sim %.5f closed %.5f (%.1f%%<=10) harmonic %.5f (%.2f%%<=3); ", cv,
                          m.mean_delay.value, r3, 100 * e3, h, 100 * eh);
    }
    // homogeneous rates: the harmonic form is exact
    const auto scn = build_scenario(RateModel::constant(1.0), pop, rule, 2000, 100, 403, opts);
    const auto rec = simulate_multihop(scn, {4, inf, 404, 0});
    const auto m = estimate_metrics(rec, {}, ClusterBy::Run);
    const double h = multihop_delay_harmonic(pop, rule, 1.0, HolderView::Realized);
    const double z = std::abs(m.mean_delay.value - h) / m.mean_delay.std_error;
    out.pass = out.pass && z <= 3.0;
    out.detail += fmt("constant rates sim %.5f harmonic %.5f (%.2f SE<=3)", m.mean_delay.value, h, z);
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac5()
{
    Outcome out;
    const double ks[] = {0.25, 0.5, 0.75, 1.0};
    for (double alpha : {1.0, 2.0, 3.0}) {
        OffloadInputs in;
        in.rates = RateModel::gamma(1.0, 0.5);
        in.popularity = PopularityModel::zipf(alpha, 1, 30);
        in.nodes = 1000;
        in.contents = 10000;
        in.seed = derive_seed(501, {std::uint64_t(alpha)});
        const auto scn = offload_scenario(in);
        const auto pop = empirical_popularity(scn);
        Interval d[4];
        for (int i = 0; i < 4; ++i) {
            const auto p = baseline_allocation(PolicyKind::PowerLaw, pop, 10.0, ks[i]);
            d[i] = simulate_policy(p, scn, 1.0, 20, derive_seed(502, {std::uint64_t(alpha)}), 0).mean_delay;
        }
        bool ok = true;
        double min_margin = inf;
        for (int i : {0, 2, 3}) {
            const double margin = (d[i].value - d[1].value)
                                  - 1.96 * std::hypot(d[i].std_error, d[1].std_error);
            min_margin = std::min(min_margin, margin / d[1].value);
            ok = ok && margin > 0.0;
        }
        out.pass = out.pass && ok;
        out.detail += fmt("alpha=%g E[T] k=.25 %.4f .5 %.4f .75 %.4f 1 %.4f (min margin %.2f%%); ", alpha, d[0].value,
                          d[1].value, d[2].value, d[3].value, 100 * min_margin);
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac6()
{
    Outcome out;
    // two-class toy: Lagrangian solution against a grid search
    const auto toy = PopularityModel::explicit_pmf({{1, 0.5}, {4, 0.5}});
    QosDiagnostics diag;
    qos_allocation(toy, 1.0, 1.0, 1.0, &diag);
    double best = inf;
    for (int i = 0; i <= 2000; ++i)
        best = std::min(best, qos_objective(toy, {{1, i * 1e-3}, {4, 2.0 - i * 1e-3}}, 1.0, 1.0));
    const double toy_gap = std::abs(diag.objective - best);
    out.pass = toy_gap <= 1e-6;
    out.detail = fmt("toy KKT vs grid %.1e (<=1e-6); ", toy_gap);

    OffloadInputs in;
    in.rates = RateModel::gamma(1.0, 1.0);
    in.popularity = PopularityModel::zipf(1.0, 1, 30);
    in.nodes = 500;
    in.contents = 50;
    in.seed = 601;
    const auto scn = offload_scenario(in);
    const auto pop = empirical_popularity(scn);
    const double ttl = 0.3;
    // one fixed network, as in a single-trace comparison: records are
    // independent given the scenario
    const auto run = [&](const AllocationPolicy& p) {
        return simulate_policy(p, scn, ttl, 300, 602, 0, ClusterBy::Record).offloading;
    };
    for (int total : {50, 100}) {
        const double c = static_cast<double>(total) / in.contents;
        const auto qos = run(qos_allocation(pop, 1.0, ttl, c));
        const auto lg = run(baseline_allocation(PolicyKind::Log, pop, c));
        const auto sq = run(sqrt_allocation(pop, c));
        const auto rnd = run(baseline_allocation(PolicyKind::Random, pop, c, 0, in.contents, 603));
        const bool best_ok = separated_above(qos, lg) && separated_above(qos, sq) && separated_above(qos, rnd);
        const bool worst_ok = separated_above(lg, rnd) && separated_above(sq, rnd);
        out.pass = out.pass && best_ok && worst_ok;
        out.detail += fmt("budget %d: QoS %.3f Log %.3f Sqrt %.3f Random %.3f%s; ", total, qos.value, lg.value, sq.value,
                          rnd.value, best_ok && worst_ok ? "" : " (not separated)");
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac7()
{
    Outcome out;
    const double ttl = 0.04, t0 = 1.0;
    const auto rule = det(AvailabilityFunction::linear(0.2));
    BuildOptions opts;
    opts.contact_law = ContactLaw::ParetoRenewal;
    opts.t0 = t0;
    int run = 0;
    for (double hi : {4.0, 6.0})
        for (double alpha : {1.0, 2.0}) {
            const auto shapes = RateModel::uniform(1.5, hi);
            const auto pop = PopularityModel::bounded_pareto(alpha, 50, 100);
            const auto scn = build_scenario(shapes, pop, rule, 1000, 200, derive_seed(701, {std::uint64_t(run)}), opts);
            const auto rec = simulate_static(scn, {10, inf, derive_seed(702, {std::uint64_t(run)}), 0});
            const auto m = estimate_metrics(rec, {ttl}, ClusterBy::Request);
            const auto pm = pareto_metrics(AggregateRateLaw::for_model(shapes), t0, pop, rule, ttl, HolderView::Realized);
            const double ed = rel(pm.delay.value, m.mean_delay.value);
            const double ep = rel(pm.probability.value, m.access_probability[0].value);
            const bool bracket = pm.delay_bound <= m.mean_delay.value && pm.probability_bound >= m.access_probability[0].value;
            out.pass = out.pass && ed <= 0.05 && ep <= 0.05 && bracket;
            out.detail += fmt("U[1.5,%g] alpha=%g: delay %.2f%% P %.2f%% bounds %s; ", hi, alpha, 100 * ed, 100 * ep,
                              bracket ? "bracket" : "VIOLATED");
            ++run;
        }
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac8()
{
    OffloadInputs in;
    in.rates = RateModel::gamma(1.0, 1.0);
    in.popularity = PopularityModel::zipf(1.0, 1, 30);
    in.nodes = 500;
    in.contents = 100;
    in.seed = 801;
    BlindOptions o;
    o.budget = 5.0;
    o.update_every = 10;
    o.replications = 200;
    o.seed = 802;
    const auto r = run_popularity_blind(in, o);
    Outcome out;
    out.pass = r.blind.value <= r.uniform.value && r.blind.value >= r.sqrt_optimal.value
               && separated_above(r.uniform, r.blind) && separated_above(r.uniform, r.sqrt_optimal);
    out.detail = fmt("mean delay sqrt %.4f [%.4f, %.4f] blind %.4f [%.4f, %.4f] uniform %.4f [%.4f, %.4f]",
                     r.sqrt_optimal.value, r.sqrt_optimal.ci_low, r.sqrt_optimal.ci_high, r.blind.value, r.blind.ci_low,
                     r.blind.ci_high, r.uniform.value, r.uniform.ci_low, r.uniform.ci_high);
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac9()
{
    TemporalInputs t;
    t.base.rates = RateModel::gamma(1.0, 1.0);
    t.base.popularity = PopularityModel::zipf(2.0, 1, 100);
    t.base.nodes = 500;
    t.base.contents = 200;
    t.base.seed = 901;
    t.base.replications = 40;
    t.second_rates = RateModel::gamma(5.0, 1.0);
    t.windows = {0.005, 0.05, 0.12};
    t.ttl = 0.17;
    t.budget = 5.0;
    const auto rows = temporal_offload_experiment(t);
    Outcome out;
    double prev_gap = inf;
    for (const auto& r : rows) {
        const double gap = r.optimal_average.value - r.optimal_window_based.value;
        const bool order = r.optimal_average.value >= r.optimal_window_based.value
                           && r.optimal_window_based.value >= r.log_policy.value;
        out.pass = out.pass && order && gap <= prev_gap;
        out.detail += fmt("w=%g avg %.4f window %.4f log %.4f gap %.4f; ", r.window, r.optimal_average.value,
                          r.optimal_window_based.value, r.log_policy.value, gap);
        prev_gap = gap;
    }
    return out;
}

// ---------------------------------------------------------------------------

Outcome ac10()
{
    const auto rates = RateModel::gamma(1.0, 0.5);
    const auto pop = PopularityModel::bounded_pareto(2.0, 2, 10);
    const auto rule = det(AvailabilityFunction::linear(1.0));
    BuildOptions weighted;
    weighted.selection = HolderSelection::WeightedByProductOfRatesToRequesters;
    const int nodes = 2000, contents = 2000;
    const auto sw = build_scenario(rates, pop, rule, nodes, contents, 1001, weighted);
    const auto su = build_scenario(rates, pop, rule, nodes, contents, 1001);

    double sum = 0.0;
    std::size_t pairs = 0;
    for (const auto& c : sw.contents)
        for (int j : c.requesters)
            for (int h : c.holders) {
                sum += sw.rates(j, h);
                ++pairs;
            }
    const double ratio = sum / pairs / rates.mean();

    const auto mw = estimate_metrics(simulate_static(sw, {10, inf, 1002, 0}), {}, ClusterBy::Request);
    const auto mu = estimate_metrics(simulate_static(su, {10, inf, 1002, 0}), {}, ClusterBy::Request);
    const auto eff = effective_rate(rates, [](double x) { return x; }, "single requester");
    const double bound = expected_delay_bound(pop, rule, eff.value, HolderView::Realized);

    Outcome out;
    out.pass = rel(ratio, 1.25) <= 0.03 && bound <= mw.mean_delay.value && separated_above(mu.mean_delay, mw.mean_delay);
    out.detail = fmt("realized mu_pi/mu %.4f (1.25 +-3%%); bound %.5f <= weighted %.5f [%.5f, %.5f]; "
                     "uniform %.5f [%.5f, %.5f]",
                     ratio, bound, mw.mean_delay.value, mw.mean_delay.ci_low, mw.mean_delay.ci_high,
                     mu.mean_delay.value, mu.mean_delay.ci_low, mu.mean_delay.ci_high);
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    const std::function<Outcome()> criteria[] = {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9, ac10};
    std::set<int> only;
    for (int i = 1; i < argc; ++i)
        only.insert(std::atoi(argv[i]));

    int failures = 0;
    for (int k = 1; k <= 10; ++k) {
        if (!only.empty() && !only.count(k))
            continue;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k - 1]();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("AC-%d %s: %s [%.1fs]\n", k, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures;
}
