#include "oppnet/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <sstream>

namespace oppnet {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

std::string tag(const std::string& name, double ttl) { return name + "[ttl=" + format_number(ttl) + "]"; }

std::string fixed(double v, int digits = 6)
{
    if (!std::isfinite(v))
        return std::isnan(v) ? "n/a" : (v > 0 ? "inf" : "-inf");
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

double relative_error(double sim, double exact) { return std::abs(sim - exact) / std::abs(exact); }

ResultRecord estimate(const std::string& name, const Interval& i, std::optional<double> analytic)
{
    return {name, i.value, i.ci_low, i.ci_high, analytic};
}

ResultRecord point(const std::string& name, double v, std::optional<double> analytic = std::nullopt)
{
    return {name, v, std::nullopt, std::nullopt, analytic};
}

ResultRecord prediction(const std::string& name, const Prediction& p)
{
    if (p.std_error > 0.0)
        return {name, p.value, p.value - 1.96 * p.std_error, p.value + 1.96 * p.std_error, std::nullopt};
    return point(name, p.value);
}

/// Analytic counterparts of the simulated metrics for one configuration.
struct Analytic {
    Prediction delay{inf, 0.0};
    double delay_bound = inf;
    std::vector<Prediction> probability; // per ttl
    std::vector<double> probability_bound;
    std::optional<double> harmonic;
    int clamped_classes = 0;
};

Analytic analytic_values(const ExperimentConfig& cfg, const Models& m)
{
    Analytic a;
    const auto view = holder_view(cfg);
    const auto agg = AggregateRateLaw::for_model(m.rates, static_cast<std::size_t>(cfg.metrics.pool),
                                                 cfg.scenario.seed);
    const double mu = m.rates.mean();
    const auto& ttls = cfg.metrics.ttl;

    if (cfg.scenario.contact_law == "pareto") {
        for (double ttl : ttls) {
            try {
                const auto pm = pareto_metrics(agg, cfg.scenario.t0, m.popularity, m.rule, ttl, view);
                a.delay = pm.delay;
                a.delay_bound = pm.delay_bound;
                a.probability.push_back(pm.probability);
                a.probability_bound.push_back(pm.probability_bound);
            } catch (const InfiniteMoment&) {
                a.probability.push_back({std::nan(""), 0.0});
                a.probability_bound.push_back(std::nan(""));
            }
        }
        return a;
    }

    if (cfg.protocol.kind == "multihop") {
        const auto mh = multihop_delay(m.popularity, m.rule, mu, cfg.protocol.cooperation, cfg.protocol.limit);
        a.delay = {mh.value, 0.0};
        a.clamped_classes = mh.clamped_classes;
        if (cfg.protocol.cooperation == 1.0 && std::isinf(cfg.protocol.limit))
            a.harmonic = multihop_delay_harmonic(m.popularity, m.rule, mu, view);
        return a;
    }

    try {
        a.delay = expected_delay_exact(m.popularity, m.rule, agg, view);
    } catch (const InfiniteMoment&) {
        a.delay = {inf, 0.0};
    }
    a.delay_bound = expected_delay_bound(m.popularity, m.rule, mu, view);
    for (double ttl : ttls) {
        a.probability.push_back(access_probability_exact(m.popularity, m.rule, agg, ttl, view));
        a.probability_bound.push_back(access_probability_bound(m.popularity, m.rule, mu, ttl, view));
    }
    return a;
}

std::vector<DeliveryRecord> simulate(const ExperimentConfig& cfg, const Models& m)
{
    const auto scn = build_scenario(m.rates, m.popularity, m.rule, cfg.scenario.nodes, cfg.scenario.contents,
                                    cfg.scenario.seed, build_options(cfg));
    const SimOptions opts{cfg.scenario.replications, cfg.scenario.horizon, derive_seed(cfg.scenario.seed, {8}),
                          static_cast<unsigned>(cfg.scenario.threads)};
    return cfg.protocol.kind == "multihop" ? simulate_multihop(scn, opts) : simulate_static(scn, opts);
}

ClusterBy clusters(const ExperimentConfig& cfg)
{
    return cfg.protocol.kind == "multihop" ? ClusterBy::Run : ClusterBy::Request;
}

std::optional<double> finite(double v)
{
    if (std::isfinite(v))
        return v;
    return std::nullopt;
}

} // namespace

Report run_analyze(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    const auto m = build_models(cfg);
    const auto a = analytic_values(cfg, m);
    Report r;
    std::ostringstream t;

    r.results.push_back(prediction("expected_delay", a.delay));
    t << "expected delay        " << fixed(a.delay.value) << '\n';
    if (std::isfinite(a.delay_bound) || cfg.protocol.kind != "multihop") {
        r.results.push_back(point("expected_delay_bound", a.delay_bound));
        t << "delay lower bound     " << fixed(a.delay_bound) << '\n';
    }
    if (a.harmonic) {
        r.results.push_back(point("expected_delay_harmonic", *a.harmonic));
        t << "harmonic-sum delay    " << fixed(*a.harmonic) << '\n';
    }
    if (a.clamped_classes > 0) {
        r.results.push_back(point("clamped_classes", a.clamped_classes));
        t << "classes with L > n    " << a.clamped_classes << '\n';
    }
    for (std::size_t i = 0; i < a.probability.size(); ++i) {
        const double ttl = cfg.metrics.ttl[i];
        r.results.push_back(prediction(tag("access_probability", ttl), a.probability[i]));
        r.results.push_back(point(tag("access_probability_bound", ttl), a.probability_bound[i]));
        r.plot.push_back({ttl, "exact", a.probability[i].value, std::nullopt});
        r.plot.push_back({ttl, "bound", a.probability_bound[i], std::nullopt});
        t << "P{T <= " << fixed(ttl) << "}  exact " << fixed(a.probability[i].value) << "  bound "
          << fixed(a.probability_bound[i]) << '\n';
    }

    // closed forms for Gamma rates and Pareto(n0, 2) popularity
    const bool closed_case = cfg.rates.family == "gamma" && cfg.popularity.family == "bounded_pareto"
                        && cfg.popularity.alpha == 2.0 && cfg.availability.kind == "deterministic"
                        && cfg.scenario.contact_law == "exponential" && cfg.protocol.kind == "static";
    if (closed_case) {
        const double c = cfg.availability.c, n0 = cfg.popularity.n_min, mu = cfg.rates.mean, cv = cfg.rates.cv;
        if (cfg.availability.form == "linear") {
            try {
                const double closed = bp2_delay(c, n0, mu, cv);
                const double numeric = bp2_delay_numeric(c, n0, mu, cv);
                r.results.push_back(point("bp2_delay", closed, numeric));
                r.results.push_back(point("bp2_delay_delta_numeric", relative_error(numeric, closed)));
                r.results.push_back(point("bp2_delay_delta_generic", relative_error(a.delay.value, closed)));
                t << "closed-form delay     " << fixed(closed) << "  vs quadrature " << fixed(relative_error(numeric, closed))
                  << "  vs discrete generic " << fixed(relative_error(a.delay.value, closed)) << '\n';
            } catch (const std::domain_error& e) {
                t << "closed-form delay     not defined here (" << e.what() << ")\n";
            }
        } else if (cfg.availability.form == "log") {
            for (std::size_t i = 0; i < cfg.metrics.ttl.size(); ++i) {
                const double ttl = cfg.metrics.ttl[i];
                try {
                    const double closed = bp2_probability(c, n0, mu, cv, ttl);
                    const double numeric = bp2_probability_numeric(c, n0, mu, cv, ttl);
                    r.results.push_back(point(tag("bp2_probability", ttl), closed, numeric));
                    r.results.push_back(
                        point(tag("bp2_probability_delta_numeric", ttl), relative_error(numeric, closed)));
                    r.results.push_back(point(tag("bp2_probability_delta_generic", ttl),
                                              relative_error(a.probability[i].value, closed)));
                    t << "closed-form P{T <= " << fixed(ttl) << "}  " << fixed(closed) << "  vs quadrature "
                      << fixed(relative_error(numeric, closed)) << "  vs discrete generic "
                      << fixed(relative_error(a.probability[i].value, closed)) << '\n';
                } catch (const std::domain_error& e) {
                    t << "closed-form P{T <= " << fixed(ttl) << "}  not defined here (" << e.what() << ")\n";
                }
            }
        }
    }
    r.table = t.str();
    return r;
}

Report run_simulate(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    const auto m = build_models(cfg);
    const auto a = analytic_values(cfg, m);
    const auto records = simulate(cfg, m);
    const auto rep = estimate_metrics(records, cfg.metrics.ttl, clusters(cfg));

    Report r;
    std::ostringstream t;
    const std::string delay_name = rep.mean_is_lower_bound ? "mean_delay_lower_bound" : "mean_delay";
    r.results.push_back(estimate(delay_name, rep.mean_delay, finite(a.delay.value)));
    t << "records " << rep.records << ", censored " << fixed(rep.censored_fraction) << '\n';
    t << "mean delay  " << rep.mean_delay_text() << "  analytic " << fixed(a.delay.value) << '\n';
    for (std::size_t i = 0; i < rep.ttls.size(); ++i) {
        const double ttl = rep.ttls[i];
        std::optional<double> exact;
        if (i < a.probability.size())
            exact = finite(a.probability[i].value);
        r.results.push_back(estimate(tag("access_probability", ttl), rep.access_probability[i], exact));
        t << "P{T <= " << fixed(ttl) << "}  " << fixed(rep.access_probability[i].value) << " ["
          << fixed(rep.access_probability[i].ci_low) << ", " << fixed(rep.access_probability[i].ci_high) << "]";
        if (exact)
            t << "  analytic " << fixed(*exact);
        t << '\n';
    }
    r.results.push_back(point("censored_fraction", rep.censored_fraction));
    for (const auto& [n, cls] : rep.by_popularity)
        r.plot.push_back({static_cast<double>(n), "mean_delay", cls.mean_delay, std::nullopt});
    r.table = t.str();
    return r;
}

Report run_validate(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    std::vector<int> sizes = cfg.validate.nodes;
    if (sizes.empty())
        sizes.push_back(cfg.scenario.nodes);

    Report r;
    std::ostringstream t;
    t << "N       delay sim   delay pred  rel err    ttl(q50)   P sim      P pred     rel err\n";
    for (int n : sizes) {
        ExperimentConfig c = cfg;
        c.scenario.nodes = n;
        validate_config(c);
        const auto m = build_models(c);
        const auto records = simulate(c, m);
        const double median = delay_quantile(records, 0.5);
        c.metrics.ttl = {median};
        const auto a = analytic_values(c, m);
        const auto rep = estimate_metrics(records, {median}, clusters(c));

        const std::string suffix = "[N=" + std::to_string(n) + "]";
        const double x = n;
        const double de = relative_error(rep.mean_delay.value, a.delay.value);
        const double pe = relative_error(rep.access_probability[0].value, a.probability[0].value);
        r.results.push_back(estimate("mean_delay" + suffix, rep.mean_delay, finite(a.delay.value)));
        r.results.push_back(point("delay_relative_error" + suffix, de));
        r.results.push_back(point("ttl_median" + suffix, median));
        r.results.push_back(
            estimate("access_probability_at_median" + suffix, rep.access_probability[0], a.probability[0].value));
        r.results.push_back(point("probability_relative_error" + suffix, pe));
        r.plot.push_back({x, "delay_relative_error", de, rep.mean_delay.std_error / std::abs(a.delay.value)});
        r.plot.push_back(
            {x, "probability_relative_error", pe, rep.access_probability[0].std_error / a.probability[0].value});

        char line[200];
        std::snprintf(line, sizeof line, "%-7d %-11.5g %-11.5g %-10.3f %-10.4g %-10.5g %-10.5g %.3f\n", n,
                      rep.mean_delay.value, a.delay.value, 100 * de, median, rep.access_probability[0].value,
                      a.probability[0].value, 100 * pe);
        t << line;
    }
    t << "(relative errors in %)\n";
    r.table = t.str();
    return r;
}

AllocationPolicy make_policy(const std::string& name, const PopularityModel& pop, double mu_lambda, double ttl,
                             double budget, int contents, std::uint64_t seed)
{
    if (name == "qos")
        return qos_allocation(pop, mu_lambda, ttl, budget);
    if (name == "sqrt")
        return sqrt_allocation(pop, budget);
    if (name == "log")
        return baseline_allocation(PolicyKind::Log, pop, budget);
    if (name == "uniform")
        return baseline_allocation(PolicyKind::Uniform, pop, budget);
    if (name == "random")
        return baseline_allocation(PolicyKind::Random, pop, budget, 0.0, contents, seed);
    if (name.rfind("power:", 0) == 0)
        return baseline_allocation(PolicyKind::PowerLaw, pop, budget, std::stod(name.substr(6)));
    throw std::invalid_argument("unknown policy '" + name + "'");
}

Report run_optimize(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    const auto m = build_models(cfg);
    const double mu = m.rates.mean(), ttl = cfg.metrics.ttl.front(), budget = cfg.offload.budget;
    const auto agg = AggregateRateLaw::for_model(m.rates, static_cast<std::size_t>(cfg.metrics.pool),
                                                 cfg.scenario.seed);

    Report r;
    std::ostringstream t;
    std::vector<AllocationPolicy> tables;
    for (const auto& name : cfg.offload.policies) {
        if (name == "random" || name == "blind")
            continue; // no per-class table
        auto p = make_policy(name, m.popularity, mu, ttl, budget, cfg.scenario.contents, cfg.scenario.seed);
        const double mean = p.mean_copies(m.popularity);
        const double roff = access_probability_exact(m.popularity, p.as_rule(), agg, ttl).value;
        r.results.push_back(point(name + ".mean_copies", mean, budget));
        r.results.push_back(point(tag(name + ".offloading", ttl), roff));
        if (p.kind == PolicyKind::QoSOptimal)
            r.results.push_back(point(name + ".objective", qos_objective(m.popularity, p.table, mu, ttl)));
        for (const auto& [n, rho] : p.table)
            r.plot.push_back({static_cast<double>(n), name, rho, std::nullopt});
        t << name << ": mean copies " << fixed(mean, 10) << ", R_off " << fixed(roff) << '\n';
        tables.push_back(std::move(p));
    }
    if (!tables.empty()) {
        t << "\nn";
        for (const auto& name : cfg.offload.policies)
            if (name != "random" && name != "blind")
                t << '\t' << name;
        t << '\n';
        for (int n : m.popularity.support()) {
            t << n;
            for (const auto& p : tables)
                t << '\t' << fixed(p.table.at(n), 5);
            t << '\n';
        }
    }
    r.table = t.str();
    return r;
}

Report run_offload_sim(const ExperimentConfig& cfg)
{
    validate_config(cfg);
    if (cfg.protocol.kind != "static" || cfg.scenario.contact_law != "exponential")
        throw std::invalid_argument("offload-sim: needs protocol static and exponential contacts");
    const auto m = build_models(cfg);
    OffloadInputs in;
    in.rates = m.rates;
    in.popularity = m.popularity;
    in.nodes = cfg.scenario.nodes;
    in.contents = cfg.scenario.contents;
    in.seed = cfg.scenario.seed;
    in.replications = cfg.scenario.replications;
    in.threads = static_cast<unsigned>(cfg.scenario.threads);

    const auto scn = offload_scenario(in);
    const auto pop = empirical_popularity(scn);
    const auto agg = AggregateRateLaw::for_model(m.rates, static_cast<std::size_t>(cfg.metrics.pool),
                                                 cfg.scenario.seed);
    const double mu = m.rates.mean();

    Report r;
    std::ostringstream t;
    for (double ttl : cfg.metrics.ttl) {
        t << "ttl " << fixed(ttl) << '\n';
        for (const auto& name : cfg.offload.policies) {
            if (name == "blind")
                continue;
            const auto p = make_policy(name, pop, mu, ttl, cfg.offload.budget, in.contents,
                                       derive_seed(cfg.scenario.seed, {10}));
            const auto out = simulate_policy(p, scn, ttl, in.replications, in.seed, in.threads);
            const double exact = access_probability_exact(pop, p.as_rule(), agg, ttl).value;
            r.results.push_back(estimate(tag(name + ".offloading", ttl), out.offloading, exact));
            r.results.push_back(estimate(name + ".mean_delay", out.mean_delay, std::nullopt));
            r.plot.push_back({ttl, name, out.offloading.value, out.offloading.std_error});
            t << "  " << name << "\tR_off " << fixed(out.offloading.value) << " +- "
              << fixed(1.96 * out.offloading.std_error, 3) << "  analytic " << fixed(exact) << "  copies "
              << out.copies << '\n';
        }
    }
    for (const auto& name : cfg.offload.policies) {
        if (name != "blind")
            continue;
        BlindOptions o;
        o.budget = cfg.offload.budget;
        o.update_every = cfg.offload.update_every;
        o.replications = cfg.scenario.replications;
        o.seed = derive_seed(cfg.scenario.seed, {11});
        o.threads = in.threads;
        const auto b = run_popularity_blind(in, o);
        r.results.push_back(estimate("blind.mean_delay", b.blind, std::nullopt));
        r.results.push_back(estimate("blind.uniform_mean_delay", b.uniform, std::nullopt));
        r.results.push_back(estimate("blind.sqrt_mean_delay", b.sqrt_optimal, std::nullopt));
        for (const auto& p : b.trajectory)
            r.plot.push_back({static_cast<double>(p.deliveries), "blind_trajectory", p.mean_delay, std::nullopt});
        t << "popularity-blind mean delay " << fixed(b.blind.value) << "  uniform " << fixed(b.uniform.value)
          << "  sqrt " << fixed(b.sqrt_optimal.value) << "  reallocations " << b.reallocations << '\n';
    }
    r.table = t.str();
    return r;
}

IngestReport run_ingest(const TraceFit& fit)
{
    IngestReport out;
    auto& r = out.report;
    r.results.push_back(point("nodes", fit.trace.nodes));
    r.results.push_back(point("contacts", static_cast<double>(fit.trace.events.size())));
    r.results.push_back(point("duration", fit.trace.duration));
    r.results.push_back(point("pairs_seen", static_cast<double>(fit.pair_rates.size())));
    r.results.push_back(point("rate_mean", fit.mean));
    r.results.push_back(point("rate_cv", fit.cv));
    for (const auto& [pair, rate] : fit.pair_rates)
        r.plot.push_back({static_cast<double>(fit.contacts.at(pair)), "pair_rate", rate, std::nullopt});

    std::ostringstream t;
    t << "nodes " << fit.trace.nodes << ", contacts " << fit.trace.events.size() << ", duration "
      << fixed(fit.trace.duration) << '\n'
      << "pairs with contacts " << fit.pair_rates.size() << '\n'
      << "fitted mean rate " << fixed(fit.mean) << ", CV " << fixed(fit.cv) << '\n';
    r.table = t.str();

    std::ostringstream s;
    s << "[rates]\nfamily = empirical\nvalues = ";
    bool first = true;
    for (const auto& [pair, rate] : fit.pair_rates) {
        s << (first ? "" : ", ") << format_number(rate);
        first = false;
    }
    s << '\n';
    out.rates_section = s.str();
    return out;
}

} // namespace oppnet
