#include "oppnet/offload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "oppnet/parallel.hpp"

namespace oppnet {

namespace {

void require_budget(double budget)
{
    if (!(budget > 0.0) || !std::isfinite(budget))
        throw std::domain_error("allocation: budget c_M must be > 0");
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(6);
    os << x;
    return os.str();
}

AllocationPolicy table_policy(PolicyKind kind, const PopularityModel& pop, double budget,
                              const std::function<double(int)>& shape)
{
    const double norm = pop.expectation([&](int n) { return shape(n); });
    if (!(norm > 0.0))
        throw std::domain_error("allocation: " + to_string(kind) + " weights have zero mean on this popularity support");
    AllocationPolicy p;
    p.kind = kind;
    p.budget = budget;
    for (int n : pop.support())
        p.table[n] = budget * shape(n) / norm;
    return p;
}

constexpr double z95 = 1.959963984540054;

Interval mean_interval(const std::vector<double>& xs)
{
    Interval out;
    if (xs.empty())
        return out;
    const double n = static_cast<double>(xs.size());
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    const double se = xs.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
    return {mean, mean - z95 * se, mean + z95 * se, se};
}

} // namespace

std::string to_string(PolicyKind kind)
{
    switch (kind) {
    case PolicyKind::PowerLaw: return "power";
    case PolicyKind::Log: return "log";
    case PolicyKind::SqrtOptimal: return "sqrt";
    case PolicyKind::Uniform: return "uniform";
    case PolicyKind::Random: return "random";
    case PolicyKind::QoSOptimal: return "qos";
    }
    return "?";
}

std::string AllocationPolicy::name() const
{
    if (kind == PolicyKind::PowerLaw)
        return "power(k=" + fmt(exponent) + ")";
    if (kind == PolicyKind::QoSOptimal)
        return "qos(ttl=" + fmt(ttl) + ")";
    return to_string(kind);
}

double AllocationPolicy::mean_copies(const PopularityModel& pop) const
{
    if (kind == PolicyKind::Random) {
        if (counts.empty())
            return 0.0;
        return std::accumulate(counts.begin(), counts.end(), 0.0) / static_cast<double>(counts.size());
    }
    return pop.expectation([&](int n) {
        const auto it = table.find(n);
        if (it == table.end())
            throw std::domain_error("allocation: no table entry for n=" + std::to_string(n));
        return it->second;
    });
}

AvailabilityRule AllocationPolicy::as_rule() const
{
    if (kind != PolicyKind::Random)
        return AvailabilityRule::deterministic(AvailabilityFunction::table(table));
    // Each of the M*c_M copies lands on a given content with probability 1/M.
    const int contents = static_cast<int>(counts.size());
    const int copies = std::accumulate(counts.begin(), counts.end(), 0);
    if (contents < 1)
        throw std::logic_error("random allocation without contents");
    std::map<int, double> pmf;
    const double p = 1.0 / contents;
    const double lt = std::lgamma(copies + 1.0);
    for (int m = 0; m <= copies; ++m) {
        const double lp = lt - std::lgamma(m + 1.0) - std::lgamma(copies - m + 1.0) + m * std::log(p)
                          + (copies - m) * std::log1p(-p);
        const double v = std::exp(lp);
        if (v > 1e-300)
            pmf[m] = v;
    }
    double total = 0.0;
    for (const auto& [m, v] : pmf)
        total += v;
    for (auto& [m, v] : pmf)
        v /= total;
    return AvailabilityRule::uncorrelated(pmf);
}

AllocationPolicy sqrt_allocation(const PopularityModel& pop, double budget)
{
    require_budget(budget);
    auto p = table_policy(PolicyKind::SqrtOptimal, pop, budget, [](int n) { return std::sqrt(double(n)); });
    p.exponent = 0.5;
    return p;
}

double qos_objective(const PopularityModel& pop, const std::map<int, double>& table, double mu_lambda, double ttl)
{
    const double a = mu_lambda * ttl;
    return pop.expectation([&](int n) { return n * std::exp(-table.at(n) * a); });
}

AllocationPolicy qos_allocation(const PopularityModel& pop, double mu_lambda, double ttl, double budget,
                                QosDiagnostics* diagnostics)
{
    require_budget(budget);
    const double a = mu_lambda * ttl;
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::domain_error("qos allocation: mu_lambda * ttl must be > 0");

    const auto& support = pop.support();
    const auto& probs = pop.probabilities();
    auto rho = [&](int n, double lambda0) { return std::max(0.0, std::log(n * a / lambda0) / a); };
    auto spent = [&](double lambda0) {
        double s = 0.0;
        for (std::size_t i = 0; i < support.size(); ++i)
            s += probs[static_cast<Eigen::Index>(i)] * rho(support[i], lambda0);
        return s;
    };

    // Budget spent is continuous and strictly decreasing in lambda0 wherever
    // it is positive; at lambda_hi every rho_n is zero.
    double hi = 0.0;
    for (int n : support)
        hi = std::max(hi, n * a);
    double lo = hi;
    int iterations = 0;
    while (spent(lo) < budget) {
        lo *= 0.5;
        if (++iterations > 4000)
            throw std::runtime_error("qos allocation: could not bracket the multiplier");
    }
    int bisections = 0;
    for (; bisections < 200; ++bisections) {
        const double mid = std::sqrt(lo * hi);
        if (!(mid > lo && mid < hi))
            break;
        (spent(mid) > budget ? lo : hi) = mid;
    }
    const double lambda0 = std::sqrt(lo * hi);
    const double got = spent(lambda0);
    if (std::abs(got - budget) > 1e-9 * std::max(1.0, budget)) {
        std::ostringstream os;
        os.precision(17);
        os << "qos allocation: bisection did not converge in 200 iterations; bracket [" << lo << ", " << hi
           << "], budget spent " << got << " of " << budget;
        throw std::runtime_error(os.str());
    }

    AllocationPolicy p;
    p.kind = PolicyKind::QoSOptimal;
    p.budget = budget;
    p.ttl = ttl;
    // Remove the residual bisection error from the active set so the budget holds to rounding.
    const double scale = got > 0.0 ? budget / got : 1.0;
    for (int n : support)
        p.table[n] = rho(n, lambda0) * scale;

    if (diagnostics) {
        diagnostics->multiplier = lambda0;
        diagnostics->iterations = iterations + bisections;
        diagnostics->objective = qos_objective(pop, p.table, mu_lambda, ttl);
        diagnostics->active.clear();
        for (int n : support)
            if (p.table[n] > 0.0)
                diagnostics->active.push_back(n);
    }
    return p;
}

AllocationPolicy baseline_allocation(PolicyKind kind, const PopularityModel& pop, double budget, double exponent,
                                     int contents, std::uint64_t seed)
{
    require_budget(budget);
    switch (kind) {
    case PolicyKind::Uniform: return table_policy(kind, pop, budget, [](int) { return 1.0; });
    case PolicyKind::SqrtOptimal: return sqrt_allocation(pop, budget);
    case PolicyKind::Log: return table_policy(kind, pop, budget, [](int n) { return std::log(double(n)); });
    case PolicyKind::PowerLaw: {
        auto p = table_policy(kind, pop, budget, [exponent](int n) { return std::pow(double(n), exponent); });
        p.exponent = exponent;
        return p;
    }
    case PolicyKind::Random: {
        if (contents < 1)
            throw std::invalid_argument("random allocation: need the number of contents");
        AllocationPolicy p;
        p.kind = kind;
        p.budget = budget;
        p.counts.assign(static_cast<std::size_t>(contents), 0);
        const auto copies = std::llround(budget * contents);
        Rng rng(seed);
        std::uniform_int_distribution<int> pick(0, contents - 1);
        for (long long k = 0; k < copies; ++k)
            p.counts[static_cast<std::size_t>(pick(rng))]++;
        return p;
    }
    case PolicyKind::QoSOptimal: break;
    }
    throw std::invalid_argument("baseline allocation: use qos_allocation for the QoS policy");
}

std::vector<int> realize_counts(const AllocationPolicy& policy, const std::vector<int>& popularities,
                                std::uint64_t seed)
{
    if (policy.kind == PolicyKind::Random) {
        if (policy.counts.size() != popularities.size())
            throw std::invalid_argument("random allocation was drawn for a different number of contents");
        return policy.counts;
    }
    Rng rng(seed);
    const double offset = rng.uniform();
    std::vector<int> out(popularities.size());
    double running = 0.0;
    double prev = std::floor(offset);
    for (std::size_t c = 0; c < popularities.size(); ++c) {
        const auto it = policy.table.find(popularities[c]);
        if (it == policy.table.end())
            throw std::domain_error("allocation: no table entry for n=" + std::to_string(popularities[c]));
        running += it->second;
        const double cur = std::floor(running + offset);
        out[c] = static_cast<int>(cur - prev);
        prev = cur;
    }
    return out;
}

std::vector<int> integer_targets(const std::vector<double>& weights, int total)
{
    if (total < 0)
        throw std::invalid_argument("integer targets: total must be >= 0");
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    std::vector<int> out(weights.size(), 0);
    if (weights.empty())
        return out;
    if (!(sum > 0.0))
        throw std::invalid_argument("integer targets: weights must have a positive sum");
    std::vector<std::pair<double, std::size_t>> rem;
    int assigned = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double share = total * weights[i] / sum;
        out[i] = static_cast<int>(std::floor(share));
        assigned += out[i];
        rem.emplace_back(share - out[i], i);
    }
    // ties go to the lower index so the result is deterministic
    std::stable_sort(rem.begin(), rem.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
    for (int k = 0; k < total - assigned; ++k)
        out[rem[static_cast<std::size_t>(k) % rem.size()].second]++;
    return out;
}

PopularityModel empirical_popularity(const Scenario& scn)
{
    std::map<int, double> w;
    for (const auto& c : scn.contents)
        w[c.popularity()] += 1.0;
    return PopularityModel::explicit_pmf(w);
}

// ---------------------------------------------------------------------------
// Evaluation

Scenario offload_scenario(const OffloadInputs& inputs)
{
    BuildOptions o;
    o.ranking_depth = inputs.nodes;
    return build_scenario(inputs.rates, inputs.popularity, AvailabilityRule::uncorrelated({{0, 1.0}}), inputs.nodes,
                          inputs.contents, inputs.seed, o);
}

PolicyOutcome simulate_policy(const AllocationPolicy& policy, const Scenario& base, double ttl, int replications,
                              std::uint64_t seed, unsigned threads, ClusterBy clusters)
{
    Scenario scn = base;
    std::vector<int> pops;
    for (const auto& c : scn.contents)
        pops.push_back(c.popularity());
    const auto counts = realize_counts(policy, pops, derive_seed(seed, {3}));
    assign_holder_counts(scn, counts);
    const auto records = simulate_static(scn, {replications, std::numeric_limits<double>::infinity(),
                                               derive_seed(seed, {4}), threads});
    const auto m = estimate_metrics(records, {ttl}, clusters);
    return {policy.name(), m.access_probability.front(), m.mean_delay,
            std::accumulate(counts.begin(), counts.end(), 0)};
}

Interval evaluate_offloading(const AllocationPolicy& policy, const OffloadInputs& inputs, double ttl, Via via)
{
    if (!(ttl >= 0.0))
        throw std::domain_error("offloading: ttl must be >= 0");
    if (via == Via::Analytic) {
        const auto agg = AggregateRateLaw::for_model(inputs.rates, AggregateRateLaw::default_pool, inputs.seed);
        const double r = access_probability_exact(inputs.popularity, policy.as_rule(), agg, ttl).value;
        return {r, r, r, 0.0};
    }
    if (ttl == 0.0)
        return {};
    const auto scn = offload_scenario(inputs);
    return simulate_policy(policy, scn, ttl, inputs.replications, inputs.seed, inputs.threads).offloading;
}

// ---------------------------------------------------------------------------
// Popularity-blind allocation

namespace {

struct BlindRun {
    std::vector<double> delays;
    std::vector<TrajectoryPoint> trajectory;
    std::vector<int> estimates;
    int reallocations = 0;
    int undelivered = 0;
};

// One replication of the event-driven offloading process. With
// update_every = 0 the initial counts are kept throughout.
BlindRun run_offloading(const Scenario& scn, std::vector<int> counts, int update_every, int copies,
                        std::uint64_t seed)
{
    struct Request {
        int content;
        int node;
        double rate;
    };
    const std::size_t contents = scn.contents.size();
    std::vector<std::vector<Request>> waiting(contents);
    for (std::size_t c = 0; c < contents; ++c) {
        const auto& spec = scn.contents[c];
        for (int j : spec.requesters) {
            double x = 0.0;
            for (int h = 0; h < counts[c]; ++h)
                x += scn.rates(spec.holder_ranking[static_cast<std::size_t>(h)], j);
            waiting[c].push_back({static_cast<int>(c), j, x});
        }
    }
    std::vector<double> content_rate(contents, 0.0);
    auto refresh = [&](std::size_t c) {
        double s = 0.0;
        for (const auto& r : waiting[c])
            s += r.rate;
        content_rate[c] = s;
    };
    for (std::size_t c = 0; c < contents; ++c)
        refresh(c);

    BlindRun run;
    run.estimates.assign(contents, 1);
    Rng rng(seed);
    double t = 0.0, delay_sum = 0.0;
    int delivered = 0;
    for (;;) {
        const double total = std::accumulate(content_rate.begin(), content_rate.end(), 0.0);
        if (!(total > 0.0))
            break;
        t += -std::log(rng.uniform()) / total;
        double target = rng.uniform() * total;
        std::size_t c = contents;
        for (std::size_t i = 0; i < contents; ++i) {
            if (content_rate[i] <= 0.0)
                continue;
            c = i;
            if (target < content_rate[i])
                break;
            target -= content_rate[i];
        }
        auto& queue = waiting[c];
        std::size_t k = queue.size();
        for (std::size_t i = 0; i < queue.size(); ++i) {
            if (queue[i].rate <= 0.0)
                continue;
            k = i;
            if (target < queue[i].rate)
                break;
            target -= queue[i].rate;
        }
        queue[k] = queue.back();
        queue.pop_back();
        refresh(c);

        run.delays.push_back(t);
        delay_sum += t;
        ++delivered;
        run.estimates[c]++;

        if (update_every > 0 && delivered % update_every == 0) {
            std::vector<double> w(contents);
            for (std::size_t i = 0; i < contents; ++i)
                w[i] = std::sqrt(static_cast<double>(run.estimates[i]));
            auto next = integer_targets(w, copies);
            for (std::size_t i = 0; i < contents; ++i) {
                const auto& spec = scn.contents[i];
                next[i] = std::min(next[i], static_cast<int>(spec.holder_ranking.size()));
                if (next[i] == counts[i])
                    continue;
                // grow with the next ranked nodes, shrink from the newest
                const int lo = std::min(next[i], counts[i]), hi = std::max(next[i], counts[i]);
                const double sign = next[i] > counts[i] ? 1.0 : -1.0;
                for (auto& r : waiting[i]) {
                    double d = 0.0;
                    for (int h = lo; h < hi; ++h)
                        d += scn.rates(spec.holder_ranking[static_cast<std::size_t>(h)], r.node);
                    r.rate = std::max(0.0, r.rate + sign * d);
                    if (next[i] == 0)
                        r.rate = 0.0;
                }
                counts[i] = next[i];
                refresh(i);
            }
            ++run.reallocations;
            run.trajectory.push_back({delivered, delay_sum / delivered});
        }
    }
    for (const auto& q : waiting)
        run.undelivered += static_cast<int>(q.size());
    if (run.trajectory.empty() || run.trajectory.back().deliveries != delivered)
        run.trajectory.push_back({delivered, delivered ? delay_sum / delivered : 0.0});
    return run;
}

} // namespace

BlindResult run_popularity_blind(const OffloadInputs& inputs, const BlindOptions& options)
{
    require_budget(options.budget);
    if (options.update_every < 0)
        throw std::invalid_argument("popularity-blind: update_every must be >= 1 (0 disables updates)");
    if (options.replications < 1)
        throw std::invalid_argument("popularity-blind: replications must be >= 1");
    const Scenario scn = offload_scenario(inputs);
    const std::size_t contents = scn.contents.size();
    const int copies = static_cast<int>(std::llround(options.budget * static_cast<double>(contents)));

    const auto uniform_counts = integer_targets(std::vector<double>(contents, 1.0), copies);
    std::vector<double> root(contents);
    for (std::size_t c = 0; c < contents; ++c)
        root[c] = std::sqrt(static_cast<double>(scn.contents[c].popularity()));
    const auto sqrt_counts = integer_targets(root, copies);

    const auto reps = static_cast<std::size_t>(options.replications);
    std::vector<BlindRun> blind(reps), uniform(reps), best(reps);
    parallel_for(reps, options.threads, [&](std::size_t r) {
        const auto s = derive_seed(options.seed, {r});
        blind[r] = run_offloading(scn, uniform_counts, options.update_every, copies, s);
        uniform[r] = run_offloading(scn, uniform_counts, 0, copies, s);
        best[r] = run_offloading(scn, sqrt_counts, 0, copies, s);
    });

    auto summarize = [](const std::vector<BlindRun>& runs) {
        std::vector<double> means;
        for (const auto& run : runs)
            if (!run.delays.empty())
                means.push_back(std::accumulate(run.delays.begin(), run.delays.end(), 0.0)
                                / static_cast<double>(run.delays.size()));
        return mean_interval(means);
    };

    BlindResult out;
    out.blind = summarize(blind);
    out.uniform = summarize(uniform);
    out.sqrt_optimal = summarize(best);
    out.final_estimates = blind.front().estimates;
    out.reallocations = blind.front().reallocations;

    std::map<int, std::pair<double, int>> traj;
    for (const auto& run : blind)
        for (const auto& p : run.trajectory) {
            traj[p.deliveries].first += p.mean_delay;
            traj[p.deliveries].second++;
        }
    for (const auto& [d, acc] : traj)
        out.trajectory.push_back({d, acc.first / acc.second});
    return out;
}

// ---------------------------------------------------------------------------
// Alternating contact windows

std::vector<TemporalRow> temporal_offload_experiment(const TemporalInputs& inputs)
{
    require_budget(inputs.budget);
    if (inputs.windows.empty())
        throw std::invalid_argument("temporal experiment: no window lengths");
    Scenario scn = offload_scenario(inputs.base);
    scn.second_window =
        RateMatrix::procedural(inputs.second_rates, scn.nodes, derive_seed(inputs.base.seed, {5}));
    const auto pop = empirical_popularity(scn);

    const double mu1 = inputs.base.rates.mean(), mu2 = inputs.second_rates.mean();
    const auto average = qos_allocation(pop, 0.5 * (mu1 + mu2), inputs.ttl, inputs.budget);
    const AllocationPolicy window_based[2] = {qos_allocation(pop, mu1, inputs.ttl, inputs.budget),
                                              qos_allocation(pop, mu2, inputs.ttl, inputs.budget)};
    const auto log_policy = baseline_allocation(PolicyKind::Log, pop, inputs.budget);

    std::vector<int> pops;
    for (const auto& c : scn.contents)
        pops.push_back(c.popularity());

    auto offloading = [&](const AllocationPolicy* per_start[2], double window) {
        std::vector<DeliveryRecord> all;
        for (int start = 0; start < 2; ++start) {
            Scenario s = scn;
            assign_holder_counts(s, realize_counts(*per_start[start], pops, derive_seed(inputs.base.seed, {6})));
            auto rec = simulate_temporal(s, window, start,
                                         {inputs.base.replications, std::numeric_limits<double>::infinity(),
                                          derive_seed(inputs.base.seed, {7, static_cast<std::uint64_t>(start)}),
                                          inputs.base.threads});
            // keep the two halves apart when clustering
            for (auto& r : rec)
                r.replication += start * inputs.base.replications;
            all.insert(all.end(), rec.begin(), rec.end());
        }
        return estimate_metrics(all, {inputs.ttl}, ClusterBy::Request).access_probability.front();
    };

    std::vector<TemporalRow> rows;
    for (double w : inputs.windows) {
        const AllocationPolicy* avg[2] = {&average, &average};
        const AllocationPolicy* wb[2] = {&window_based[0], &window_based[1]};
        const AllocationPolicy* lg[2] = {&log_policy, &log_policy};
        rows.push_back({w, offloading(avg, w), offloading(wb, w), offloading(lg, w)});
    }
    return rows;
}

} // namespace oppnet
