#include "oppnet/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "oppnet/parallel.hpp"

namespace oppnet {

// ---------------------------------------------------------------------------
// RateMatrix

RateMatrix RateMatrix::procedural(RateModel model, int nodes, std::uint64_t seed)
{
    if (nodes < 2)
        throw std::invalid_argument("rate matrix: need at least 2 nodes");
    RateMatrix r;
    r.nodes_ = nodes;
    r.model_ = std::move(model);
    r.seed_ = seed;
    return r;
}

RateMatrix RateMatrix::dense(Eigen::MatrixXd values)
{
    if (values.rows() != values.cols() || values.rows() < 2)
        throw std::invalid_argument("rate matrix: need a square matrix with at least 2 nodes");
    for (Eigen::Index i = 0; i < values.rows(); ++i)
        for (Eigen::Index j = i + 1; j < values.cols(); ++j) {
            if (values(i, j) != values(j, i))
                throw std::invalid_argument("rate matrix: not symmetric");
            if (!(values(i, j) > 0.0) || !std::isfinite(values(i, j)))
                throw std::invalid_argument("rate matrix: off-diagonal entries must be positive");
        }
    RateMatrix r;
    r.nodes_ = static_cast<int>(values.rows());
    r.dense_ = std::move(values);
    return r;
}

double RateMatrix::operator()(int i, int j) const
{
    if (i == j)
        return 0.0;
    if (is_dense())
        return dense_(i, j);
    const auto lo = static_cast<std::uint64_t>(std::min(i, j));
    const auto hi = static_cast<std::uint64_t>(std::max(i, j));
    Rng rng(derive_seed(seed_, {lo, hi}));
    return model_->sample(rng);
}

Eigen::MatrixXd RateMatrix::to_dense() const
{
    if (is_dense())
        return dense_;
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nodes_, nodes_);
    for (int i = 0; i < nodes_; ++i)
        for (int j = i + 1; j < nodes_; ++j)
            m(i, j) = m(j, i) = (*this)(i, j);
    return m;
}

// ---------------------------------------------------------------------------
// Scenario

int Scenario::total_requests() const
{
    int total = 0;
    for (const auto& c : contents)
        total += c.popularity();
    return total;
}

void Scenario::validate() const
{
    if (nodes < 2 || rates.size() != nodes)
        throw std::invalid_argument("scenario: rate matrix does not match node count");
    if (second_window && second_window->size() != nodes)
        throw std::invalid_argument("scenario: second-window matrix does not match node count");
    if (protocol.kind == Protocol::Kind::MultiHop && contact_law != ContactLaw::Exponential)
        throw std::invalid_argument("scenario: multi-hop is supported for exponential contacts only");
    if (!(protocol.cooperation >= 0.0 && protocol.cooperation <= 1.0) || !(protocol.limit >= 0.0))
        throw std::invalid_argument("scenario: cooperation must lie in [0, 1] and the limit must be >= 0");
    if (contact_law == ContactLaw::ParetoRenewal && !(t0 > 0.0))
        throw std::invalid_argument("scenario: Pareto scale t0 must be > 0");
    std::vector<int> mark(static_cast<std::size_t>(nodes), -1);
    for (const auto& c : contents) {
        if (c.requesters.empty())
            throw std::invalid_argument("scenario: content " + std::to_string(c.id) + " has no requesters");
        for (int j : c.requesters) {
            if (j < 0 || j >= nodes || mark[static_cast<std::size_t>(j)] == c.id)
                throw std::invalid_argument("scenario: bad or repeated requester in content " + std::to_string(c.id));
            mark[static_cast<std::size_t>(j)] = c.id;
        }
        for (int i : c.holders) {
            if (i < 0 || i >= nodes || mark[static_cast<std::size_t>(i)] == c.id)
                throw std::invalid_argument("scenario: holder overlaps requesters or repeats in content "
                                            + std::to_string(c.id));
            mark[static_cast<std::size_t>(i)] = c.id;
        }
        // ids must be unique for the marking to be sound
    }
    std::vector<int> ids;
    for (const auto& c : contents)
        ids.push_back(c.id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::invalid_argument("scenario: duplicate content ids");
}

std::vector<int> rank_holders(const RateMatrix& rates, const std::vector<int>& requesters, HolderSelection selection,
                              int depth, Rng& rng)
{
    const int nodes = rates.size();
    std::vector<char> is_req(static_cast<std::size_t>(nodes), 0);
    for (int j : requesters)
        is_req[static_cast<std::size_t>(j)] = 1;
    std::vector<int> candidates;
    candidates.reserve(static_cast<std::size_t>(nodes) - requesters.size());
    for (int i = 0; i < nodes; ++i)
        if (!is_req[static_cast<std::size_t>(i)])
            candidates.push_back(i);
    depth = std::min(depth, static_cast<int>(candidates.size()));
    if (depth < 0)
        throw std::invalid_argument("holder ranking depth must be >= 0");

    if (selection == HolderSelection::UniformRandom) {
        for (int k = 0; k < depth; ++k) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), candidates.size() - 1);
            std::swap(candidates[static_cast<std::size_t>(k)], candidates[pick(rng)]);
        }
        candidates.resize(static_cast<std::size_t>(depth));
        return candidates;
    }

    // Weighted sampling without replacement (exponential keys): node i gets
    // key -ln(u) / w_i with w_i = prod_j lambda_ij; smallest keys win. Kept
    // in log space since the product under- or overflows quickly.
    std::vector<std::pair<double, int>> keyed;
    keyed.reserve(candidates.size());
    for (int i : candidates) {
        double log_w = 0.0;
        for (int j : requesters)
            log_w += std::log(rates(i, j));
        keyed.emplace_back(std::log(-std::log(rng.uniform())) - log_w, i);
    }
    std::partial_sort(keyed.begin(), keyed.begin() + depth, keyed.end());
    std::vector<int> out(static_cast<std::size_t>(depth));
    for (int k = 0; k < depth; ++k)
        out[static_cast<std::size_t>(k)] = keyed[static_cast<std::size_t>(k)].second;
    return out;
}

Scenario build_scenario(const RateModel& rates, const PopularityModel& pop, const AvailabilityRule& rule, int nodes,
                        int contents, std::uint64_t seed, const BuildOptions& options)
{
    if (nodes < 2)
        throw std::invalid_argument("scenario: N must be >= 2");
    if (contents < 1)
        throw std::invalid_argument("scenario: M must be >= 1");
    if (pop.n_max() > nodes)
        throw std::invalid_argument("scenario: popularity support exceeds N");

    Scenario scn;
    scn.nodes = nodes;
    scn.rates = RateMatrix::procedural(rates, nodes, derive_seed(seed, {0}));
    scn.protocol = options.protocol;
    scn.contact_law = options.contact_law;
    scn.t0 = options.t0;

    std::vector<std::size_t> strata(static_cast<std::size_t>(contents));
    std::iota(strata.begin(), strata.end(), 0);
    if (options.sampling == PopularitySampling::Stratified) {
        Rng shuffle_rng(derive_seed(seed, {2}));
        std::shuffle(strata.begin(), strata.end(), shuffle_rng);
    }

    std::vector<int> pool(static_cast<std::size_t>(nodes));
    scn.contents.resize(static_cast<std::size_t>(contents));
    for (int c = 0; c < contents; ++c) {
        Rng rng(derive_seed(seed, {1, static_cast<std::uint64_t>(c)}));
        double u = options.sampling == PopularitySampling::Stratified
                       ? (static_cast<double>(strata[static_cast<std::size_t>(c)]) + rng.uniform()) / contents
                       : rng.uniform();
        int n = pop.quantile(u);
        int m = rule.sample(n, rng);
        for (int tries = 0; n + m > nodes; ++tries) {
            if (tries >= options.max_retries)
                throw std::runtime_error("scenario: could not fit requesters and holders into N nodes for content "
                                         + std::to_string(c));
            n = pop.quantile(rng.uniform());
            m = rule.sample(n, rng);
        }

        auto& spec = scn.contents[static_cast<std::size_t>(c)];
        spec.id = c;
        std::iota(pool.begin(), pool.end(), 0);
        for (int k = 0; k < n; ++k) {
            std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), pool.size() - 1);
            std::swap(pool[static_cast<std::size_t>(k)], pool[pick(rng)]);
        }
        spec.requesters.assign(pool.begin(), pool.begin() + n);
        const int depth = options.ranking_depth > 0 ? std::max(options.ranking_depth, m) : m;
        spec.holder_ranking = rank_holders(scn.rates, spec.requesters, options.selection, depth, rng);
        spec.holders.assign(spec.holder_ranking.begin(), spec.holder_ranking.begin() + m);
    }
    scn.validate();
    return scn;
}

void assign_holder_counts(Scenario& scn, const std::vector<int>& counts)
{
    if (counts.size() != scn.contents.size())
        throw std::invalid_argument("holder counts: one count per content required");
    for (std::size_t c = 0; c < counts.size(); ++c) {
        auto& spec = scn.contents[c];
        if (counts[c] < 0 || counts[c] > static_cast<int>(spec.holder_ranking.size()))
            throw std::invalid_argument("holder counts: content " + std::to_string(spec.id) + " asks for "
                                        + std::to_string(counts[c]) + " holders, ranking has "
                                        + std::to_string(spec.holder_ranking.size()));
        spec.holders.assign(spec.holder_ranking.begin(), spec.holder_ranking.begin() + counts[c]);
    }
}

// ---------------------------------------------------------------------------
// Simulation

namespace {

std::vector<std::size_t> request_offsets(const Scenario& scn)
{
    std::vector<std::size_t> off(scn.contents.size() + 1, 0);
    for (std::size_t c = 0; c < scn.contents.size(); ++c)
        off[c + 1] = off[c] + scn.contents[c].requesters.size();
    return off;
}

void check_options(const SimOptions& o)
{
    if (o.replications < 1)
        throw std::invalid_argument("simulation: replications must be >= 1");
    if (!(o.horizon > 0.0))
        throw std::invalid_argument("simulation: horizon must be > 0");
}

DeliveryRecord make_record(const ContentSpec& c, int requester, int rep, double delay, double horizon)
{
    DeliveryRecord r;
    r.content = c.id;
    r.requester = requester;
    r.replication = rep;
    r.popularity = c.popularity();
    r.availability = c.availability();
    r.no_holders = c.holders.empty();
    r.delay = delay;
    if (!(delay <= horizon) || !std::isfinite(delay)) {
        r.delay = horizon;
        r.censored = true;
    }
    return r;
}

} // namespace

std::vector<DeliveryRecord> simulate_static(const Scenario& scn, const SimOptions& options)
{
    check_options(options);
    scn.validate();
    if (scn.protocol.kind != Protocol::Kind::Static)
        throw std::invalid_argument("simulate_static: scenario protocol is not static");

    const auto offsets = request_offsets(scn);
    const std::size_t per_rep = offsets.back();
    std::vector<DeliveryRecord> out(per_rep * static_cast<std::size_t>(options.replications));
    const bool pareto = scn.contact_law == ContactLaw::ParetoRenewal;

    parallel_for(scn.contents.size(), options.threads, [&](std::size_t c) {
        const auto& spec = scn.contents[c];
        std::vector<double> params(spec.holders.size());
        for (std::size_t k = 0; k < spec.requesters.size(); ++k) {
            const int j = spec.requesters[k];
            for (std::size_t h = 0; h < spec.holders.size(); ++h)
                params[h] = scn.rates(spec.holders[h], j);
            for (int rep = 0; rep < options.replications; ++rep) {
                Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(rep), c, k}));
                double delay = std::numeric_limits<double>::infinity();
                for (double p : params) {
                    // exponential residual, or Pareto residual by inverse CDF
                    const double t = pareto ? scn.t0 * (std::pow(rng.uniform(), -1.0 / p) - 1.0)
                                            : -std::log(rng.uniform()) / p;
                    delay = std::min(delay, t);
                }
                out[static_cast<std::size_t>(rep) * per_rep + offsets[c] + k] =
                    make_record(spec, j, rep, delay, options.horizon);
            }
        }
    });
    return out;
}

std::vector<DeliveryRecord> simulate_multihop(const Scenario& scn, const SimOptions& options,
                                              std::vector<HolderLog>* logs)
{
    check_options(options);
    scn.validate();
    if (scn.protocol.kind != Protocol::Kind::MultiHop)
        throw std::invalid_argument("simulate_multihop: scenario protocol is not multi-hop");

    const auto offsets = request_offsets(scn);
    const std::size_t per_rep = offsets.back();
    const std::size_t contents = scn.contents.size();
    std::vector<DeliveryRecord> out(per_rep * static_cast<std::size_t>(options.replications));
    if (logs)
        logs->assign(contents * static_cast<std::size_t>(options.replications), {});
    const double p = scn.protocol.cooperation;
    const double limit = scn.protocol.limit;

    parallel_for(contents * static_cast<std::size_t>(options.replications), options.threads, [&](std::size_t item) {
        const std::size_t rep = item / contents;
        const std::size_t c = item % contents;
        const auto& spec = scn.contents[c];
        const std::size_t n = spec.requesters.size();
        Rng rng(derive_seed(options.seed, {rep, c}));

        // x[k]: total rate from requester k to the current holders
        std::vector<double> x(n, 0.0);
        for (std::size_t k = 0; k < n; ++k)
            for (int h : spec.holders)
                x[k] += scn.rates(h, spec.requesters[k]);
        std::vector<double> delay(n, std::numeric_limits<double>::infinity());
        std::vector<char> waiting(n, 1);

        HolderLog* log = logs ? &(*logs)[item] : nullptr;
        if (log) {
            log->content = spec.id;
            log->replication = static_cast<int>(rep);
            log->initial = spec.availability();
        }

        int holders = spec.availability();
        double created = 0.0;
        double t = 0.0;
        for (std::size_t remaining = n; remaining > 0; --remaining) {
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k)
                if (waiting[k])
                    total += x[k];
            if (!(total > 0.0))
                break;
            t += -std::log(rng.uniform()) / total;
            if (t > options.horizon)
                break;
            const double target = rng.uniform() * total;
            std::size_t served = n;
            double acc = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                if (!waiting[k] || x[k] <= 0.0)
                    continue;
                served = k;
                acc += x[k];
                if (acc >= target)
                    break;
            }
            waiting[served] = 0;
            delay[served] = t;

            const bool accept = created < limit && (p >= 1.0 || rng.uniform() < p);
            if (accept) {
                created += 1.0;
                ++holders;
                for (std::size_t k = 0; k < n; ++k)
                    if (waiting[k])
                        x[k] += scn.rates(spec.requesters[served], spec.requesters[k]);
            }
            if (log) {
                log->times.push_back(t);
                log->holders.push_back(holders);
                log->accepted.push_back(accept ? 1 : 0);
            }
        }
        for (std::size_t k = 0; k < n; ++k)
            out[rep * per_rep + offsets[c] + k] =
                make_record(spec, spec.requesters[k], static_cast<int>(rep), delay[k], options.horizon);
    });
    return out;
}

double alternating_hazard_inverse(double e, double x1, double x2, double window, int start_window)
{
    const double r0 = start_window == 0 ? x1 : x2;
    const double r1 = start_window == 0 ? x2 : x1;
    if (!std::isfinite(window))
        return r0 > 0.0 ? e / r0 : std::numeric_limits<double>::infinity();
    const double cycle = (x1 + x2) * window;
    if (!(cycle > 0.0))
        return std::numeric_limits<double>::infinity();
    const double cycles = std::floor(e / cycle);
    double rem = e - cycles * cycle;
    double t = cycles * 2.0 * window;
    if (rem < r0 * window)
        return t + rem / r0;
    rem -= r0 * window;
    return t + window + rem / r1;
}

std::vector<DeliveryRecord> simulate_temporal(const Scenario& scn, double window_length, int start_window,
                                              const SimOptions& options)
{
    check_options(options);
    scn.validate();
    if (!scn.second_window)
        throw std::invalid_argument("simulate_temporal: scenario has no second-window rates");
    if (!(window_length > 0.0))
        throw std::invalid_argument("simulate_temporal: window length must be > 0");
    if (start_window != 0 && start_window != 1)
        throw std::invalid_argument("simulate_temporal: start window must be 0 or 1");
    if (scn.contact_law != ContactLaw::Exponential || scn.protocol.kind != Protocol::Kind::Static)
        throw std::invalid_argument("simulate_temporal: needs exponential contacts and the static protocol");

    const auto offsets = request_offsets(scn);
    const std::size_t per_rep = offsets.back();
    std::vector<DeliveryRecord> out(per_rep * static_cast<std::size_t>(options.replications));

    // The first contact with any holder is the first event of a
    // piecewise-constant Poisson stream of rate X^(1) or X^(2); it is drawn
    // by inverting the cumulative hazard at one unit-exponential variate.
    parallel_for(scn.contents.size(), options.threads, [&](std::size_t c) {
        const auto& spec = scn.contents[c];
        for (std::size_t k = 0; k < spec.requesters.size(); ++k) {
            const int j = spec.requesters[k];
            double x1 = 0.0, x2 = 0.0;
            for (int h : spec.holders) {
                x1 += scn.rates(h, j);
                x2 += (*scn.second_window)(h, j);
            }
            for (int rep = 0; rep < options.replications; ++rep) {
                Rng rng(derive_seed(options.seed, {static_cast<std::uint64_t>(rep), c, k}));
                const double e = -std::log(rng.uniform());
                const double delay = alternating_hazard_inverse(e, x1, x2, window_length, start_window);
                out[static_cast<std::size_t>(rep) * per_rep + offsets[c] + k] =
                    make_record(spec, j, rep, delay, options.horizon);
            }
        }
    });
    return out;
}

// ---------------------------------------------------------------------------
// Trace replay

std::vector<DeliveryRecord> replay_trace(const ContactTrace& trace, const std::vector<ContentSpec>& contents,
                                         const Protocol& protocol, std::uint64_t seed)
{
    std::vector<DeliveryRecord> out;
    const bool spread = protocol.kind == Protocol::Kind::MultiHop;
    for (std::size_t c = 0; c < contents.size(); ++c) {
        const auto& spec = contents[c];
        std::vector<char> holder(static_cast<std::size_t>(trace.nodes), 0);
        std::vector<int> slot(static_cast<std::size_t>(trace.nodes), -1);
        for (int h : spec.holders) {
            if (h < 0 || h >= trace.nodes)
                throw std::invalid_argument("trace replay: holder id outside the trace");
            holder[static_cast<std::size_t>(h)] = 1;
        }
        for (std::size_t k = 0; k < spec.requesters.size(); ++k) {
            const int j = spec.requesters[k];
            if (j < 0 || j >= trace.nodes || holder[static_cast<std::size_t>(j)])
                throw std::invalid_argument("trace replay: bad requester id");
            slot[static_cast<std::size_t>(j)] = static_cast<int>(k);
        }
        std::vector<double> delay(spec.requesters.size(), std::numeric_limits<double>::infinity());
        std::size_t remaining = spec.requesters.size();
        double created = 0.0;
        Rng rng(derive_seed(seed, {c}));

        auto serve = [&](int from, int to, double t) {
            const auto f = static_cast<std::size_t>(from), d = static_cast<std::size_t>(to);
            if (!holder[f] || slot[d] < 0)
                return;
            delay[static_cast<std::size_t>(slot[d])] = t - trace.start;
            slot[d] = -1;
            --remaining;
            if (spread && created < protocol.limit && (protocol.cooperation >= 1.0 || rng.uniform() < protocol.cooperation)) {
                holder[d] = 1;
                created += 1.0;
            }
        };
        for (const auto& ev : trace.events) {
            if (remaining == 0)
                break;
            serve(ev.a, ev.b, ev.t);
            serve(ev.b, ev.a, ev.t);
        }
        for (std::size_t k = 0; k < spec.requesters.size(); ++k)
            out.push_back(make_record(spec, spec.requesters[k], 0, delay[k], trace.duration));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Estimation

namespace {

constexpr double z95 = 1.959963984540054;

// Clustered mean: clusters hold (sum of values, count).
Interval clustered_mean(const std::vector<std::pair<double, double>>& clusters)
{
    double total = 0.0, count = 0.0;
    for (const auto& [s, n] : clusters) {
        total += s;
        count += n;
    }
    Interval out;
    if (count == 0.0)
        return out;
    const double mean = total / count;
    double v = 0.0;
    std::size_t used = 0;
    for (const auto& [s, n] : clusters) {
        if (n == 0.0)
            continue;
        v += (s - n * mean) * (s - n * mean);
        ++used;
    }
    const double g = static_cast<double>(used);
    const double se = g > 1.0 ? std::sqrt(v * g / (g - 1.0)) / count : 0.0;
    out.value = mean;
    out.std_error = se;
    out.ci_low = mean - z95 * se;
    out.ci_high = mean + z95 * se;
    return out;
}

// Wilson score interval on the design-effect sample size p(1-p)/se^2, which
// keeps the clustering but stays honest near 0 and 1 where the normal
// interval collapses. With p at 0 or 1 the cluster count is used.
Interval wilson(Interval p, std::size_t clusters)
{
    const double x = p.value;
    double n = static_cast<double>(clusters);
    if (x > 0.0 && x < 1.0 && p.std_error > 0.0)
        n = x * (1.0 - x) / (p.std_error * p.std_error);
    if (n <= 0.0)
        return p;
    const double z2 = z95 * z95;
    const double centre = (x + z2 / (2 * n)) / (1 + z2 / n);
    const double half = z95 / (1 + z2 / n) * std::sqrt(x * (1 - x) / n + z2 / (4 * n * n));
    p.ci_low = x == 0.0 ? 0.0 : std::max(0.0, centre - half);
    p.ci_high = x == 1.0 ? 1.0 : std::min(1.0, centre + half);
    return p;
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(10);
    os << x;
    return os.str();
}

} // namespace

std::string MetricsReport::mean_delay_text() const
{
    return mean_is_lower_bound ? "≥" + fmt(horizon) : fmt(mean_delay.value);
}

MetricsReport estimate_metrics(const std::vector<DeliveryRecord>& records, const std::vector<double>& ttls,
                               ClusterBy clusters)
{
    if (records.empty())
        throw std::invalid_argument("estimate_metrics: no records");

    std::unordered_map<std::uint64_t, std::size_t> index;
    std::vector<std::size_t> cluster_of(records.size());
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        const int second = clusters == ClusterBy::Run ? rec.replication : rec.requester;
        const std::uint64_t key = clusters == ClusterBy::Record
                                      ? r
                                      : (static_cast<std::uint64_t>(static_cast<std::uint32_t>(rec.content)) << 32)
                                            | static_cast<std::uint32_t>(second);
        const auto [it, inserted] = index.try_emplace(key, index.size());
        cluster_of[r] = it->second;
    }
    const std::size_t g = index.size();

    MetricsReport rep;
    rep.records = records.size();
    rep.ttls = ttls;

    std::vector<std::pair<double, double>> delays(g, {0.0, 0.0});
    std::size_t censored = 0;
    int max_rep = -1;
    std::map<int, std::pair<double, std::size_t>> class_sums;
    for (std::size_t r = 0; r < records.size(); ++r) {
        const auto& rec = records[r];
        max_rep = std::max(max_rep, rec.replication);
        auto& cls = rep.by_popularity[rec.popularity];
        cls.popularity = rec.popularity;
        ++cls.records;
        if (rec.censored) {
            ++censored;
            rep.horizon = std::max(rep.horizon, rec.delay);
            cls.censored_fraction += 1.0;
            continue;
        }
        delays[cluster_of[r]].first += rec.delay;
        delays[cluster_of[r]].second += 1.0;
        auto& cs = class_sums[rec.popularity];
        cs.first += rec.delay;
        ++cs.second;
    }
    for (auto& [n, cls] : rep.by_popularity) {
        const auto it = class_sums.find(n);
        if (it != class_sums.end() && it->second.second > 0)
            cls.mean_delay = it->second.first / static_cast<double>(it->second.second);
        else
            cls.mean_delay = std::numeric_limits<double>::infinity();
        cls.censored_fraction /= static_cast<double>(cls.records);
    }
    rep.replications = max_rep + 1;
    rep.censored_fraction = static_cast<double>(censored) / static_cast<double>(records.size());
    if (censored == records.size()) {
        rep.mean_is_lower_bound = true;
        rep.mean_delay = {rep.horizon, rep.horizon, std::numeric_limits<double>::infinity(), 0.0};
    } else {
        rep.mean_delay = clustered_mean(delays);
    }

    for (double ttl : ttls) {
        std::vector<std::pair<double, double>> hits(g, {0.0, 0.0});
        for (std::size_t r = 0; r < records.size(); ++r) {
            const auto& rec = records[r];
            hits[cluster_of[r]].first += (!rec.censored && rec.delay <= ttl) ? 1.0 : 0.0;
            hits[cluster_of[r]].second += 1.0;
        }
        rep.access_probability.push_back(wilson(clustered_mean(hits), g));
    }
    return rep;
}

double delay_quantile(const std::vector<DeliveryRecord>& records, double q)
{
    if (records.empty())
        throw std::invalid_argument("delay_quantile: no records");
    if (!(q >= 0.0 && q <= 1.0))
        throw std::invalid_argument("delay_quantile: q must lie in [0, 1]");
    std::vector<double> d;
    d.reserve(records.size());
    for (const auto& r : records)
        d.push_back(r.delay);
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(d.size() - 1)));
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    return d[k];
}

} // namespace oppnet
