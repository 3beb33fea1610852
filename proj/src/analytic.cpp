#include "oppnet/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>

namespace oppnet {

namespace {

double request_weighted(const PopularityModel& pop, const std::function<double(int)>& f)
{
    return pop.expectation([&](int n) { return n * f(n); }) / pop.mean();
}

double positive_gbar(const AvailabilityRule& rule, int n, HolderView view)
{
    const double g = holder_mean(rule, n, view);
    if (!(g > 0.0))
        throw InfiniteMoment("mean availability is zero at n=" + std::to_string(n));
    return g;
}

void require_no_empty_holders(const DiscreteLaw& law)
{
    for (std::size_t i = 0; i < law.values.size(); ++i)
        if (law.values[i] <= 0.0 && law.probs[i] > 0.0)
            throw InfiniteMoment("requests for contents without holders are never served");
}

// Lower end of the support of a rate law.
double support_min(const RateModel& model)
{
    if (model.is_degenerate())
        return model.mean();
    if (model.as_gamma())
        return 0.0;
    if (const auto* p = model.as_pareto())
        return p->scale;
    if (const auto* u = model.as_uniform())
        return u->low;
    if (const auto* p = model.as_pareto_shape())
        return support_min(*p->shape_law) / p->t0;
    const auto& v = model.as_empirical()->values;
    return *std::min_element(v.begin(), v.end());
}

} // namespace

// ---------------------------------------------------------------------------

double holder_mean(const AvailabilityRule& rule, int n, HolderView view)
{
    return view == HolderView::Analytic ? rule.analytic_mean(n) : rule.mean(n);
}

PopularityModel request_popularity(const PopularityModel& pop)
{
    switch (pop.family()) {
    case PopularityFamily::Zipf: return PopularityModel::zipf(pop.alpha() - 1.0, pop.n_min(), pop.n_max());
    case PopularityFamily::BoundedPareto:
        return PopularityModel::bounded_pareto(pop.alpha() - 1.0, pop.n_min(), pop.n_max());
    case PopularityFamily::Degenerate: return pop;
    case PopularityFamily::Explicit: break;
    }
    std::map<int, double> weights;
    const auto& support = pop.support();
    for (std::size_t i = 0; i < support.size(); ++i)
        weights[support[i]] = support[i] * pop.probabilities()[static_cast<Eigen::Index>(i)];
    return PopularityModel::explicit_pmf(weights);
}

DiscreteLaw request_availability(const PopularityModel& pop, const AvailabilityRule& rule, HolderView view)
{
    std::map<double, double> acc;
    const auto& support = pop.support();
    const double mean_n = pop.mean();
    for (std::size_t i = 0; i < support.size(); ++i) {
        const int n = support[i];
        const double w = n * pop.probabilities()[static_cast<Eigen::Index>(i)] / mean_n;
        const DiscreteLaw g = view == HolderView::Analytic ? rule.analytic_law(n) : rule.realized_law(n);
        for (std::size_t j = 0; j < g.values.size(); ++j)
            acc[g.values[j]] += w * g.probs[j];
    }
    DiscreteLaw law;
    for (const auto& [m, p] : acc) {
        if (p <= 0.0)
            continue;
        law.values.push_back(m);
        law.probs.push_back(p);
    }
    return law;
}

RequestLaw request_law(const PopularityModel& pop, const AvailabilityRule& rule, HolderView view)
{
    return {request_popularity(pop), request_availability(pop, rule, view)};
}

// ---------------------------------------------------------------------------
// AggregateRateLaw

AggregateRateLaw AggregateRateLaw::for_model(const RateModel& model, std::size_t pool, std::uint64_t seed)
{
    if (model.is_degenerate())
        return {Kind::Constant, model, pool, seed};
    if (model.as_gamma())
        return {Kind::ClosedGamma, model, pool, seed};
    return monte_carlo(model, pool, seed);
}

AggregateRateLaw AggregateRateLaw::monte_carlo(const RateModel& model, std::size_t pool, std::uint64_t seed)
{
    if (pool < 2)
        throw std::invalid_argument("aggregate rate law: sample pool needs at least 2 draws");
    return {Kind::MonteCarlo, model, pool, seed};
}

int AggregateRateLaw::min_finite_inverse_m() const
{
    if (const auto* g = model_.as_gamma()) {
        if (g->cv == 0.0)
            return 1;
        const double k = 1.0 / (g->cv * g->cv);
        return static_cast<int>(std::floor(1.0 / k)) + 1;
    }
    if (const auto* u = model_.as_uniform())
        return u->low > 0.0 ? 1 : 2;
    return 1;
}

std::vector<Prediction> AggregateRateLaw::pool_expectations(const std::vector<double>& ms,
                                                            const std::function<double(double)>& h) const
{
    int m_max = 0;
    for (double m : ms) {
        if (!std::isfinite(m) || m < 0.0)
            throw std::domain_error("aggregate rate law: holder count must be finite and >= 0");
        m_max = std::max(m_max, static_cast<int>(std::ceil(m)));
    }
    std::vector<char> needed(static_cast<std::size_t>(m_max) + 1, 0);
    for (double m : ms) {
        needed[static_cast<std::size_t>(std::floor(m))] = 1;
        needed[static_cast<std::size_t>(std::ceil(m))] = 1;
    }

    // Control variate: the centred sum d = S - m*mu has known mean zero.
    bool use_control = true;
    try {
        (void)model_.variance();
    } catch (const InfiniteMoment&) {
        use_control = false;
    }

    struct Acc {
        double sh = 0, sh2 = 0, sd = 0, sd2 = 0, shd = 0;
    };
    std::vector<Acc> acc(needed.size());
    const double mu = model_.mean();
    for (std::size_t r = 0; r < pool_; ++r) {
        Rng rng(derive_seed(seed_, {r}));
        double s = 0.0;
        for (int j = 1; j <= m_max; ++j) {
            s += model_.sample(rng);
            if (!needed[static_cast<std::size_t>(j)])
                continue;
            const double hv = h(s);
            const double d = s - j * mu;
            auto& a = acc[static_cast<std::size_t>(j)];
            a.sh += hv;
            a.sh2 += hv * hv;
            a.sd += d;
            a.sd2 += d * d;
            a.shd += hv * d;
        }
    }

    const double n = static_cast<double>(pool_);
    std::vector<Prediction> at(needed.size());
    at[0] = {h(0.0), 0.0};
    for (std::size_t j = 1; j < needed.size(); ++j) {
        if (!needed[j])
            continue;
        const auto& a = acc[j];
        const double mh = a.sh / n, md = a.sd / n;
        const double vh = std::max(0.0, a.sh2 / n - mh * mh);
        const double vd = a.sd2 / n - md * md;
        const double c = a.shd / n - mh * md;
        if (use_control && vd > 0.0) {
            const double beta = c / vd;
            at[j] = {mh - beta * md, std::sqrt(std::max(0.0, vh - c * c / vd) / (n - 1.0))};
        } else {
            at[j] = {mh, std::sqrt(vh / (n - 1.0))};
        }
    }

    std::vector<Prediction> out;
    out.reserve(ms.size());
    for (double m : ms) {
        const auto lo = static_cast<std::size_t>(std::floor(m));
        const auto hi = static_cast<std::size_t>(std::ceil(m));
        if (lo == hi) {
            out.push_back(at[lo]);
            continue;
        }
        const double f = m - std::floor(m);
        out.push_back({(1.0 - f) * at[lo].value + f * at[hi].value,
                       (1.0 - f) * at[lo].std_error + f * at[hi].std_error});
    }
    return out;
}

std::vector<Prediction> AggregateRateLaw::expectations(const std::vector<double>& ms,
                                                       const std::function<double(double)>& h) const
{
    if (kind_ == Kind::MonteCarlo)
        return pool_expectations(ms, h);
    std::vector<Prediction> out;
    out.reserve(ms.size());
    for (double m : ms) {
        if (!std::isfinite(m) || m < 0.0)
            throw std::domain_error("aggregate rate law: holder count must be finite and >= 0");
        if (m == 0.0 || kind_ == Kind::Constant) {
            out.push_back({h(m * model_.mean()), 0.0});
            continue;
        }
        // m-fold sum of Gamma(k, theta) is Gamma(m k, theta).
        const auto* g = model_.as_gamma();
        out.push_back({RateModel::gamma(m * g->mean, g->cv / std::sqrt(m)).expectation(h), 0.0});
    }
    return out;
}

std::vector<Prediction> AggregateRateLaw::inverse_means(const std::vector<double>& ms) const
{
    for (double m : ms)
        if (!(m > 0.0))
            throw InfiniteMoment("E[1/X] diverges with no holders");
    std::vector<Prediction> out;
    switch (kind_) {
    case Kind::Constant:
        for (double m : ms)
            out.push_back({1.0 / (m * model_.mean()), 0.0});
        return out;
    case Kind::ClosedGamma: {
        const auto* g = model_.as_gamma();
        const double k = 1.0 / (g->cv * g->cv);
        const double theta = g->mean / k;
        for (double m : ms) {
            if (m * k <= 1.0)
                throw InfiniteMoment("E[1/X] diverges: m*k = " + std::to_string(m * k) + " <= 1");
            out.push_back({1.0 / (theta * (m * k - 1.0)), 0.0});
        }
        return out;
    }
    case Kind::MonteCarlo: break;
    }
    const int m_min = min_finite_inverse_m();
    for (double m : ms)
        if (std::floor(m) < m_min)
            throw InfiniteMoment("E[1/X] diverges for m = " + std::to_string(m));
    return pool_expectations(ms, [](double x) { return 1.0 / x; });
}

std::vector<Prediction> AggregateRateLaw::laplace(const std::vector<double>& ms, double t) const
{
    if (!(t >= 0.0))
        throw std::domain_error("Laplace transform needs t >= 0");
    std::vector<Prediction> out;
    switch (kind_) {
    case Kind::Constant:
        for (double m : ms)
            out.push_back({std::exp(-m * model_.mean() * t), 0.0});
        return out;
    case Kind::ClosedGamma: {
        const auto* g = model_.as_gamma();
        const double k = 1.0 / (g->cv * g->cv);
        const double theta = g->mean / k;
        for (double m : ms)
            out.push_back({std::exp(-m * k * std::log1p(theta * t)), 0.0});
        return out;
    }
    case Kind::MonteCarlo: break;
    }
    return pool_expectations(ms, [t](double x) { return std::exp(-t * x); });
}

// ---------------------------------------------------------------------------
// Static availability

Prediction expected_delay_exact(const PopularityModel& pop, const AvailabilityRule& rule, const AggregateRateLaw& agg,
                                HolderView view)
{
    const DiscreteLaw law = request_availability(pop, rule, view);
    require_no_empty_holders(law);
    const auto inv = agg.inverse_means(law.values);
    Prediction out;
    for (std::size_t i = 0; i < inv.size(); ++i) {
        out.value += law.probs[i] * inv[i].value;
        // pool rows are shared across m, so errors add linearly
        out.std_error += law.probs[i] * inv[i].std_error;
    }
    return out;
}

double expected_delay_bound(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                            HolderView view)
{
    if (!(mu_lambda > 0.0))
        throw std::domain_error("mean contact rate must be > 0");
    return request_weighted(pop, [&](int n) { return 1.0 / positive_gbar(rule, n, view); }) / mu_lambda;
}

Prediction access_probability_exact(const PopularityModel& pop, const AvailabilityRule& rule,
                                    const AggregateRateLaw& agg, double ttl, HolderView view)
{
    if (!(ttl >= 0.0))
        throw std::domain_error("TTL must be >= 0");
    if (ttl == 0.0)
        return {0.0, 0.0};
    const DiscreteLaw law = request_availability(pop, rule, view);
    const auto lt = agg.laplace(law.values, ttl);
    Prediction out{1.0, 0.0};
    for (std::size_t i = 0; i < lt.size(); ++i) {
        out.value -= law.probs[i] * lt[i].value;
        out.std_error += law.probs[i] * lt[i].std_error;
    }
    out.value = std::clamp(out.value, 0.0, 1.0);
    return out;
}

double access_probability_bound(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda, double ttl,
                                HolderView view)
{
    if (!(ttl >= 0.0))
        throw std::domain_error("TTL must be >= 0");
    if (!(mu_lambda > 0.0))
        throw std::domain_error("mean contact rate must be > 0");
    return 1.0 - request_weighted(pop, [&](int n) { return std::exp(-holder_mean(rule, n, view) * mu_lambda * ttl); });
}

// ---------------------------------------------------------------------------
// Closed forms

double bp2_delay(double c, double n0, double mu, double cv)
{
    if (!(c > 0.0 && n0 > 0.0 && mu > 0.0 && cv >= 0.0))
        throw std::domain_error("closed-form delay: need c > 0, n0 > 0, mu > 0, CV >= 0");
    const double x = cv * cv / (c * n0);
    if (!(x < 1.0))
        throw std::domain_error("closed-form delay: requires CV^2/(c*n0) < 1");
    const double scale = 1.0 / (mu * c * n0);
    if (x < 1e-4) {
        // -ln(1-x)/x - 1 = sum_{k>=1} x^k/(k+1); keeps the CV -> 0 limit exact
        double term = 1.0, sum = 0.0;
        for (int j = 0; j < 8; ++j, term *= x)
            sum += term / (j + 2);
        return scale * sum;
    }
    return (1.0 / (mu * cv * cv)) * ((1.0 / x) * -std::log1p(-x) - 1.0);
}

double bp2_probability(double c, double n0, double mu, double cv, double ttl)
{
    if (!(c > 0.0 && n0 > 0.0 && mu > 0.0 && cv >= 0.0 && ttl >= 0.0))
        throw std::domain_error("closed-form probability: need c > 0, n0 > 0, mu > 0, CV >= 0, TTL >= 0");
    const double v = cv * cv;
    const double log_gamma = v == 0.0 ? mu * c * ttl : (c / v) * std::log1p(mu * v * ttl);
    if (!(log_gamma > 0.0))
        throw std::domain_error("closed-form probability: requires gamma > 1");
    return 1.0 - 1.0 / ((1.0 + log_gamma) * std::exp(log_gamma * std::log(n0)));
}

Bp2ClosedForms bp2_closed_forms(double c, double n0, double mu, double cv, double ttl)
{
    return {bp2_delay(c, n0, mu, cv), bp2_probability(c, n0, mu, cv, ttl)};
}

namespace {

// Request-weighted integral over the continuous Pareto(n0, 2) popularity.
double continuous_request_integral(double n0, const std::function<double(double)>& f)
{
    boost::math::quadrature::exp_sinh<double> integrator;
    auto pdf = [n0](double n) { return 2.0 * n0 * n0 / (n * n * n); };
    const double mean_n = integrator.integrate([&](double u) { return (n0 + u) * pdf(n0 + u); }, 0.0,
                                               std::numeric_limits<double>::infinity(), 1e-14);
    const double num = integrator.integrate([&](double u) { return (n0 + u) * pdf(n0 + u) * f(n0 + u); }, 0.0,
                                            std::numeric_limits<double>::infinity(), 1e-14);
    return num / mean_n;
}

} // namespace

double bp2_delay_numeric(double c, double n0, double mu, double cv)
{
    if (!(cv * cv / (c * n0) < 1.0))
        throw std::domain_error("closed-form delay: requires CV^2/(c*n0) < 1");
    const auto agg = AggregateRateLaw::for_model(RateModel::gamma(mu, cv));
    return continuous_request_integral(n0, [&](double n) { return agg.inverse_mean(c * n).value; });
}

double bp2_probability_numeric(double c, double n0, double mu, double cv, double ttl)
{
    const auto agg = AggregateRateLaw::for_model(RateModel::gamma(mu, cv));
    return 1.0 - continuous_request_integral(n0, [&](double n) { return agg.laplace(c * std::log(n), ttl).value; });
}

// ---------------------------------------------------------------------------
// Growing availability

MultihopPrediction multihop_delay(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                                  double cooperation, double limit)
{
    if (!(mu_lambda > 0.0))
        throw std::domain_error("mean contact rate must be > 0");
    if (!(cooperation > 0.0 && cooperation <= 1.0))
        throw std::domain_error("cooperation probability must lie in (0, 1]");
    if (!(limit >= 0.0))
        throw std::domain_error("spreading limit must be >= 0");
    const bool limited = std::isfinite(limit);
    if (limited && cooperation != 1.0)
        throw std::invalid_argument("multihop: combine either cooperation or a spreading limit, not both");

    MultihopPrediction out;
    const double mean_n = pop.mean();
    double acc = 0.0;
    const auto& support = pop.support();
    for (std::size_t i = 0; i < support.size(); ++i) {
        const int n = support[i];
        const double p_n = pop.probabilities()[static_cast<Eigen::Index>(i)];
        const double g = positive_gbar(rule, n, HolderView::Analytic);
        double term;
        if (limited) {
            double L = limit;
            if (L > n) {
                L = n;
                ++out.clamped_classes;
            }
            term = (n - L) / (g + L) + std::log1p(L / g);
        } else {
            term = std::log1p(cooperation * n / g) / cooperation;
        }
        acc += p_n * term;
    }
    out.value = acc / (mu_lambda * mean_n);
    return out;
}

double harmonic_sum(double m, int n)
{
    if (!(m > 0.0))
        throw InfiniteMoment("harmonic sum needs at least one holder");
    if (n < 0)
        throw std::domain_error("harmonic sum: n must be >= 0");
    return boost::math::digamma(m + n) - boost::math::digamma(m);
}

double multihop_delay_harmonic(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                               HolderView view)
{
    if (!(mu_lambda > 0.0))
        throw std::domain_error("mean contact rate must be > 0");
    const double e = pop.expectation([&](int n) {
        const DiscreteLaw g = view == HolderView::Analytic ? rule.analytic_law(n) : rule.realized_law(n);
        double s = 0.0;
        for (std::size_t j = 0; j < g.values.size(); ++j)
            s += g.probs[j] * harmonic_sum(g.values[j], n);
        return s;
    });
    return e / (mu_lambda * pop.mean());
}

// ---------------------------------------------------------------------------

double delivery_probability_with_loss(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                                      double ttl, const std::function<double(double)>& loss_cdf,
                                      const AggregateRateLaw* exact)
{
    const double loss = loss_cdf(ttl);
    if (!(loss >= 0.0 && loss <= 1.0))
        throw std::domain_error("interest-loss CDF must return values in [0, 1]");
    const double access =
        exact ? access_probability_exact(pop, rule, *exact, ttl).value : access_probability_bound(pop, rule, mu_lambda, ttl);
    return access * (1.0 - loss);
}

EffectiveRate effective_rate(const RateModel& rates, const std::function<double(double)>& pi, std::string provenance)
{
    const double den = rates.expectation(pi);
    if (!(den > 0.0) || !std::isfinite(den))
        throw std::domain_error("effective rate: E[pi(lambda)] must be positive and finite");
    const double num = rates.expectation([&](double x) { return x * pi(x); });
    return {num / den, std::move(provenance)};
}

ParetoMetrics pareto_metrics(const AggregateRateLaw& alpha_sum, double t0, const PopularityModel& pop,
                             const AvailabilityRule& rule, double ttl, HolderView view)
{
    if (!(t0 > 0.0))
        throw std::domain_error("pareto metrics: t0 must be > 0");
    if (!(ttl >= 0.0))
        throw std::domain_error("TTL must be >= 0");
    const DiscreteLaw law = request_availability(pop, rule, view);
    const double s = std::log1p(ttl / t0);
    const double mu_alpha = alpha_sum.model().mean();
    const double a_min = support_min(alpha_sum.model());

    ParetoMetrics out{};

    require_no_empty_holders(law);
    for (double m : law.values)
        if (m * a_min <= 1.0)
            throw InfiniteMoment("pareto metrics: shape sum can fall to 1 or below, mean delay is infinite");
    const auto inv = alpha_sum.expectations(law.values, [](double a) { return 1.0 / (a - 1.0); });
    for (std::size_t i = 0; i < inv.size(); ++i) {
        out.delay.value += t0 * law.probs[i] * inv[i].value;
        out.delay.std_error += t0 * law.probs[i] * inv[i].std_error;
    }

    if (s > 0.0) {
        const auto lt = alpha_sum.laplace(law.values, s);
        out.probability.value = 1.0;
        for (std::size_t i = 0; i < lt.size(); ++i) {
            out.probability.value -= law.probs[i] * lt[i].value;
            out.probability.std_error += law.probs[i] * lt[i].std_error;
        }
        out.probability.value = std::clamp(out.probability.value, 0.0, 1.0);
    }

    out.delay_bound = t0 * request_weighted(pop, [&](int n) {
        const double x = holder_mean(rule, n, view) * mu_alpha;
        if (x <= 1.0)
            throw InfiniteMoment("pareto delay bound: gbar(n)*mu_alpha <= 1 at n=" + std::to_string(n));
        return 1.0 / (x - 1.0);
    });
    out.probability_bound =
        1.0 - request_weighted(pop, [&](int n) { return std::exp(-holder_mean(rule, n, view) * mu_alpha * s); });
    return out;
}

double pareto_min_ccdf(const std::vector<double>& alphas, double t0, double t)
{
    if (!(t0 > 0.0) || !(t >= 0.0))
        throw std::domain_error("pareto CCDF: need t0 > 0 and t >= 0");
    double sum = 0.0;
    for (double a : alphas)
        sum += a;
    return std::pow(t0 / (t0 + t), sum);
}

} // namespace oppnet
