#include "oppnet/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace oppnet {

namespace {

void require(bool ok, const std::string& message)
{
    if (!ok)
        throw std::invalid_argument(message);
}

bool finite_positive(double x) { return std::isfinite(x) && x > 0.0; }

// E[h(X)] = int_0^1 h(F^-1(u)) du. tanh-sinh copes with the integrable
// endpoint singularities that heavy tails produce.
double quantile_integral(const std::function<double(double)>& h, const std::function<double(double)>& inverse_cdf)
{
    boost::math::quadrature::tanh_sinh<double> integrator(15);
    auto f = [&](double u) { return h(inverse_cdf(u)); };
    return integrator.integrate(f, 0.0, 1.0, 1e-13);
}

std::string fmt(double x)
{
    std::ostringstream os;
    os.precision(12);
    os << x;
    return os.str();
}

} // namespace

// ---------------------------------------------------------------------------
// DiscreteLaw

double DiscreteLaw::mass(double value) const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i] == value)
            acc += probs[i];
    return acc;
}

double DiscreteLaw::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

double DiscreteLaw::mean() const
{
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        acc += values[i] * probs[i];
    return acc;
}

void DiscreteLaw::normalize_support()
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> v, p;
    for (std::size_t idx : order) {
        if (probs[idx] <= 0.0)
            continue;
        if (!v.empty() && v.back() == values[idx])
            p.back() += probs[idx];
        else {
            v.push_back(values[idx]);
            p.push_back(probs[idx]);
        }
    }
    values = std::move(v);
    probs = std::move(p);
}

// ---------------------------------------------------------------------------
// RateModel

std::string to_string(RateFamily family)
{
    switch (family) {
    case RateFamily::Gamma: return "gamma";
    case RateFamily::Pareto: return "pareto";
    case RateFamily::ParetoShape: return "pareto_shape";
    case RateFamily::Uniform: return "uniform";
    case RateFamily::Constant: return "constant";
    case RateFamily::Empirical: return "empirical";
    }
    return "?";
}

RateModel RateModel::gamma(double mean, double cv)
{
    require(finite_positive(mean), "gamma rates: mean must be > 0");
    require(std::isfinite(cv) && cv >= 0.0, "gamma rates: CV_lambda must be >= 0");
    return RateModel(Gamma{mean, cv});
}

RateModel RateModel::pareto(double scale, double shape)
{
    require(finite_positive(scale), "pareto rates: scale must be > 0");
    require(std::isfinite(shape) && shape > 1.0, "pareto rates: shape must be > 1 for a finite mean");
    return RateModel(Pareto{scale, shape});
}

RateModel RateModel::pareto_mean_cv(double mean, double cv)
{
    require(finite_positive(mean), "pareto rates: mean must be > 0");
    require(finite_positive(cv), "pareto rates: CV_lambda must be > 0");
    // CV^2 = 1 / (a (a - 2))  =>  a = 1 + sqrt(1 + 1/CV^2)
    const double shape = 1.0 + std::sqrt(1.0 + 1.0 / (cv * cv));
    return pareto(mean * (shape - 1.0) / shape, shape);
}

RateModel RateModel::pareto_shape(RateModel shape_law, double t0)
{
    require(finite_positive(t0), "pareto inter-contact: t0 must be > 0");
    require(shape_law.family() != RateFamily::ParetoShape, "pareto inter-contact: shape law cannot be nested");
    return RateModel(ParetoShape{std::make_shared<const RateModel>(std::move(shape_law)), t0});
}

RateModel RateModel::uniform(double low, double high)
{
    require(std::isfinite(low) && std::isfinite(high) && low >= 0.0 && high > low,
            "uniform rates: need 0 <= low < high");
    return RateModel(Uniform{low, high});
}

RateModel RateModel::constant(double value)
{
    require(finite_positive(value), "constant rate must be > 0");
    return RateModel(Constant{value});
}

RateModel RateModel::empirical(std::vector<double> values)
{
    require(!values.empty(), "empirical rates: no observations");
    for (double v : values)
        require(finite_positive(v), "empirical rates: observations must be > 0");
    return RateModel(Empirical{std::move(values)});
}

RateFamily RateModel::family() const { return static_cast<RateFamily>(params_.index()); }

double RateModel::mean() const
{
    struct {
        double operator()(const Gamma& g) const { return g.mean; }
        double operator()(const Pareto& p) const { return p.scale * p.shape / (p.shape - 1.0); }
        double operator()(const ParetoShape& p) const { return p.shape_law->mean() / p.t0; }
        double operator()(const Uniform& u) const { return 0.5 * (u.low + u.high); }
        double operator()(const Constant& c) const { return c.value; }
        double operator()(const Empirical& e) const
        {
            return std::accumulate(e.values.begin(), e.values.end(), 0.0) / static_cast<double>(e.values.size());
        }
    } visitor;
    return std::visit(visitor, params_);
}

double RateModel::variance() const
{
    struct {
        double operator()(const Gamma& g) const { return g.mean * g.mean * g.cv * g.cv; }
        double operator()(const Pareto& p) const
        {
            if (p.shape <= 2.0)
                throw InfiniteMoment("pareto rates: variance is infinite for shape <= 2");
            const double a = p.shape;
            return p.scale * p.scale * a / ((a - 1.0) * (a - 1.0) * (a - 2.0));
        }
        double operator()(const ParetoShape& p) const { return p.shape_law->variance() / (p.t0 * p.t0); }
        double operator()(const Uniform& u) const { return (u.high - u.low) * (u.high - u.low) / 12.0; }
        double operator()(const Constant&) const { return 0.0; }
        double operator()(const Empirical& e) const
        {
            const double n = static_cast<double>(e.values.size());
            const double m = std::accumulate(e.values.begin(), e.values.end(), 0.0) / n;
            double ss = 0.0;
            for (double v : e.values)
                ss += (v - m) * (v - m);
            return ss / n;
        }
    } visitor;
    return std::visit(visitor, params_);
}

bool RateModel::is_degenerate() const
{
    if (as_constant())
        return true;
    if (const auto* g = as_gamma())
        return g->cv == 0.0;
    if (const auto* p = as_pareto_shape())
        return p->shape_law->is_degenerate();
    if (const auto* e = as_empirical())
        return std::all_of(e->values.begin(), e->values.end(), [&](double v) { return v == e->values.front(); });
    return false;
}

double RateModel::sample(Rng& rng) const
{
    struct {
        Rng& rng;
        double operator()(const Gamma& g) const
        {
            if (g.cv == 0.0)
                return g.mean;
            const double k = 1.0 / (g.cv * g.cv);
            std::gamma_distribution<double> dist(k, g.mean / k);
            double x = 0.0;
            do
                x = dist(rng);
            while (!(x > 0.0));
            return x;
        }
        double operator()(const Pareto& p) const { return p.scale * std::pow(rng.uniform(), -1.0 / p.shape); }
        double operator()(const ParetoShape& p) const { return p.shape_law->sample(rng) / p.t0; }
        double operator()(const Uniform& u) const { return u.low + (u.high - u.low) * rng.uniform(); }
        double operator()(const Constant& c) const { return c.value; }
        double operator()(const Empirical& e) const
        {
            std::uniform_int_distribution<std::size_t> pick(0, e.values.size() - 1);
            return e.values[pick(rng)];
        }
    } visitor{rng};
    return std::visit(visitor, params_);
}

double RateModel::expectation(const std::function<double(double)>& h) const
{
    if (is_degenerate())
        return h(mean());
    if (const auto* g = as_gamma()) {
        const double k = 1.0 / (g->cv * g->cv);
        const double theta = g->mean / k;
        return quantile_integral(h, [=](double u) { return theta * boost::math::gamma_p_inv(k, u); });
    }
    if (const auto* p = as_pareto()) {
        return quantile_integral(h, [=](double u) { return p->scale * std::pow(1.0 - u, -1.0 / p->shape); });
    }
    if (const auto* p = as_pareto_shape()) {
        const double t0 = p->t0;
        return p->shape_law->expectation([&](double a) { return h(a / t0); });
    }
    if (const auto* u = as_uniform()) {
        return quantile_integral(h, [=](double q) { return u->low + (u->high - u->low) * q; });
    }
    const auto& values = as_empirical()->values;
    double acc = 0.0;
    for (double v : values)
        acc += h(v);
    return acc / static_cast<double>(values.size());
}

std::string RateModel::describe() const
{
    struct {
        std::string operator()(const Gamma& g) const { return "Gamma(mean=" + fmt(g.mean) + ", cv=" + fmt(g.cv) + ")"; }
        std::string operator()(const Pareto& p) const
        {
            return "Pareto(scale=" + fmt(p.scale) + ", shape=" + fmt(p.shape) + ")";
        }
        std::string operator()(const ParetoShape& p) const
        {
            return "ParetoShape(alpha~" + p.shape_law->describe() + ", t0=" + fmt(p.t0) + ")";
        }
        std::string operator()(const Uniform& u) const { return "Uniform(" + fmt(u.low) + ", " + fmt(u.high) + ")"; }
        std::string operator()(const Constant& c) const { return "Constant(" + fmt(c.value) + ")"; }
        std::string operator()(const Empirical& e) const
        {
            return "Empirical(" + std::to_string(e.values.size()) + " observations)";
        }
    } visitor;
    return std::visit(visitor, params_);
}

RateMoments rate_moments(const RateModel& model) { return {model.mean(), model.cv()}; }

std::vector<double> sample_rates(const RateModel& model, std::size_t count, std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<double> out(count);
    for (auto& x : out)
        x = model.sample(rng);
    return out;
}

// ---------------------------------------------------------------------------
// PopularityModel

std::string to_string(PopularityFamily family)
{
    switch (family) {
    case PopularityFamily::Zipf: return "zipf";
    case PopularityFamily::BoundedPareto: return "bounded_pareto";
    case PopularityFamily::Degenerate: return "degenerate";
    case PopularityFamily::Explicit: return "explicit";
    }
    return "?";
}

PopularityModel::PopularityModel(PopularityFamily family, double alpha, std::vector<int> support, Eigen::ArrayXd weights)
    : family_(family), alpha_(alpha), support_(std::move(support))
{
    require(!support_.empty(), "popularity: empty support");
    require(support_.front() >= 1, "popularity: support must be >= 1");
    const double total = weights.sum();
    require(std::isfinite(total) && total > 0.0, "popularity: weights must have positive finite sum");
    probs_ = weights / total;
    cdf_.resize(probs_.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs_.size(); ++i) {
        acc += probs_[i];
        cdf_[i] = acc;
    }
    cdf_[cdf_.size() - 1] = 1.0;
}

namespace {

Eigen::ArrayXd power_weights(double exponent, int n_min, int n_max)
{
    Eigen::ArrayXd w(n_max - n_min + 1);
    for (int n = n_min; n <= n_max; ++n)
        w[n - n_min] = std::pow(static_cast<double>(n), -exponent);
    return w;
}

std::vector<int> range(int lo, int hi)
{
    std::vector<int> out(static_cast<std::size_t>(hi - lo + 1));
    std::iota(out.begin(), out.end(), lo);
    return out;
}

} // namespace

PopularityModel PopularityModel::zipf(double alpha, int n_min, int n_max)
{
    require(std::isfinite(alpha), "zipf popularity: alpha must be finite");
    require(n_min >= 1 && n_max >= n_min, "zipf popularity: need 1 <= n_min <= n_max");
    return {PopularityFamily::Zipf, alpha, range(n_min, n_max), power_weights(alpha, n_min, n_max)};
}

PopularityModel PopularityModel::bounded_pareto(double alpha, int n_min, int n_max)
{
    require(std::isfinite(alpha), "bounded pareto popularity: alpha must be finite");
    require(n_min >= 1 && n_max >= n_min, "bounded pareto popularity: need 1 <= n_min <= n_max");
    return {PopularityFamily::BoundedPareto, alpha, range(n_min, n_max), power_weights(alpha + 1.0, n_min, n_max)};
}

PopularityModel PopularityModel::degenerate(int n)
{
    require(n >= 1, "degenerate popularity: n must be >= 1");
    return {PopularityFamily::Degenerate, 0.0, {n}, Eigen::ArrayXd::Ones(1)};
}

PopularityModel PopularityModel::explicit_pmf(const std::map<int, double>& weights)
{
    std::vector<int> support;
    std::vector<double> w;
    for (const auto& [n, p] : weights) {
        require(std::isfinite(p) && p >= 0.0, "explicit popularity: weights must be >= 0");
        if (p == 0.0)
            continue;
        support.push_back(n);
        w.push_back(p);
    }
    return {PopularityFamily::Explicit, 0.0, std::move(support),
            Eigen::Map<const Eigen::ArrayXd>(w.data(), static_cast<Eigen::Index>(w.size()))};
}

double PopularityModel::weight_exponent() const
{
    switch (family_) {
    case PopularityFamily::Zipf: return alpha_;
    case PopularityFamily::BoundedPareto: return alpha_ + 1.0;
    default: throw std::logic_error("popularity: no power-law exponent for this family");
    }
}

double PopularityModel::pmf(int n) const
{
    const auto it = std::lower_bound(support_.begin(), support_.end(), n);
    if (it == support_.end() || *it != n)
        return 0.0;
    return probs_[it - support_.begin()];
}

double PopularityModel::mean() const
{
    return expectation([](int n) { return static_cast<double>(n); });
}

int PopularityModel::quantile(double u) const
{
    const auto* begin = cdf_.data();
    const auto* end = begin + cdf_.size();
    const auto* it = std::lower_bound(begin, end, u);
    if (it == end)
        --it;
    return support_[static_cast<std::size_t>(it - begin)];
}

std::string PopularityModel::describe() const
{
    switch (family_) {
    case PopularityFamily::Zipf:
        return "Zipf(alpha=" + fmt(alpha_) + ", n in [" + std::to_string(n_min()) + "," + std::to_string(n_max()) + "])";
    case PopularityFamily::BoundedPareto:
        return "BoundedPareto(alpha=" + fmt(alpha_) + ", n in [" + std::to_string(n_min()) + ","
               + std::to_string(n_max()) + "])";
    case PopularityFamily::Degenerate: return "Degenerate(" + std::to_string(n_min()) + ")";
    case PopularityFamily::Explicit: return "Explicit(" + std::to_string(support_.size()) + " classes)";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Availability

double AvailabilityFunction::operator()(int n) const
{
    if (n < 1)
        throw std::domain_error("availability function: popularity must be >= 1");
    const double x = static_cast<double>(n);
    switch (form_) {
    case Form::Linear: return c_ * x;
    case Form::Power: return c_ * std::pow(x, k_);
    case Form::Log: return c_ * std::log(x);
    case Form::Sqrt: return c_ * std::sqrt(x);
    case Form::Table: {
        const auto it = table_.find(n);
        if (it == table_.end())
            throw std::domain_error("availability table has no entry for n=" + std::to_string(n));
        return it->second;
    }
    }
    return 0.0;
}

std::string AvailabilityFunction::describe() const
{
    switch (form_) {
    case Form::Linear: return fmt(c_) + "*n";
    case Form::Power: return fmt(c_) + "*n^" + fmt(k_);
    case Form::Log: return fmt(c_) + "*ln(n)";
    case Form::Sqrt: return fmt(c_) + "*sqrt(n)";
    case Form::Table: return "table(" + std::to_string(table_.size()) + " entries)";
    }
    return "?";
}

AvailabilityRule AvailabilityRule::deterministic(AvailabilityFunction rho)
{
    return {AvailabilityKind::Deterministic, std::move(rho), {}};
}

AvailabilityRule AvailabilityRule::binomial(AvailabilityFunction mean)
{
    return {AvailabilityKind::Binomial, std::move(mean), {}};
}

AvailabilityRule AvailabilityRule::uncorrelated(const std::map<int, double>& pmf)
{
    DiscreteLaw law;
    double total = 0.0;
    for (const auto& [m, p] : pmf) {
        require(m >= 0, "uncorrelated availability: m must be >= 0");
        require(std::isfinite(p) && p >= 0.0, "uncorrelated availability: probabilities must be >= 0");
        law.values.push_back(m);
        law.probs.push_back(p);
        total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, "uncorrelated availability: pmf must sum to 1");
    law.normalize_support();
    return {AvailabilityKind::Uncorrelated, AvailabilityFunction::linear(0.0), std::move(law)};
}

AvailabilityRule AvailabilityRule::with_node_cap(int cap) const
{
    require(cap >= 0, "availability: node cap must be >= 0");
    AvailabilityRule copy = *this;
    copy.cap_ = cap;
    return copy;
}

void AvailabilityRule::check_domain(int n) const
{
    if (n < 1)
        throw std::domain_error("availability: popularity n=" + std::to_string(n) + " outside [1, N]");
    if (kind_ == AvailabilityKind::Uncorrelated)
        return;
    const double v = fn_(n);
    if (!std::isfinite(v) || v < 0.0)
        throw std::domain_error("availability: rho(" + std::to_string(n) + ") is negative or not finite");
    if (kind_ == AvailabilityKind::Binomial && v > n)
        throw std::domain_error("binomial availability: mean exceeds trials at n=" + std::to_string(n));
}

double AvailabilityRule::analytic_mean(int n) const
{
    check_domain(n);
    if (kind_ == AvailabilityKind::Uncorrelated)
        return fixed_.mean();
    return fn_(n);
}

namespace {

DiscreteLaw binomial_law(int trials, double p)
{
    DiscreteLaw law;
    if (p <= 0.0)
        return DiscreteLaw::point(0.0);
    if (p >= 1.0)
        return DiscreteLaw::point(trials);
    const double lp = std::log(p), lq = std::log1p(-p);
    const double lt = std::lgamma(trials + 1.0);
    for (int m = 0; m <= trials; ++m) {
        const double lpmf = lt - std::lgamma(m + 1.0) - std::lgamma(trials - m + 1.0) + m * lp + (trials - m) * lq;
        const double pm = std::exp(lpmf);
        if (pm > 0.0) {
            law.values.push_back(m);
            law.probs.push_back(pm);
        }
    }
    const double total = law.total();
    for (auto& q : law.probs)
        q /= total;
    return law;
}

} // namespace

DiscreteLaw AvailabilityRule::analytic_law(int n) const
{
    check_domain(n);
    switch (kind_) {
    case AvailabilityKind::Deterministic: return DiscreteLaw::point(fn_(n));
    case AvailabilityKind::Binomial: return binomial_law(n, fn_(n) / n);
    case AvailabilityKind::Uncorrelated: return fixed_;
    }
    return {};
}

DiscreteLaw AvailabilityRule::realized_law(int n) const
{
    check_domain(n);
    DiscreteLaw law;
    switch (kind_) {
    case AvailabilityKind::Deterministic: law = DiscreteLaw::point(std::round(fn_(n))); break;
    case AvailabilityKind::Binomial: law = binomial_law(n, fn_(n) / n); break;
    case AvailabilityKind::Uncorrelated: law = fixed_; break;
    }
    const double cap = static_cast<double>(cap_);
    for (auto& v : law.values)
        v = std::clamp(v, 0.0, cap);
    law.normalize_support();
    return law;
}

double AvailabilityRule::pmf(int m, int n) const { return realized_law(n).mass(static_cast<double>(m)); }

double AvailabilityRule::mean(int n) const { return realized_law(n).mean(); }

int AvailabilityRule::sample(int n, Rng& rng) const
{
    check_domain(n);
    int m = 0;
    switch (kind_) {
    case AvailabilityKind::Deterministic: m = static_cast<int>(std::lround(fn_(n))); break;
    case AvailabilityKind::Binomial: {
        std::binomial_distribution<int> dist(n, fn_(n) / n);
        m = dist(rng);
        break;
    }
    case AvailabilityKind::Uncorrelated: {
        double u = rng.uniform(), acc = 0.0;
        m = static_cast<int>(fixed_.values.back());
        for (std::size_t i = 0; i < fixed_.values.size(); ++i) {
            acc += fixed_.probs[i];
            if (u <= acc) {
                m = static_cast<int>(fixed_.values[i]);
                break;
            }
        }
        break;
    }
    }
    return std::clamp(m, 0, cap_);
}

std::string AvailabilityRule::describe() const
{
    switch (kind_) {
    case AvailabilityKind::Deterministic: return "Deterministic(rho(n)=" + fn_.describe() + ")";
    case AvailabilityKind::Binomial: return "Binomial(mean(n)=" + fn_.describe() + ")";
    case AvailabilityKind::Uncorrelated: return "Uncorrelated(" + std::to_string(fixed_.values.size()) + " values)";
    }
    return "?";
}

double popularity_pmf(const PopularityModel& model, int n) { return model.pmf(n); }

double availability_pmf(const AvailabilityRule& rule, int m, int n) { return rule.pmf(m, n); }

double availability_mean(const AvailabilityRule& rule, int n) { return rule.mean(n); }

void check_rule_on_support(const AvailabilityRule& rule, const PopularityModel& pop)
{
    for (int n : pop.support())
        (void)rule.analytic_mean(n);
}

} // namespace oppnet
