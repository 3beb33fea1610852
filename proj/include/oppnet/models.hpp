#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "oppnet/random.hpp"

namespace oppnet {

/// Raised when a requested moment or expectation diverges (variance of a
/// heavy-tailed law, E[1/X] with too few holders, an empty holder set).
class InfiniteMoment : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// A finite discrete law over real values, kept sorted by value.
struct DiscreteLaw {
    std::vector<double> values;
    std::vector<double> probs;

    static DiscreteLaw point(double value) { return {{value}, {1.0}}; }

    double mass(double value) const;
    double total() const;
    double mean() const;

    /// Merges equal values and drops zero-mass points.
    void normalize_support();
};

// ---------------------------------------------------------------------------
// Contact rates
// ---------------------------------------------------------------------------

enum class RateFamily { Gamma, Pareto, ParetoShape, Uniform, Constant, Empirical };

std::string to_string(RateFamily family);

/// Distribution f_lambda of pairwise contact rates.
///
/// Immutable value type. `Pareto` is a classic (type I) Pareto law over the
/// rates themselves; `ParetoShape` describes Pareto inter-contact times via
/// a law over the shape parameters alpha_ij and a common scale t0, with the
/// implied rate alpha_ij / t0.
class RateModel {
public:
    struct Gamma {
        double mean;
        double cv;
    };
    struct Pareto {
        double scale;
        double shape;
    };
    struct ParetoShape {
        std::shared_ptr<const RateModel> shape_law;
        double t0;
    };
    struct Uniform {
        double low;
        double high;
    };
    struct Constant {
        double value;
    };
    struct Empirical {
        std::vector<double> values;
    };

    static RateModel gamma(double mean, double cv);
    static RateModel pareto(double scale, double shape);
    /// Pareto rates matched to a mean and coefficient of variation (cv > 0).
    static RateModel pareto_mean_cv(double mean, double cv);
    static RateModel pareto_shape(RateModel shape_law, double t0);
    static RateModel uniform(double low, double high);
    static RateModel constant(double value);
    static RateModel empirical(std::vector<double> values);

    RateFamily family() const;

    double mean() const;
    /// Throws InfiniteMoment when the variance diverges.
    double variance() const;
    double cv() const { return std::sqrt(variance()) / mean(); }

    /// True when every draw equals the mean.
    bool is_degenerate() const;

    double sample(Rng& rng) const;

    /// E[h(lambda)] by exact summation (Constant, Empirical) or adaptive
    /// quadrature (continuous families).
    double expectation(const std::function<double(double)>& h) const;

    const Gamma* as_gamma() const { return std::get_if<Gamma>(&params_); }
    const Pareto* as_pareto() const { return std::get_if<Pareto>(&params_); }
    const ParetoShape* as_pareto_shape() const { return std::get_if<ParetoShape>(&params_); }
    const Uniform* as_uniform() const { return std::get_if<Uniform>(&params_); }
    const Constant* as_constant() const { return std::get_if<Constant>(&params_); }
    const Empirical* as_empirical() const { return std::get_if<Empirical>(&params_); }

    std::string describe() const;

private:
    using Params = std::variant<Gamma, Pareto, ParetoShape, Uniform, Constant, Empirical>;
    explicit RateModel(Params p) : params_(std::move(p)) {}

    Params params_;
};

struct RateMoments {
    double mean;
    double cv;
};

/// (mu_lambda, CV_lambda). Sample moments for Empirical. Throws
/// InfiniteMoment if the variance diverges.
RateMoments rate_moments(const RateModel& model);

/// `count` i.i.d. draws, reproducible for a fixed seed.
std::vector<double> sample_rates(const RateModel& model, std::size_t count, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Popularity
// ---------------------------------------------------------------------------

enum class PopularityFamily { Zipf, BoundedPareto, Degenerate, Explicit };

std::string to_string(PopularityFamily family);

/// P_p(n): fraction of contents with popularity n.
///
/// Zipf(alpha) weighs n^-alpha; BoundedPareto(alpha) is the discrete
/// counterpart of a Pareto density with shape alpha and weighs n^-(alpha+1).
/// Both live on [n_min, n_max].
class PopularityModel {
public:
    static PopularityModel zipf(double alpha, int n_min, int n_max);
    static PopularityModel bounded_pareto(double alpha, int n_min, int n_max);
    static PopularityModel degenerate(int n);
    /// Weights are normalized; they need not sum to one.
    static PopularityModel explicit_pmf(const std::map<int, double>& weights);

    PopularityFamily family() const { return family_; }
    double alpha() const { return alpha_; }
    /// Exponent of the n^-s weight (alpha for Zipf, alpha+1 for BoundedPareto).
    double weight_exponent() const;
    int n_min() const { return support_.front(); }
    int n_max() const { return support_.back(); }

    const std::vector<int>& support() const { return support_; }
    const Eigen::ArrayXd& probabilities() const { return probs_; }

    double pmf(int n) const;
    double mean() const;

    template <class F>
    double expectation(F&& h) const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i < support_.size(); ++i)
            acc += probs_[static_cast<Eigen::Index>(i)] * h(support_[i]);
        return acc;
    }

    int sample(Rng& rng) const { return quantile(rng.uniform()); }
    /// Smallest n with CDF(n) >= u.
    int quantile(double u) const;

    std::string describe() const;

private:
    PopularityModel(PopularityFamily family, double alpha, std::vector<int> support, Eigen::ArrayXd weights);

    PopularityFamily family_;
    double alpha_ = 0.0;
    std::vector<int> support_;
    Eigen::ArrayXd probs_;
    Eigen::ArrayXd cdf_;
};

// ---------------------------------------------------------------------------
// Availability
// ---------------------------------------------------------------------------

/// A named real function of popularity: c*n, c*n^k, c*ln(n), c*sqrt(n), or a table.
class AvailabilityFunction {
public:
    enum class Form { Linear, Power, Log, Sqrt, Table };

    static AvailabilityFunction linear(double c) { return {Form::Linear, c, 1.0, {}}; }
    static AvailabilityFunction power(double c, double k) { return {Form::Power, c, k, {}}; }
    static AvailabilityFunction log(double c) { return {Form::Log, c, 0.0, {}}; }
    static AvailabilityFunction sqrt(double c) { return {Form::Sqrt, c, 0.5, {}}; }
    static AvailabilityFunction table(std::map<int, double> values) { return {Form::Table, 1.0, 0.0, std::move(values)}; }

    double operator()(int n) const;

    Form form() const { return form_; }
    double c() const { return c_; }
    double k() const { return k_; }
    const std::map<int, double>& entries() const { return table_; }

    std::string describe() const;

private:
    AvailabilityFunction(Form f, double c, double k, std::map<int, double> t)
        : form_(f), c_(c), k_(k), table_(std::move(t))
    {
    }

    Form form_;
    double c_;
    double k_;
    std::map<int, double> table_;
};

enum class AvailabilityKind { Deterministic, Binomial, Uncorrelated };

/// g(m|n): law of the holder count given popularity.
///
/// Two views are exposed. The analytic view keeps rho(n) real-valued, as the
/// closed forms do. The realized view is the integer law used to build
/// scenarios: Deterministic rules place all mass on round(rho(n)) clamped to
/// [0, node_cap]; Binomial rules are Binomial(n, gbar(n)/n).
class AvailabilityRule {
public:
    static AvailabilityRule deterministic(AvailabilityFunction rho);
    static AvailabilityRule binomial(AvailabilityFunction mean);
    static AvailabilityRule uncorrelated(const std::map<int, double>& pmf);

    AvailabilityRule with_node_cap(int cap) const;

    AvailabilityKind kind() const { return kind_; }
    const AvailabilityFunction& function() const { return fn_; }
    int node_cap() const { return cap_; }

    /// gbar(n) with real-valued rho for Deterministic rules.
    double analytic_mean(int n) const;
    /// Law of m given n with real-valued rho for Deterministic rules.
    DiscreteLaw analytic_law(int n) const;

    /// Realized g(m|n). Throws std::domain_error for n outside the rule's domain.
    double pmf(int m, int n) const;
    /// Mean of the realized law.
    double mean(int n) const;
    /// Realized law as integer support.
    DiscreteLaw realized_law(int n) const;
    int sample(int n, Rng& rng) const;

    std::string describe() const;

private:
    AvailabilityRule(AvailabilityKind kind, AvailabilityFunction fn, DiscreteLaw fixed)
        : kind_(kind), fn_(std::move(fn)), fixed_(std::move(fixed))
    {
    }

    void check_domain(int n) const;

    AvailabilityKind kind_;
    AvailabilityFunction fn_;
    DiscreteLaw fixed_; // Uncorrelated pmf
    int cap_ = std::numeric_limits<int>::max();
};

double popularity_pmf(const PopularityModel& model, int n);
double availability_pmf(const AvailabilityRule& rule, int m, int n);
double availability_mean(const AvailabilityRule& rule, int n);

/// Throws std::domain_error if the rule is undefined somewhere on the support.
void check_rule_on_support(const AvailabilityRule& rule, const PopularityModel& pop);

} // namespace oppnet
