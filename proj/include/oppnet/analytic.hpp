#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "oppnet/models.hpp"

namespace oppnet {

/// A predicted value with the Monte Carlo standard error of its evaluation
/// (zero on closed-form paths).
struct Prediction {
    double value = 0.0;
    double std_error = 0.0;
};

/// Which holder-count law the formulas consume. Analytic keeps rho(n) real;
/// Realized uses the integer law that build_scenario draws from.
enum class HolderView { Analytic, Realized };

// ---------------------------------------------------------------------------
// Request-weighted laws

/// Size-biased popularity n*P_p(n)/E_p[n]. Power-law families keep their
/// family with the exponent lowered by one.
PopularityModel request_popularity(const PopularityModel& pop);

/// P_a^req(m) = E_p[n g(m|n)] / E_p[n].
DiscreteLaw request_availability(const PopularityModel& pop, const AvailabilityRule& rule,
                                 HolderView view = HolderView::Analytic);

struct RequestLaw {
    PopularityModel popularity_req;
    DiscreteLaw availability_req;
};

RequestLaw request_law(const PopularityModel& pop, const AvailabilityRule& rule,
                       HolderView view = HolderView::Analytic);

/// Mean holder count of class n under the chosen view.
double holder_mean(const AvailabilityRule& rule, int n, HolderView view);

// ---------------------------------------------------------------------------
// Law of X_M = sum of m i.i.d. draws

class AggregateRateLaw {
public:
    enum class Kind { ClosedGamma, Constant, MonteCarlo };

    static constexpr std::size_t default_pool = 100000;

    /// Closed form when the family allows it, otherwise a seeded sample pool.
    static AggregateRateLaw for_model(const RateModel& model, std::size_t pool = default_pool,
                                      std::uint64_t seed = 0x5eed);
    /// Forces the sample-pool path (useful to cross-check closed forms).
    static AggregateRateLaw monte_carlo(const RateModel& model, std::size_t pool = default_pool,
                                        std::uint64_t seed = 0x5eed);

    Kind kind() const { return kind_; }
    const RateModel& model() const { return model_; }
    std::size_t pool_size() const { return pool_; }

    /// E[X | m] = m * mu.
    double mean(double m) const { return m * model_.mean(); }

    /// E[h(X) | m] for every m in `ms`, in order. Non-integer m are
    /// interpolated linearly between the neighbouring integers on the
    /// sample-pool path; the closed paths accept real m directly.
    std::vector<Prediction> expectations(const std::vector<double>& ms, const std::function<double(double)>& h) const;

    /// E[1/X | m]. Throws InfiniteMoment when it diverges.
    std::vector<Prediction> inverse_means(const std::vector<double>& ms) const;
    /// E[exp(-t X) | m].
    std::vector<Prediction> laplace(const std::vector<double>& ms, double t) const;

    Prediction inverse_mean(double m) const { return inverse_means({m}).front(); }
    Prediction laplace(double m, double t) const { return laplace(std::vector<double>{m}, t).front(); }

private:
    AggregateRateLaw(Kind kind, RateModel model, std::size_t pool, std::uint64_t seed)
        : kind_(kind), model_(std::move(model)), pool_(pool), seed_(seed)
    {
    }

    std::vector<Prediction> pool_expectations(const std::vector<double>& ms,
                                              const std::function<double(double)>& h) const;
    // Smallest m for which E[1/X] is finite on the pool path.
    int min_finite_inverse_m() const;

    Kind kind_;
    RateModel model_;
    std::size_t pool_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Static availability: delay and access probability

Prediction expected_delay_exact(const PopularityModel& pop, const AvailabilityRule& rule, const AggregateRateLaw& agg,
                                HolderView view = HolderView::Analytic);

double expected_delay_bound(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                            HolderView view = HolderView::Analytic);

Prediction access_probability_exact(const PopularityModel& pop, const AvailabilityRule& rule,
                                    const AggregateRateLaw& agg, double ttl, HolderView view = HolderView::Analytic);

double access_probability_bound(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda, double ttl,
                                HolderView view = HolderView::Analytic);

// ---------------------------------------------------------------------------
// Closed forms for Gamma rates and Pareto(n0, 2) popularity

/// Delay under rho(n) = c*n. Requires CV^2/(c*n0) < 1.
double bp2_delay(double c, double n0, double mu, double cv);
/// Access probability under rho(n) = c*ln(n). Requires gamma > 1.
double bp2_probability(double c, double n0, double mu, double cv, double ttl);

struct Bp2ClosedForms {
    double delay;
    double probability;
};

Bp2ClosedForms bp2_closed_forms(double c, double n0, double mu, double cv, double ttl);

/// The same two quantities by direct quadrature over the continuous
/// popularity density 2*n0^2/n^3 on [n0, inf).
double bp2_delay_numeric(double c, double n0, double mu, double cv);
double bp2_probability_numeric(double c, double n0, double mu, double cv, double ttl);

// ---------------------------------------------------------------------------
// Growing availability (requesters become holders)

struct MultihopPrediction {
    double value = 0.0;
    /// Popularity classes where the spreading limit exceeded n and was clamped.
    int clamped_classes = 0;
};

inline constexpr double unlimited_spreading = std::numeric_limits<double>::infinity();

/// Mean delay when every served requester may become a holder with
/// probability `cooperation`, and at most `limit` new holders are created.
MultihopPrediction multihop_delay(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                                  double cooperation = 1.0, double limit = unlimited_spreading);

/// Harmonic-sum form sum_{k=m}^{m+n-1} 1/k (digamma for real m), averaged
/// over the holder law. Base protocol only.
double multihop_delay_harmonic(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                               HolderView view = HolderView::Analytic);

double harmonic_sum(double m, int n);

// ---------------------------------------------------------------------------
// Interest loss, biased holders, Pareto inter-contacts

/// Access probability times the survival of interest at ttl. Uses the bound
/// unless `exact` is given.
double delivery_probability_with_loss(const PopularityModel& pop, const AvailabilityRule& rule, double mu_lambda,
                                      double ttl, const std::function<double(double)>& loss_cdf,
                                      const AggregateRateLaw* exact = nullptr);

struct EffectiveRate {
    double value;
    std::string provenance;
};

/// E[lambda pi(lambda)] / E[pi(lambda)].
EffectiveRate effective_rate(const RateModel& rates, const std::function<double(double)>& pi,
                             std::string provenance = "custom");

struct ParetoMetrics {
    Prediction delay;
    Prediction probability;
    double delay_bound;
    double probability_bound;
};

/// `alpha_sum` is the aggregate law over the shape parameters alpha_ij.
ParetoMetrics pareto_metrics(const AggregateRateLaw& alpha_sum, double t0, const PopularityModel& pop,
                             const AvailabilityRule& rule, double ttl, HolderView view = HolderView::Analytic);

/// P{min residual > t} for holders with the given shapes: (t0/(t0+t))^sum.
double pareto_min_ccdf(const std::vector<double>& alphas, double t0, double t);

} // namespace oppnet
