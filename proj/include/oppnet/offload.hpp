#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "oppnet/analytic.hpp"
#include "oppnet/models.hpp"
#include "oppnet/sim.hpp"

namespace oppnet {

enum class PolicyKind { PowerLaw, Log, SqrtOptimal, Uniform, Random, QoSOptimal };

std::string to_string(PolicyKind kind);

/// A holder allocation with a mean budget of c_M copies per content.
struct AllocationPolicy {
    PolicyKind kind = PolicyKind::Uniform;
    double budget = 0.0;
    double exponent = 0.0; // PowerLaw
    double ttl = 0.0;      // QoSOptimal
    /// rho_n per popularity value (empty for Random).
    std::map<int, double> table;
    /// Random only: copies per content, summing to M * c_M.
    std::vector<int> counts;

    std::string name() const;
    /// E_p[rho(n)] under `pop` (the realized mean copies for Random).
    double mean_copies(const PopularityModel& pop) const;
    /// The holder law the policy induces, for the analytic path.
    AvailabilityRule as_rule() const;
};

/// rho*(n) = c_M sqrt(n) / E_p[sqrt(n)].
AllocationPolicy sqrt_allocation(const PopularityModel& pop, double budget);

struct QosDiagnostics {
    double multiplier = 0.0;
    double objective = 0.0;
    std::vector<int> active;
    int iterations = 0;
};

/// Maximizes the offloading ratio: minimizes sum_n n exp(-rho_n mu ttl) P_p(n)
/// subject to E_p[rho] = c_M and rho >= 0.
AllocationPolicy qos_allocation(const PopularityModel& pop, double mu_lambda, double ttl, double budget,
                                QosDiagnostics* diagnostics = nullptr);

/// sum_n n exp(-rho_n mu ttl) P_p(n), the quantity qos_allocation minimizes.
double qos_objective(const PopularityModel& pop, const std::map<int, double>& table, double mu_lambda, double ttl);

/// Random needs the content count and a seed; the others ignore them.
AllocationPolicy baseline_allocation(PolicyKind kind, const PopularityModel& pop, double budget, double exponent = 0.0,
                                     int contents = 0, std::uint64_t seed = 0);

/// Integer holder counts per content. Deterministic tables are rounded
/// systematically: one uniform offset over the running sum, so each count
/// has the table value as its mean and the total is the rounded sum.
std::vector<int> realize_counts(const AllocationPolicy& policy, const std::vector<int>& popularities,
                                std::uint64_t seed);

/// Largest-remainder rounding of non-negative weights to integers summing to `total`.
std::vector<int> integer_targets(const std::vector<double>& weights, int total);

/// The popularity mix of a realized content set.
PopularityModel empirical_popularity(const Scenario& scn);

// ---------------------------------------------------------------------------
// Evaluation

struct OffloadInputs {
    RateModel rates = RateModel::gamma(1.0, 1.0);
    PopularityModel popularity = PopularityModel::degenerate(1);
    int nodes = 100;
    int contents = 50;
    std::uint64_t seed = 1;
    int replications = 20;
    unsigned threads = 0;
};

enum class Via { Analytic, Simulation };

/// The scenario every policy is evaluated on: contents, requesters and
/// holder rankings are fixed by the seed, so policies differ only in how
/// many of the ranked holders they use.
Scenario offload_scenario(const OffloadInputs& inputs);

/// R_off = P{T <= ttl}. The analytic path uses the unrounded table.
Interval evaluate_offloading(const AllocationPolicy& policy, const OffloadInputs& inputs, double ttl, Via via);

/// Simulated R_off and mean delay of a policy on a prepared scenario.
struct PolicyOutcome {
    std::string policy;
    Interval offloading;
    Interval mean_delay;
    int copies = 0;
};

/// Request clustering treats the scenario's requests as a sample of the
/// population; Record clustering conditions on the scenario itself.
PolicyOutcome simulate_policy(const AllocationPolicy& policy, const Scenario& base, double ttl, int replications,
                              std::uint64_t seed, unsigned threads = 0, ClusterBy clusters = ClusterBy::Request);

// ---------------------------------------------------------------------------
// Popularity-blind allocation

struct BlindOptions {
    double budget = 1.0;
    /// Deliveries between reallocations; 0 never reallocates.
    int update_every = 10;
    int replications = 20;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

struct TrajectoryPoint {
    int deliveries;
    double mean_delay;
};

struct BlindResult {
    Interval blind;
    Interval uniform;
    Interval sqrt_optimal;
    /// Running mean delay of delivered requests, averaged over replications.
    std::vector<TrajectoryPoint> trajectory;
    /// Estimated popularity per content at the end of replication 0.
    std::vector<int> final_estimates;
    int reallocations = 0;
};

/// Starts from c_M holders per content and estimates each content's
/// popularity from deliveries (initial estimate 1). Every `update_every`
/// deliveries holders are reallocated by the square-root rule over the
/// estimates; new holders are the next ranked nodes and releases drop the
/// most recently added. Uniform and full-knowledge square-root allocations
/// are run on the same scenario and seeds for comparison.
BlindResult run_popularity_blind(const OffloadInputs& inputs, const BlindOptions& options);

// ---------------------------------------------------------------------------
// Alternating contact windows

struct TemporalInputs {
    OffloadInputs base;        // base.rates is the first-window law
    RateModel second_rates = RateModel::gamma(5.0, 1.0);
    std::vector<double> windows;
    double ttl = 1.0;
    double budget = 1.0;
};

struct TemporalRow {
    double window;
    Interval optimal_average;
    Interval optimal_window_based;
    Interval log_policy;
};

/// Optimal (average) solves the QoS problem with the mean of both window
/// rates, Optimal (window-based) with the rate of the window in which the
/// distribution starts, Log ignores mobility. Half of the runs start in
/// each window.
std::vector<TemporalRow> temporal_offload_experiment(const TemporalInputs& inputs);

} // namespace oppnet
