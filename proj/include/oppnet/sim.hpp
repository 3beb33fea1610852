#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "oppnet/models.hpp"

namespace oppnet {

// ---------------------------------------------------------------------------
// Network instance

/// Symmetric pairwise parameters. For exponential contacts an entry is the
/// rate lambda_ij; for Pareto renewal contacts it is the shape alpha_ij.
///
/// The procedural form draws each pair from a RateModel on demand with a
/// seed derived from (seed, i, j), so large N costs no memory and every
/// lookup is reproducible.
class RateMatrix {
public:
    static RateMatrix procedural(RateModel model, int nodes, std::uint64_t seed);
    /// Throws unless symmetric with positive off-diagonal entries.
    static RateMatrix dense(Eigen::MatrixXd values);

    int size() const { return nodes_; }
    double operator()(int i, int j) const;
    bool is_dense() const { return dense_.size() > 0; }
    /// The generating law, if procedural.
    const std::optional<RateModel>& model() const { return model_; }
    std::uint64_t seed() const { return seed_; }

    Eigen::MatrixXd to_dense() const;

private:
    RateMatrix() = default;

    int nodes_ = 0;
    std::optional<RateModel> model_;
    std::uint64_t seed_ = 0;
    Eigen::MatrixXd dense_;
};

struct ContentSpec {
    int id = 0;
    std::vector<int> requesters;
    std::vector<int> holders;
    /// Non-requesters in selection order. holders is always a prefix, so
    /// allocations of different sizes share their common holders.
    std::vector<int> holder_ranking;

    int popularity() const { return static_cast<int>(requesters.size()); }
    int availability() const { return static_cast<int>(holders.size()); }
};

enum class ContactLaw { Exponential, ParetoRenewal };

struct Protocol {
    enum class Kind { Static, MultiHop };
    Kind kind = Kind::Static;
    /// Probability that a served requester becomes a holder.
    double cooperation = 1.0;
    /// Cap on holders created per content.
    double limit = std::numeric_limits<double>::infinity();

    static Protocol fixed() { return {}; }
    static Protocol multihop(double cooperation = 1.0, double limit = std::numeric_limits<double>::infinity())
    {
        return {Kind::MultiHop, cooperation, limit};
    }
};

struct Scenario {
    int nodes = 0;
    RateMatrix rates = RateMatrix::dense(Eigen::MatrixXd::Ones(2, 2));
    /// Second-window matrix for the alternating-windows variant.
    std::optional<RateMatrix> second_window;
    std::vector<ContentSpec> contents;
    Protocol protocol;
    ContactLaw contact_law = ContactLaw::Exponential;
    double t0 = 1.0; // Pareto scale

    int total_requests() const;
    /// Throws std::invalid_argument on any broken invariant.
    void validate() const;
};

enum class HolderSelection { UniformRandom, WeightedByProductOfRatesToRequesters };

enum class PopularitySampling {
    Iid,
    /// One popularity draw per stratum of [0, 1): each content keeps the
    /// P_p marginal while the empirical mix tracks P_p closely.
    Stratified,
};

struct BuildOptions {
    HolderSelection selection = HolderSelection::UniformRandom;
    PopularitySampling sampling = PopularitySampling::Stratified;
    ContactLaw contact_law = ContactLaw::Exponential;
    double t0 = 1.0;
    Protocol protocol;
    /// Length of each holder ranking; 0 ranks only the holders drawn.
    int ranking_depth = 0;
    int max_retries = 1000;
};

Scenario build_scenario(const RateModel& rates, const PopularityModel& pop, const AvailabilityRule& rule, int nodes,
                        int contents, std::uint64_t seed, const BuildOptions& options = {});

/// Reassigns holders as a prefix of each content's ranking.
void assign_holder_counts(Scenario& scn, const std::vector<int>& counts);

/// Orders candidate holders for one content. Weighted selection ranks node i
/// by a draw proportional to prod_{j in requesters} lambda_ij.
std::vector<int> rank_holders(const RateMatrix& rates, const std::vector<int>& requesters, HolderSelection selection,
                              int depth, Rng& rng);

// ---------------------------------------------------------------------------
// Simulation

struct DeliveryRecord {
    int content = 0;
    int requester = 0;
    int replication = 0;
    int popularity = 0;
    int availability = 0;
    double delay = 0.0;
    bool censored = false;
    /// Content had no holder at all.
    bool no_holders = false;
};

struct SimOptions {
    int replications = 1;
    double horizon = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 1;
    /// 0 picks the hardware concurrency.
    unsigned threads = 0;
};

std::vector<DeliveryRecord> simulate_static(const Scenario& scn, const SimOptions& options);

/// Holder count after each delivery of one (replication, content) run.
struct HolderLog {
    int content = 0;
    int replication = 0;
    int initial = 0;
    std::vector<double> times;
    std::vector<int> holders;
    std::vector<char> accepted;
};

std::vector<DeliveryRecord> simulate_multihop(const Scenario& scn, const SimOptions& options,
                                              std::vector<HolderLog>* logs = nullptr);

/// Alternating windows of length `window_length`, starting at t = 0 in
/// window `start_window` (0 or 1). Requires scn.second_window.
std::vector<DeliveryRecord> simulate_temporal(const Scenario& scn, double window_length, int start_window,
                                              const SimOptions& options);

/// Time of the first event of a process whose rate alternates between x1
/// and x2 every `window` time units, for unit-exponential hazard `e`.
double alternating_hazard_inverse(double e, double x1, double x2, double window, int start_window);

// ---------------------------------------------------------------------------
// Trace replay

struct ContactEvent {
    double t;
    int a;
    int b;
};

struct ContactTrace {
    std::vector<ContactEvent> events; // non-decreasing in t, dense node ids
    int nodes = 0;
    double start = 0.0;
    double duration = 0.0;
    std::vector<std::string> original_ids;
};

/// Replays deliveries over recorded contacts; requests are issued at the
/// trace start. Multi-hop protocol honoured. Undelivered requests are
/// censored at the trace end.
std::vector<DeliveryRecord> replay_trace(const ContactTrace& trace, const std::vector<ContentSpec>& contents,
                                         const Protocol& protocol, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Estimation

struct Interval {
    double value = 0.0;
    double ci_low = 0.0;
    double ci_high = 0.0;
    double std_error = 0.0;
};

struct ClassSummary {
    int popularity = 0;
    std::size_t records = 0;
    double mean_delay = 0.0;
    double censored_fraction = 0.0;
};

struct MetricsReport {
    Interval mean_delay;
    /// True when every record was censored; mean_delay is then the horizon
    /// and only a lower bound.
    bool mean_is_lower_bound = false;
    double horizon = 0.0;
    std::vector<double> ttls;
    std::vector<Interval> access_probability;
    std::map<int, ClassSummary> by_popularity;
    int replications = 0;
    std::size_t records = 0;
    double censored_fraction = 0.0;

    std::string mean_delay_text() const;
};

/// How records are grouped for standard errors. Record treats every record
/// as independent. Request groups the replications of one (content,
/// requester); Run groups one (replication, content), whose requesters share
/// a history under multi-hop spreading.
enum class ClusterBy { Record, Request, Run };

/// Normal-approximation 95% intervals.
MetricsReport estimate_metrics(const std::vector<DeliveryRecord>& records, const std::vector<double>& ttls,
                               ClusterBy clusters = ClusterBy::Record);

/// Empirical quantile of all delays (censored ones at their horizon value).
double delay_quantile(const std::vector<DeliveryRecord>& records, double q);

} // namespace oppnet
