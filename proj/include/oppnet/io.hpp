#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "oppnet/analytic.hpp"
#include "oppnet/models.hpp"
#include "oppnet/sim.hpp"

namespace oppnet {

// ---------------------------------------------------------------------------
// Experiment configuration (grammar in docs/config.md)

struct RateSpec {
    std::string family; // gamma | pareto | uniform | constant | empirical
    double mean = 1.0;
    double cv = 1.0;
    double low = 0.0;
    double high = 1.0;
    double value = 1.0;
    std::vector<double> values;

    bool operator==(const RateSpec&) const = default;
};

struct PopularitySpec {
    std::string family; // zipf | bounded_pareto | degenerate | explicit
    double alpha = 1.0;
    int n_min = 1;
    int n_max = 1;
    int n = 1;
    std::map<int, double> pmf;

    bool operator==(const PopularitySpec&) const = default;
};

struct AvailabilitySpec {
    std::string kind; // deterministic | binomial | uncorrelated
    std::string form = "linear"; // linear | power | log | sqrt | table
    double c = 1.0;
    double k = 1.0;
    std::map<int, double> table;
    std::map<int, double> pmf; // uncorrelated

    bool operator==(const AvailabilitySpec&) const = default;
};

struct ScenarioSpec {
    int nodes = 0;
    int contents = 100;
    std::uint64_t seed = 1;
    int replications = 10;
    int threads = 0;
    double horizon = std::numeric_limits<double>::infinity();
    std::string selection = "uniform";     // uniform | weighted
    std::string sampling = "stratified";   // stratified | iid
    std::string contact_law = "exponential"; // exponential | pareto
    double t0 = 1.0;

    bool operator==(const ScenarioSpec&) const = default;
};

struct ProtocolSpec {
    std::string kind = "static"; // static | multihop
    double cooperation = 1.0;
    double limit = std::numeric_limits<double>::infinity();

    bool operator==(const ProtocolSpec&) const = default;
};

struct MetricsSpec {
    std::vector<double> ttl{1.0};
    std::string view = "analytic"; // analytic | realized
    int pool = 100000;

    bool operator==(const MetricsSpec&) const = default;
};

struct OffloadSpec {
    double budget = 2.0;
    /// qos, sqrt, log, uniform, random, power:<k>, blind
    std::vector<std::string> policies{"qos", "sqrt", "log", "uniform", "random"};
    int update_every = 10;

    bool operator==(const OffloadSpec&) const = default;
};

struct ValidateSpec {
    std::vector<int> nodes; // empty: scenario.nodes only

    bool operator==(const ValidateSpec&) const = default;
};

struct OutputSpec {
    std::string dir = "out";
    std::string results = "results.jsonl";
    std::string plot = "plot.csv";
    bool append = false;

    bool operator==(const OutputSpec&) const = default;
};

struct ExperimentConfig {
    RateSpec rates;
    PopularitySpec popularity;
    AvailabilitySpec availability;
    ScenarioSpec scenario;
    ProtocolSpec protocol;
    MetricsSpec metrics;
    OffloadSpec offload;
    ValidateSpec validate;
    OutputSpec output;

    bool operator==(const ExperimentConfig&) const = default;
};

/// Every problem found, one message per entry.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

/// `overrides` are "section.key" -> value pairs applied on top of the text.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::pair<std::string, std::string>>& overrides = {});

/// Canonical text: fixed section and key order, every key written, shortest
/// round-trip number formatting. parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& config);

/// 64-bit FNV-1a as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// FNV-1a over the canonical text without the [output] section and the
/// thread count, as 16 hex digits.
std::string scenario_hash(const ExperimentConfig& config);

/// Throws ConfigError listing every violation.
void validate_config(const ExperimentConfig& config);

struct Models {
    RateModel rates;
    PopularityModel popularity;
    AvailabilityRule rule;
};

Models build_models(const ExperimentConfig& config);
BuildOptions build_options(const ExperimentConfig& config);
HolderView holder_view(const ExperimentConfig& config);

/// Shortest text that parses back to the same double ("inf" for infinity).
std::string format_number(double v);

// ---------------------------------------------------------------------------
// Contact traces

class TraceError : public std::runtime_error {
public:
    TraceError(std::size_t line, const std::string& message);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct TraceFit {
    ContactTrace trace;
    /// Contacts per unordered pair of dense ids (a < b).
    std::map<std::pair<int, int>, int> contacts;
    /// lambda_ij = contacts / duration for every pair seen at least once.
    std::map<std::pair<int, int>, double> pair_rates;
    RateModel model = RateModel::constant(1.0);
    double mean = 0.0;
    double cv = 0.0;
};

/// Parses "t,i,j" records (optional header, '#' comments, blank lines
/// skipped). Node ids are arbitrary tokens, remapped densely in order of
/// first appearance. Duration is last minus first timestamp unless given.
TraceFit ingest_trace(std::istream& in, std::optional<double> duration = std::nullopt);
TraceFit ingest_trace_text(const std::string& text, std::optional<double> duration = std::nullopt);

// ---------------------------------------------------------------------------
// Reports

struct ResultRecord {
    std::string name;
    double value = 0.0;
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    std::optional<double> analytic_counterpart;
};

struct PlotRow {
    double x = 0.0;
    std::string series;
    double y = 0.0;
    std::optional<double> y_err;
};

/// One JSON object per line.
void write_results(std::ostream& out, const std::vector<ResultRecord>& records, const std::string& hash);
void write_plot(std::ostream& out, const std::vector<PlotRow>& rows);

/// OPPNET_OUTPUT_DIR when set, otherwise output.dir.
std::string output_directory(const ExperimentConfig& config);

} // namespace oppnet
