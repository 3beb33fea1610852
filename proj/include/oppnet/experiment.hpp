#pragma once

#include <string>
#include <vector>

#include "oppnet/io.hpp"
#include "oppnet/offload.hpp"

namespace oppnet {

/// What a subcommand produces: result records, plot rows and a short
/// human-readable table for the terminal.
struct Report {
    std::vector<ResultRecord> results;
    std::vector<PlotRow> plot;
    std::string table;
};

/// Predictions only: exact values, bounds, and the Gamma / Pareto(n0, 2)
/// closed forms with their cross-check deltas when the scenario fits them.
Report run_analyze(const ExperimentConfig& config);

/// Monte Carlo estimates with the matching analytic value alongside.
Report run_simulate(const ExperimentConfig& config);

/// Simulation against prediction for each N in validate.nodes, as relative
/// errors. Also reports the access probability at the median simulated delay.
Report run_validate(const ExperimentConfig& config);

/// Allocation tables for every configured policy at the first ttl.
Report run_optimize(const ExperimentConfig& config);

/// Simulated offloading ratio per policy and ttl; "blind" runs the
/// popularity-blind heuristic against uniform and square-root allocation.
Report run_offload_sim(const ExperimentConfig& config);

/// Builds a policy by name (qos, sqrt, log, uniform, random, power:<k>).
AllocationPolicy make_policy(const std::string& name, const PopularityModel& pop, double mu_lambda, double ttl,
                             double budget, int contents, std::uint64_t seed);

/// Fitted-trace report, plus the [rates] section that reproduces the fit.
struct IngestReport {
    Report report;
    std::string rates_section;
};

IngestReport run_ingest(const TraceFit& fit);

} // namespace oppnet
