#ifndef SPARQ_HARNESS_HPP
#define SPARQ_HARNESS_HPP

#include "sparq/algorithms.hpp"
#include "sparq/environment.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sparq {

struct BoundCurveConfig {
    bool enabled = false;
    double constant = 1.0;
};

struct TuningConfig {
    std::vector<double> lengthscales = {0.5, 1.0, 2.0, 4.0, 8.0};
    std::vector<double> signal_variances = {0.25, 1.0, 4.0};
    KernelFamily family = KernelFamily::SquaredExponential;
    std::size_t samples = 128;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    std::vector<AlgorithmConfig> algorithms;
    long horizon = 500;
    long realizations = 40;
    std::uint64_t base_seed = 1;
    std::size_t grid_resolution = 1001;
    std::string output_dir = "out";
    BoundCurveConfig bound_curve;
    std::optional<KernelSpec> kernel;   // shared kernel; nullopt = tune from data
    TuningConfig tuning;
    double delta = 0.05;
    double rkhs_bound = 2.0;

    void validate() const;
};

/// Per-step regret record of one episode.
struct RegretTrace {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::vector<double> instant;
    std::vector<double> cumulative;
    std::vector<double> average;
    std::vector<std::size_t> queries;
};

struct AlgorithmAggregate {
    std::string algorithm;
    std::vector<double> mean_avg_regret;   // per step
    std::vector<double> std_avg_regret;    // sample (n-1) estimator
    std::vector<double> mean_queries;
    std::size_t realizations = 0;
};

struct EpisodeFailure {
    std::string algorithm;
    std::uint64_t seed = 0;
    std::string message;
};

struct BatchResult {
    std::vector<AlgorithmAggregate> aggregates;
    std::vector<EpisodeFailure> failures;
    std::vector<double> bound_curve;   // empty unless enabled
};

/// Regret bookkeeping for a fixed action sequence (action t played at step t).
RegretTrace trace_for_actions(const EnvironmentSpec& environment, std::span<const Point> grid,
                              std::span<const Point> actions,
                              std::span<const std::size_t> queries);

/// Kernel hyperparameters by LML grid search over a seeded snapshot of the
/// environment at t = 1.
KernelSpec tuned_kernel(const ExperimentConfig& config);

/// Algorithm configs with the shared kernel/delta/sigma2 defaults applied and
/// window defaults resolved against the horizon. Tunes if no kernel is given.
std::vector<AlgorithmConfig> resolve_algorithms(const ExperimentConfig& config);

/// One episode: T steps, seeded substreams (0 env, 1 expert, 2 chain).
RegretTrace run_episode(const ExperimentConfig& config, const AlgorithmConfig& algorithm,
                        std::uint64_t seed);

/// Episodes i = 0..realizations-1 with seeds base_seed + i for every
/// algorithm; fan-out capped by SPARQ_WORKERS. Aggregation is a deterministic
/// fold in seed order, independent of scheduling.
BatchResult run_batch(const ExperimentConfig& config);

/// Average-regret form of the Theorem-1 bound, ln arguments floored at 2.
std::vector<double> theoretical_bound(std::span<const long> steps, int dimension, double delta,
                                      double constant);

/// One CSV per algorithm (t,mean_avg_regret,std_avg_regret,mean_queries) plus
/// summary.csv with the final-step values. Shortest round-trip float format.
void emit_csv(const BatchResult& result, const std::string& directory);

/// Single SVG line chart: one mean path per algorithm, a +-1 std band path
/// each, and an optional black bound path.
void emit_plot(const BatchResult& result, const std::string& path);

} // namespace sparq

#endif
