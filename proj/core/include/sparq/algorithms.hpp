#ifndef SPARQ_ALGORITHMS_HPP
#define SPARQ_ALGORITHMS_HPP

#include "sparq/gp.hpp"
#include "sparq/kernel.hpp"
#include "sparq/rng.hpp"
#include "sparq/sparse.hpp"

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sparq {

/// One sampled reward.
struct Observation {
    Point location;
    double value = 0.0;
    long acquired_at = 0;
    double base_variance = 0.0;
};

enum class Variant { SparQ, GPUCB, TVGPUCB, RGPUCB, SWGPUCB, WGPUCB };

std::string variant_name(Variant variant);
Variant variant_from_name(const std::string& name);

struct AlgorithmConfig {
    Variant variant = Variant::SparQ;
    KernelSpec kernel;
    double delta = 0.05;          // confidence level in beta_t
    double rkhs_bound = 2.0;      // stand-in for the unobservable ||f_t||_k
    double sigma2 = 0.01;         // sampling noise variance

    long window = 0;              // R-/SW-GP-UCB; 0 means "harness default"
    double epsilon = 0.01;        // TV-GP-UCB forgetting factor
    double gamma = 0.95;          // W-GP-UCB discount
    QueryBudget queries;          // SparQ expert budget
    double expert_variance = -1.0; // SparQ; negative means "use sigma2"
    double mcmc_scale = 1.0;      // SparQ chain length multiplier (0 = greedy only)
    double mcmc_eta = 0.1;        // SparQ chain tolerance

    double resolved_expert_variance() const {
        return expert_variance < 0.0 ? sigma2 : expert_variance;
    }
    std::string tag() const { return variant_name(variant); }
    void validate() const;
};

struct Diagnostics {
    std::uint64_t queries_issued = 0;
    std::uint64_t observations_discarded = 0;
    std::uint64_t variance_clamps = 0;
};

/// Algorithm state between steps. `pending_action` is the grid point that the
/// next step will play and record.
struct BeliefState {
    std::vector<Observation> history;
    long current_time = 0;
    Point pending_action;
    std::shared_ptr<const std::vector<Point>> grid;
    std::shared_ptr<const GPPosterior> last_posterior;
    Diagnostics diagnostics;
    std::size_t last_step_queries = 0;
};

using EnvSampler = std::function<double(const Point&, long)>;
using ExpertOracle = std::function<double(const Point&, long)>;

/// Ages observations into a heteroscedastic dataset at time t: an observation
/// acquired at time i with base variance v carries v ((t - i)^2 + 1).
/// Output order matches the history order.
HeteroscedasticDataset inject_uncertainty(std::span<const Observation> history, long t);

struct DiscardResult {
    HeteroscedasticDataset kept;
    std::vector<Point> discarded_locations;
    std::vector<std::size_t> kept_indices;
};

/// Keeps entry i iff its effective variance is at most sigma2 * max(ln t, 1).
/// The last entry (the most recent observation) is always kept.
DiscardResult discard_stale(const HeteroscedasticDataset& data, long t, double sigma2);

/// Theorem-1 exploration coefficient:
/// sqrt(2 (log 2 - log delta + 1/2 logdet(Sigma + K) - 1/2 logdet Sigma)) + B.
double compute_beta(double delta, const Vector& noise_diagonal, const Matrix& gram,
                    double rkhs_bound);

/// Grid argmax of mean + beta * stddev; ties break toward the lowest index.
std::size_t ucb_select_index(const Vector& means, const Vector& variances, double beta);
Point ucb_select(const GPPosterior& posterior, double beta, std::span<const Point> grid);

struct StepResult {
    Point action;        // the next action, already stored as pending_action
    BeliefState state;
};

StepResult sparq_step(BeliefState state, const EnvSampler& env_sample,
                      const ExpertOracle& expert, const AlgorithmConfig& config,
                      RngStream& rng);
StepResult gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                       const AlgorithmConfig& config, RngStream& rng);
StepResult tv_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                          const AlgorithmConfig& config, RngStream& rng);
StepResult r_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                         const AlgorithmConfig& config, RngStream& rng);
StepResult sw_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                          const AlgorithmConfig& config, RngStream& rng);
StepResult w_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                         const AlgorithmConfig& config, RngStream& rng);

/// Dispatch on config.variant.
StepResult algorithm_step(BeliefState state, const EnvSampler& env_sample,
                          const ExpertOracle& expert, const AlgorithmConfig& config,
                          RngStream& rng);

/// Fresh state whose pending action is the prior UCB argmax (grid[0], since
/// the prior acquisition is constant).
BeliefState initial_state(const AlgorithmConfig& config,
                          std::shared_ptr<const std::vector<Point>> grid);

} // namespace sparq

#endif
