#include "sparq/algorithms.hpp"

#include "sparq/errors.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace sparq {

std::string variant_name(Variant variant) {
    switch (variant) {
    case Variant::SparQ: return "sparq";
    case Variant::GPUCB: return "gpucb";
    case Variant::TVGPUCB: return "tvgpucb";
    case Variant::RGPUCB: return "rgpucb";
    case Variant::SWGPUCB: return "swgpucb";
    case Variant::WGPUCB: return "wgpucb";
    }
    return "sparq";
}

Variant variant_from_name(const std::string& name) {
    if (name == "sparq") return Variant::SparQ;
    if (name == "gpucb") return Variant::GPUCB;
    if (name == "tvgpucb") return Variant::TVGPUCB;
    if (name == "rgpucb") return Variant::RGPUCB;
    if (name == "swgpucb") return Variant::SWGPUCB;
    if (name == "wgpucb") return Variant::WGPUCB;
    throw InputError("unknown algorithm variant: " + name);
}

void AlgorithmConfig::validate() const {
    kernel.validate();
    if (!(delta > 0.0) || delta > 1.0)
        throw InputError("delta must lie in (0, 1]");
    if (!(rkhs_bound > 0.0))
        throw InputError("rkhs_bound must be positive");
    if (!(sigma2 > 0.0))
        throw InputError("sigma2 must be positive");
    if (window < 0)
        throw InputError("window must be positive");
    if (epsilon < 0.0 || epsilon > 1.0)
        throw InputError("epsilon must lie in [0, 1]");
    if (!(gamma > 0.0) || gamma > 1.0)
        throw InputError("gamma must lie in (0, 1]");
    if (variant == Variant::SparQ) {
        queries.validate();
        if (mcmc_scale < 0.0)
            throw InputError("mcmc_scale must be nonnegative");
        if (!(mcmc_eta > 0.0))
            throw InputError("mcmc eta must be positive");
    }
}

HeteroscedasticDataset inject_uncertainty(std::span<const Observation> history, long t) {
    HeteroscedasticDataset data;
    const auto n = static_cast<Eigen::Index>(history.size());
    data.locations.reserve(history.size());
    data.values.resize(n);
    data.noise_variances.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Observation& obs = history[static_cast<std::size_t>(i)];
        if (obs.acquired_at > t)
            throw InputError("observation acquired after the injection time");
        const auto age = static_cast<double>(t - obs.acquired_at);
        data.locations.push_back(obs.location);
        data.values(i) = obs.value;
        data.noise_variances(i) = obs.base_variance * (age * age + 1.0);
    }
    return data;
}

DiscardResult discard_stale(const HeteroscedasticDataset& data, long t, double sigma2) {
    if (t < 1)
        throw InputError("discard_stale needs t >= 1");
    const double threshold = sigma2 * std::max(std::log(static_cast<double>(t)), 1.0);
    DiscardResult out;
    const auto n = static_cast<Eigen::Index>(data.size());
    for (Eigen::Index i = 0; i < n; ++i) {
        const bool most_recent = (i == n - 1);
        if (data.noise_variances(i) <= threshold || most_recent)
            out.kept_indices.push_back(static_cast<std::size_t>(i));
        else
            out.discarded_locations.push_back(data.locations[static_cast<std::size_t>(i)]);
    }
    const auto m = static_cast<Eigen::Index>(out.kept_indices.size());
    out.kept.values.resize(m);
    out.kept.noise_variances.resize(m);
    out.kept.locations.reserve(out.kept_indices.size());
    for (Eigen::Index k = 0; k < m; ++k) {
        const auto i = static_cast<Eigen::Index>(out.kept_indices[static_cast<std::size_t>(k)]);
        out.kept.locations.push_back(data.locations[static_cast<std::size_t>(i)]);
        out.kept.values(k) = data.values(i);
        out.kept.noise_variances(k) = data.noise_variances(i);
    }
    return out;
}

double compute_beta(double delta, const Vector& noise_diagonal, const Matrix& gram,
                    double rkhs_bound) {
    if (!(delta > 0.0) || delta > 1.0)
        throw InputError("compute_beta needs delta in (0, 1]");
    double log_ratio = 0.0;
    if (noise_diagonal.size() > 0) {
        Matrix cov = gram;
        cov.diagonal() += noise_diagonal;
        const double scale = std::max(gram.diagonal().maxCoeff(), noise_diagonal.maxCoeff());
        const JitteredCholesky chol = cholesky_with_jitter(cov, scale);
        log_ratio = 0.5 * chol.log_det - 0.5 * noise_diagonal.array().log().sum();
    }
    return std::sqrt(2.0 * (std::log(2.0) - std::log(delta) + log_ratio)) + rkhs_bound;
}

std::size_t ucb_select_index(const Vector& means, const Vector& variances, double beta) {
    if (means.size() == 0)
        throw InputError("ucb_select needs a nonempty grid");
    std::size_t best = 0;
    double best_value = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < means.size(); ++i) {
        const double value = means(i) + beta * std::sqrt(std::max(variances(i), 0.0));
        if (value > best_value) {
            best_value = value;
            best = static_cast<std::size_t>(i);
        }
    }
    return best;
}

Point ucb_select(const GPPosterior& posterior, double beta, std::span<const Point> grid) {
    Vector means, variances;
    posterior.evaluate(grid, means, variances);
    return grid[ucb_select_index(means, variances, beta)];
}

BeliefState initial_state(const AlgorithmConfig& config,
                          std::shared_ptr<const std::vector<Point>> grid) {
    config.validate();
    if (!grid || grid->empty())
        throw InputError("initial_state needs a nonempty grid");
    BeliefState state;
    state.grid = std::move(grid);
    state.pending_action = state.grid->front();
    return state;
}

namespace {

bool same_location(const Point& a, const Point& b) {
    return a.size() == b.size() && a == b;
}

/// Record the environment sample at the pending action and advance the clock.
long record_env_sample(BeliefState& state, const EnvSampler& env_sample,
                       const AlgorithmConfig& config) {
    const long t = state.current_time + 1;
    const double y = env_sample(state.pending_action, t);
    state.history.push_back(Observation{state.pending_action, y, t, config.sigma2});
    state.current_time = t;
    return t;
}

/// beta from the posterior's cached factor of K + Sigma; equal to
/// compute_beta on the same inputs up to the factorization jitter.
double beta_from_posterior(const GPPosterior& posterior, const AlgorithmConfig& config) {
    double log_ratio = 0.0;
    if (posterior.size() > 0)
        log_ratio = 0.5 * posterior.gram_log_det() -
                    0.5 * posterior.data().noise_variances.array().log().sum();
    return std::sqrt(2.0 * (std::log(2.0) - std::log(config.delta) + log_ratio)) +
           config.rkhs_bound;
}

/// Shared tail of every variant: fit, beta, UCB argmax, bookkeeping.
StepResult finish_step(BeliefState state, const AlgorithmConfig& config,
                       HeteroscedasticDataset fit_data) {
    auto posterior =
        std::make_shared<GPPosterior>(config.kernel, std::move(fit_data));
    const double beta = beta_from_posterior(*posterior, config);

    Vector means, variances;
    posterior->evaluate(*state.grid, means, variances);
    const std::size_t pick = ucb_select_index(means, variances, beta);

    state.diagnostics.variance_clamps += posterior->variance_clamps();
    state.last_posterior = std::move(posterior);
    state.pending_action = (*state.grid)[pick];
    return StepResult{state.pending_action, std::move(state)};
}

HeteroscedasticDataset homoscedastic_window(const std::vector<Observation>& history,
                                            std::size_t first, double sigma2) {
    HeteroscedasticDataset data;
    const auto n = static_cast<Eigen::Index>(history.size() - first);
    data.values.resize(n);
    data.noise_variances = Vector::Constant(n, sigma2);
    data.locations.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const Observation& obs = history[first + static_cast<std::size_t>(i)];
        data.locations.push_back(obs.location);
        data.values(i) = obs.value;
    }
    return data;
}

} // namespace

StepResult gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                       const AlgorithmConfig& config, RngStream&) {
    record_env_sample(state, env_sample, config);
    state.last_step_queries = 0;
    HeteroscedasticDataset data = homoscedastic_window(state.history, 0, config.sigma2);
    return finish_step(std::move(state), config, std::move(data));
}

StepResult r_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                         const AlgorithmConfig& config, RngStream&) {
    const long t = record_env_sample(state, env_sample, config);
    state.last_step_queries = 0;
    const long w = config.window;
    if (w < 1)
        throw InputError("r_gp_ucb_step needs a positive window");
    // windows cover steps [kw + 1, (k+1)w]; history index = step - 1
    const auto window_start = static_cast<std::size_t>(((t - 1) / w) * w);
    HeteroscedasticDataset data = homoscedastic_window(state.history, window_start, config.sigma2);
    return finish_step(std::move(state), config, std::move(data));
}

StepResult sw_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                          const AlgorithmConfig& config, RngStream&) {
    record_env_sample(state, env_sample, config);
    state.last_step_queries = 0;
    const long w = config.window;
    if (w < 1)
        throw InputError("sw_gp_ucb_step needs a positive window");
    const std::size_t n = state.history.size();
    const std::size_t first = n > static_cast<std::size_t>(w) ? n - static_cast<std::size_t>(w) : 0;
    HeteroscedasticDataset data = homoscedastic_window(state.history, first, config.sigma2);
    return finish_step(std::move(state), config, std::move(data));
}

StepResult w_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                         const AlgorithmConfig& config, RngStream&) {
    const long t = record_env_sample(state, env_sample, config);
    state.last_step_queries = 0;
    // weight gamma^{t-i} folded into the noise diagonal as sigma2 / gamma^{t-i}
    HeteroscedasticDataset data = homoscedastic_window(state.history, 0, config.sigma2);
    for (Eigen::Index i = 0; i < data.noise_variances.size(); ++i) {
        const auto age = static_cast<double>(t - state.history[static_cast<std::size_t>(i)].acquired_at);
        data.noise_variances(i) = config.sigma2 / std::pow(config.gamma, age);
    }
    return finish_step(std::move(state), config, std::move(data));
}

StepResult tv_gp_ucb_step(BeliefState state, const EnvSampler& env_sample,
                          const AlgorithmConfig& config, RngStream&) {
    const long t = record_env_sample(state, env_sample, config);
    state.last_step_queries = 0;
    HeteroscedasticDataset data = homoscedastic_window(state.history, 0, config.sigma2);

    const auto n = static_cast<Eigen::Index>(state.history.size());
    Matrix gram = kernel_matrix(config.kernel, data.locations);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            gram(i, j) *= temporal_decay(config.epsilon,
                                         state.history[static_cast<std::size_t>(i)].acquired_at,
                                         state.history[static_cast<std::size_t>(j)].acquired_at);

    auto posterior = std::make_shared<GPPosterior>(config.kernel, std::move(data), gram);
    const double beta = beta_from_posterior(*posterior, config);

    // query the posterior of f at the next step: decay by |t_i - (t+1)|
    Matrix cross = kernel_cross(config.kernel, posterior->data().locations, *state.grid);
    for (Eigen::Index i = 0; i < n; ++i)
        cross.row(i) *= temporal_decay(config.epsilon,
                                       state.history[static_cast<std::size_t>(i)].acquired_at,
                                       t + 1);
    Vector means, variances;
    posterior->evaluate_from_cross(cross, config.kernel.signal_variance, means, variances);
    const std::size_t pick = ucb_select_index(means, variances, beta);

    state.diagnostics.variance_clamps += posterior->variance_clamps();
    state.last_posterior = std::move(posterior);
    state.pending_action = (*state.grid)[pick];
    return StepResult{state.pending_action, std::move(state)};
}

StepResult sparq_step(BeliefState state, const EnvSampler& env_sample,
                      const ExpertOracle& expert, const AlgorithmConfig& config,
                      RngStream& rng) {
    const long t = record_env_sample(state, env_sample, config);

    // age everything, then drop observations beyond the discard threshold
    const HeteroscedasticDataset injected = inject_uncertainty(state.history, t);
    DiscardResult discard = discard_stale(injected, t, config.sigma2);
    state.diagnostics.observations_discarded += discard.discarded_locations.size();

    // DPP candidates: every distinct location ever visited, kept or discarded
    std::vector<Point> candidates;
    candidates.reserve(state.history.size());
    for (const Observation& obs : state.history) {
        bool known = false;
        for (const Point& c : candidates) {
            if (same_location(c, obs.location)) {
                known = true;
                break;
            }
        }
        if (!known) candidates.push_back(obs.location);
    }

    const std::size_t budget = query_budget(config.queries, t, candidates.size());
    const std::uint64_t iters =
        mcmc_iterations(t, config.mcmc_eta, config.mcmc_scale, candidates.size(), budget);
    const Matrix candidate_gram = kernel_matrix(config.kernel, candidates);
    const std::vector<std::size_t> chosen = sample_mdpp(candidate_gram, budget, iters, rng);

    // expert refreshes replace any strictly older observation at the location
    const double expert_variance = config.resolved_expert_variance();
    for (std::size_t idx : chosen) {
        const Point& location = candidates[idx];
        const double value = expert(location, t);
        std::erase_if(state.history, [&](const Observation& obs) {
            return obs.acquired_at < t && same_location(obs.location, location);
        });
        state.history.push_back(Observation{location, value, t, expert_variance});
    }
    state.diagnostics.queries_issued += chosen.size();
    state.last_step_queries = chosen.size();

    // fit on kept-plus-refreshed observations, re-aged after the replacements
    const HeteroscedasticDataset refreshed = inject_uncertainty(state.history, t);
    DiscardResult fit_set = discard_stale(refreshed, t, config.sigma2);
    return finish_step(std::move(state), config, std::move(fit_set.kept));
}

StepResult algorithm_step(BeliefState state, const EnvSampler& env_sample,
                          const ExpertOracle& expert, const AlgorithmConfig& config,
                          RngStream& rng) {
    switch (config.variant) {
    case Variant::SparQ: return sparq_step(std::move(state), env_sample, expert, config, rng);
    case Variant::GPUCB: return gp_ucb_step(std::move(state), env_sample, config, rng);
    case Variant::TVGPUCB: return tv_gp_ucb_step(std::move(state), env_sample, config, rng);
    case Variant::RGPUCB: return r_gp_ucb_step(std::move(state), env_sample, config, rng);
    case Variant::SWGPUCB: return sw_gp_ucb_step(std::move(state), env_sample, config, rng);
    case Variant::WGPUCB: return w_gp_ucb_step(std::move(state), env_sample, config, rng);
    }
    throw InputError("unknown algorithm variant");
}

} // namespace sparq
