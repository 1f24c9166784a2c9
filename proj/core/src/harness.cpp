#include "sparq/harness.hpp"

#include "sparq/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

namespace sparq {

void ExperimentConfig::validate() const {
    environment.validate();
    if (horizon < 1)
        throw InputError("horizon must be >= 1");
    if (realizations < 1)
        throw InputError("realizations must be >= 1");
    if (grid_resolution < 2)
        throw InputError("grid_resolution must be >= 2");
    if (!(delta > 0.0) || delta > 1.0)
        throw InputError("delta must lie in (0, 1]");
    if (!(rkhs_bound > 0.0))
        throw InputError("rkhs_bound must be positive");
    if (algorithms.empty())
        throw InputError("config lists no algorithms");
    if (!(bound_curve.constant > 0.0))
        throw InputError("bound curve constant must be positive");
    if (kernel) kernel->validate();
}

RegretTrace trace_for_actions(const EnvironmentSpec& environment, std::span<const Point> grid,
                              std::span<const Point> actions,
                              std::span<const std::size_t> queries) {
    RegretTrace trace;
    const std::size_t horizon = actions.size();
    trace.instant.reserve(horizon);
    trace.cumulative.reserve(horizon);
    trace.average.reserve(horizon);
    trace.queries.assign(queries.begin(), queries.end());
    if (trace.queries.empty()) trace.queries.assign(horizon, 0);
    double cumulative = 0.0;
    for (std::size_t i = 0; i < horizon; ++i) {
        const long t = static_cast<long>(i) + 1;
        const auto [best_point, best_value] = instant_optimum(environment, t, grid);
        const double r = best_value - true_value(environment, actions[i], t);
        trace.instant.push_back(r);
        cumulative += r;
        trace.cumulative.push_back(cumulative);
        trace.average.push_back(cumulative / static_cast<double>(t));
    }
    return trace;
}

KernelSpec tuned_kernel(const ExperimentConfig& config) {
    const std::vector<Point> sites =
        make_grid(config.environment, std::max<std::size_t>(config.tuning.samples, 2));
    RngStream rng(config.base_seed, 3);
    HeteroscedasticDataset data;
    const auto n = static_cast<Eigen::Index>(sites.size());
    data.locations = sites;
    data.values.resize(n);
    data.noise_variances = Vector::Constant(n, config.environment.sigma2);
    for (Eigen::Index i = 0; i < n; ++i)
        data.values(i) = sample(config.environment, sites[static_cast<std::size_t>(i)], 1, rng);

    std::vector<KernelSpec> grid;
    for (double ls : config.tuning.lengthscales)
        for (double sv : config.tuning.signal_variances)
            grid.push_back(KernelSpec{config.tuning.family, ls, sv});
    return tune_hyperparameters(data, grid);
}

std::vector<AlgorithmConfig> resolve_algorithms(const ExperimentConfig& config) {
    config.validate();
    KernelSpec shared;
    bool have_shared = false;
    std::vector<AlgorithmConfig> out = config.algorithms;
    for (AlgorithmConfig& algo : out) {
        if (algo.kernel.lengthscale <= 0.0) {   // unset marker from config parsing
            if (!have_shared) {
                shared = config.kernel ? *config.kernel : tuned_kernel(config);
                have_shared = true;
            }
            algo.kernel = shared;
        }
        if (algo.window == 0)
            algo.window = static_cast<long>(
                std::ceil(std::sqrt(static_cast<double>(config.horizon))));
        algo.validate();
    }
    return out;
}

RegretTrace run_episode(const ExperimentConfig& config, const AlgorithmConfig& algorithm,
                        std::uint64_t seed) {
    auto grid = std::make_shared<const std::vector<Point>>(
        make_grid(config.environment, config.grid_resolution));

    RngStream env_rng(seed, 0);
    RngStream expert_rng(seed, 1);
    RngStream chain_rng(seed, 2);

    const EnvironmentSpec& environment = config.environment;
    const EnvSampler env_sampler = [&](const Point& x, long t) {
        return sample(environment, x, t, env_rng);
    };
    const double expert_variance = algorithm.resolved_expert_variance();
    const ExpertOracle expert = [&](const Point& x, long t) {
        return expert_query(environment, x, t, expert_variance, expert_rng);
    };

    std::vector<Point> actions;
    std::vector<std::size_t> queries;
    actions.reserve(static_cast<std::size_t>(config.horizon));
    queries.reserve(static_cast<std::size_t>(config.horizon));

    BeliefState state = initial_state(algorithm, grid);
    for (long t = 1; t <= config.horizon; ++t) {
        actions.push_back(state.pending_action);
        StepResult step;
        try {
            step = algorithm_step(std::move(state), env_sampler, expert, algorithm, chain_rng);
        } catch (const NumericalError& err) {
            throw NumericalError(algorithm.tag() + " seed " + std::to_string(seed) + " step " +
                                     std::to_string(t) + ": " + err.what(),
                                 err.jitter_attempts);
        }
        state = std::move(step.state);
        queries.push_back(state.last_step_queries);
    }

    RegretTrace trace = trace_for_actions(environment, *grid, actions, queries);
    trace.algorithm = algorithm.tag();
    trace.seed = seed;
    return trace;
}

namespace {

std::size_t worker_count() {
    if (const char* env = std::getenv("SPARQ_WORKERS")) {
        char* end = nullptr;
        const long parsed = std::strtol(env, &end, 10);
        if (end && *end == '\0' && parsed >= 1)
            return static_cast<std::size_t>(parsed);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

double sample_std(std::span<const double> values, double mean) {
    if (values.size() < 2) return 0.0;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

} // namespace

BatchResult run_batch(const ExperimentConfig& config) {
    const std::vector<AlgorithmConfig> algorithms = resolve_algorithms(config);
    const auto realizations = static_cast<std::size_t>(config.realizations);
    const auto horizon = static_cast<std::size_t>(config.horizon);

    struct Task {
        std::size_t algorithm;
        std::size_t episode;
    };
    std::vector<Task> tasks;
    tasks.reserve(algorithms.size() * realizations);
    for (std::size_t a = 0; a < algorithms.size(); ++a)
        for (std::size_t i = 0; i < realizations; ++i)
            tasks.push_back(Task{a, i});

    std::vector<std::vector<std::optional<RegretTrace>>> traces(
        algorithms.size(), std::vector<std::optional<RegretTrace>>(realizations));
    std::vector<EpisodeFailure> failures;
    std::mutex failure_mutex;
    std::atomic<std::size_t> next{0};

    auto worker = [&]() {
        while (true) {
            const std::size_t k = next.fetch_add(1);
            if (k >= tasks.size()) break;
            const Task task = tasks[k];
            const std::uint64_t seed = config.base_seed + task.episode;
            try {
                traces[task.algorithm][task.episode] =
                    run_episode(config, algorithms[task.algorithm], seed);
            } catch (const std::exception& err) {
                std::lock_guard lock(failure_mutex);
                failures.push_back(
                    EpisodeFailure{algorithms[task.algorithm].tag(), seed, err.what()});
            }
        }
    };

    const std::size_t workers = std::min(worker_count(), std::max<std::size_t>(tasks.size(), 1));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& thread : pool) thread.join();

    BatchResult result;
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
        AlgorithmAggregate agg;
        agg.algorithm = algorithms[a].tag();
        agg.mean_avg_regret.assign(horizon, 0.0);
        agg.std_avg_regret.assign(horizon, 0.0);
        agg.mean_queries.assign(horizon, 0.0);
        std::vector<const RegretTrace*> done;
        for (const auto& maybe : traces[a])
            if (maybe) done.push_back(&*maybe);
        agg.realizations = done.size();
        if (!done.empty()) {
            std::vector<double> column(done.size());
            for (std::size_t t = 0; t < horizon; ++t) {
                double qsum = 0.0;
                for (std::size_t i = 0; i < done.size(); ++i) {
                    column[i] = done[i]->average[t];
                    qsum += static_cast<double>(done[i]->queries[t]);
                }
                const double mean =
                    std::accumulate(column.begin(), column.end(), 0.0) /
                    static_cast<double>(column.size());
                agg.mean_avg_regret[t] = mean;
                agg.std_avg_regret[t] = sample_std(column, mean);
                agg.mean_queries[t] = qsum / static_cast<double>(done.size());
            }
        }
        result.aggregates.push_back(std::move(agg));
    }
    // deterministic failure order regardless of thread interleaving
    std::sort(failures.begin(), failures.end(), [](const EpisodeFailure& a, const EpisodeFailure& b) {
        return std::tie(a.algorithm, a.seed) < std::tie(b.algorithm, b.seed);
    });
    result.failures = std::move(failures);

    if (config.bound_curve.enabled) {
        std::vector<long> steps(horizon);
        for (std::size_t t = 0; t < horizon; ++t) steps[t] = static_cast<long>(t) + 1;
        result.bound_curve =
            theoretical_bound(steps, static_cast<int>(config.environment.dimension()),
                              config.delta, config.bound_curve.constant);
    }
    return result;
}

std::vector<double> theoretical_bound(std::span<const long> steps, int dimension, double delta,
                                      double constant) {
    if (constant < 0.0)
        throw InputError("bound constant must be nonnegative");
    const auto slog = [](double z) { return std::log(std::max(z, 2.0)); };
    const double d = static_cast<double>(dimension);
    std::vector<double> out;
    out.reserve(steps.size());
    for (long step : steps) {
        const double t = static_cast<double>(step);
        const double first = std::sqrt(t * d * std::pow(slog(t), d + 5.0));
        const double second = std::sqrt(slog(1.0 / delta) + d * std::pow(slog(d * slog(t)), d + 3.0));
        out.push_back(constant * first * second / t);
    }
    return out;
}

namespace {

std::string format_double(double value) {
    char buffer[64];
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot open for writing: " + path);
    file << contents;
    if (!file)
        throw IoError("write failed: " + path);
}

} // namespace

void emit_csv(const BatchResult& result, const std::string& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec)
        throw IoError("cannot create output directory: " + directory);

    for (const AlgorithmAggregate& agg : result.aggregates) {
        std::string body = "t,mean_avg_regret,std_avg_regret,mean_queries\n";
        for (std::size_t t = 0; t < agg.mean_avg_regret.size(); ++t) {
            body += std::to_string(t + 1);
            body += ',';
            body += format_double(agg.mean_avg_regret[t]);
            body += ',';
            body += format_double(agg.std_avg_regret[t]);
            body += ',';
            body += format_double(agg.mean_queries[t]);
            body += '\n';
        }
        write_file(directory + "/" + agg.algorithm + ".csv", body);
    }

    std::string summary = "algorithm,t,mean_avg_regret,std_avg_regret,mean_queries\n";
    for (const AlgorithmAggregate& agg : result.aggregates) {
        if (agg.mean_avg_regret.empty()) continue;
        const std::size_t last = agg.mean_avg_regret.size() - 1;
        summary += agg.algorithm;
        summary += ',';
        summary += std::to_string(last + 1);
        summary += ',';
        summary += format_double(agg.mean_avg_regret[last]);
        summary += ',';
        summary += format_double(agg.std_avg_regret[last]);
        summary += ',';
        summary += format_double(agg.mean_queries[last]);
        summary += '\n';
    }
    write_file(directory + "/summary.csv", summary);
}

namespace {

struct PlotFrame {
    double width = 960.0;
    double height = 600.0;
    double left = 70.0;
    double right = 20.0;
    double top = 20.0;
    double bottom = 55.0;
    double t_max = 1.0;
    double y_max = 1.0;

    double x(double t) const {
        return left + (t / t_max) * (width - left - right);
    }
    double y(double value) const {
        const double clamped = std::clamp(value, 0.0, y_max);
        return height - bottom - (clamped / y_max) * (height - top - bottom);
    }
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string polyline_path(const PlotFrame& frame, std::span<const double> values) {
    std::string path;
    for (std::size_t i = 0; i < values.size(); ++i) {
        path += i == 0 ? "M" : " L";
        path += format_double(frame.x(static_cast<double>(i + 1)));
        path += ' ';
        path += format_double(frame.y(values[i]));
    }
    return path;
}

} // namespace

void emit_plot(const BatchResult& result, const std::string& path) {
    PlotFrame frame;
    std::size_t horizon = 0;
    double y_max = 0.0;
    for (const AlgorithmAggregate& agg : result.aggregates) {
        horizon = std::max(horizon, agg.mean_avg_regret.size());
        for (std::size_t t = 0; t < agg.mean_avg_regret.size(); ++t)
            y_max = std::max(y_max, agg.mean_avg_regret[t] + agg.std_avg_regret[t]);
    }
    horizon = std::max(horizon, result.bound_curve.size());
    // scale to the data; the bound is clamped into the frame where it exceeds it
    if (y_max == 0.0 && !result.bound_curve.empty())
        y_max = result.bound_curve[result.bound_curve.size() / 2];
    frame.t_max = horizon ? static_cast<double>(horizon) : 1.0;
    frame.y_max = y_max > 0.0 ? 1.1 * y_max : 1.0;

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << frame.width << "\" height=\""
        << frame.height << "\" viewBox=\"0 0 " << frame.width << " " << frame.height << "\">\n";
    svg << "<rect width=\"" << frame.width << "\" height=\"" << frame.height
        << "\" fill=\"white\"/>\n";

    // axes
    const double x0 = frame.left, y0 = frame.height - frame.bottom;
    const double x1 = frame.width - frame.right, y1 = frame.top;
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 5; ++tick) {
        const double tv = frame.t_max * tick / 5.0;
        const double yv = frame.y_max * tick / 5.0;
        svg << "<line x1=\"" << frame.x(tv) << "\" y1=\"" << y0 << "\" x2=\"" << frame.x(tv)
            << "\" y2=\"" << y0 + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << frame.x(tv) << "\" y=\"" << y0 + 20
            << "\" font-size=\"12\" text-anchor=\"middle\">" << format_double(std::round(tv))
            << "</text>\n";
        svg << "<line x1=\"" << x0 - 5 << "\" y1=\"" << frame.y(yv) << "\" x2=\"" << x0
            << "\" y2=\"" << frame.y(yv) << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x0 - 8 << "\" y=\"" << frame.y(yv) + 4
            << "\" font-size=\"12\" text-anchor=\"end\">"
            << format_double(std::round(yv * 100.0) / 100.0) << "</text>\n";
    }
    svg << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << frame.height - 12
        << "\" font-size=\"14\" text-anchor=\"middle\">iteration t</text>\n";
    svg << "<text x=\"18\" y=\"" << (y0 + y1) / 2
        << "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << (y0 + y1) / 2 << ")\">average regret</text>\n";

    // one band path + one mean path per algorithm
    for (std::size_t a = 0; a < result.aggregates.size(); ++a) {
        const AlgorithmAggregate& agg = result.aggregates[a];
        const char* color = kPalette[a % (sizeof(kPalette) / sizeof(kPalette[0]))];
        std::string band;
        const std::size_t n = agg.mean_avg_regret.size();
        for (std::size_t i = 0; i < n; ++i) {
            band += i == 0 ? "M" : " L";
            band += format_double(frame.x(static_cast<double>(i + 1)));
            band += ' ';
            band += format_double(frame.y(agg.mean_avg_regret[i] + agg.std_avg_regret[i]));
        }
        for (std::size_t i = n; i > 0; --i) {
            band += " L";
            band += format_double(frame.x(static_cast<double>(i)));
            band += ' ';
            band += format_double(frame.y(agg.mean_avg_regret[i - 1] - agg.std_avg_regret[i - 1]));
        }
        if (n) band += " Z";
        svg << "<path d=\"" << band << "\" fill=\"" << color
            << "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
        svg << "<path d=\"" << polyline_path(frame, agg.mean_avg_regret) << "\" fill=\"none\" stroke=\""
            << color << "\" stroke-width=\"1.5\"/>\n";
        svg << "<text x=\"" << x1 - 10 << "\" y=\"" << y1 + 16 + 16 * static_cast<double>(a)
            << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << color << "\">" << agg.algorithm
            << "</text>\n";
    }

    if (!result.bound_curve.empty()) {
        svg << "<path d=\"" << polyline_path(frame, result.bound_curve)
            << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n";
        svg << "<text x=\"" << x1 - 10 << "\" y=\""
            << y1 + 16 + 16 * static_cast<double>(result.aggregates.size())
            << "\" font-size=\"12\" text-anchor=\"end\">bound</text>\n";
    }

    svg << "</svg>\n";
    write_file(path, svg.str());
}

} // namespace sparq
