// sparq-bandit: run and benchmark time-varying GP-UCB bandits.
//
// Exit codes: 0 success, 1 config/parse error, 2 numerical failure, 3 I/O error.

#include "sparq/config.hpp"
#include "sparq/errors.hpp"
#include "sparq/harness.hpp"
#include "sparq/sparse.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitIo = 3;

int report_batch(const sparq::BatchResult& result) {
    for (const sparq::AlgorithmAggregate& agg : result.aggregates) {
        if (agg.mean_avg_regret.empty()) continue;
        const std::size_t last = agg.mean_avg_regret.size() - 1;
        std::cout << agg.algorithm << ": avg regret at t=" << last + 1 << " is "
                  << agg.mean_avg_regret[last] << " (+-" << agg.std_avg_regret[last] << ", "
                  << agg.realizations << " episodes)\n";
    }
    for (const sparq::EpisodeFailure& failure : result.failures)
        std::cerr << "episode failed: " << failure.algorithm << " seed " << failure.seed << ": "
                  << failure.message << "\n";
    return result.failures.empty() ? kExitOk : kExitNumerical;
}

int run_command(const std::string& config_path, const std::string& algo_filter,
                std::int64_t seed_override, const std::string& out_override, bool with_plot) {
    sparq::ExperimentConfig config = sparq::load_config(config_path);
    if (!algo_filter.empty()) {
        std::vector<sparq::AlgorithmConfig> filtered;
        for (const sparq::AlgorithmConfig& algo : config.algorithms)
            if (algo.tag() == algo_filter) filtered.push_back(algo);
        if (filtered.empty())
            throw sparq::InputError("config has no algorithm named '" + algo_filter + "'");
        config.algorithms = std::move(filtered);
    }
    if (seed_override >= 0)
        config.base_seed = static_cast<std::uint64_t>(seed_override);
    if (!out_override.empty())
        config.output_dir = out_override;

    const sparq::BatchResult result = sparq::run_batch(config);
    sparq::emit_csv(result, config.output_dir);
    if (with_plot)
        sparq::emit_plot(result, config.output_dir + "/regret.svg");
    std::cout << "wrote " << config.output_dir << "/\n";
    return report_batch(result);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Time-varying GP-UCB bandit benchmark with sparse expert queries"};
    app.require_subcommand(1);

    std::string config_path, algo_filter, out_dir;
    std::int64_t seed = -1;

    CLI::App* run = app.add_subcommand("run", "Run the configured experiment and write CSVs");
    run->add_option("--config", config_path, "JSON experiment config")->required();
    run->add_option("--algo", algo_filter, "Only run this algorithm");
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--out", out_dir, "Output directory (overrides the config)");

    CLI::App* bench = app.add_subcommand(
        "bench", "Run every algorithm over the full batch and write CSVs plus the regret plot");
    bench->add_option("--config", config_path, "JSON experiment config")->required();
    bench->add_option("--out", out_dir, "Output directory (overrides the config)")->required();

    std::size_t dpp_n = 12, dpp_m = 4;
    std::uint64_t dpp_iters = 10000, dpp_seed = 1;
    CLI::App* dpp = app.add_subcommand("dpp-sample",
                                       "Sample an M-DPP subset from a seeded random instance");
    dpp->add_option("--n", dpp_n, "Ground set size")->required();
    dpp->add_option("--m", dpp_m, "Subset size")->required();
    dpp->add_option("--iters", dpp_iters, "Chain length")->required();
    dpp->add_option("--seed", dpp_seed, "Seed")->required();

    CLI::App* tune = app.add_subcommand("tune", "Print the LML-winning kernel for the config");
    tune->add_option("--config", config_path, "JSON experiment config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed())
            return run_command(config_path, algo_filter, seed, out_dir, false);
        if (bench->parsed())
            return run_command(config_path, "", -1, out_dir, true);
        if (dpp->parsed()) {
            // seeded instance: n uniform points in [0, 1], SE kernel
            sparq::RngStream rng(dpp_seed, 0);
            std::vector<sparq::Point> points;
            points.reserve(dpp_n);
            for (std::size_t i = 0; i < dpp_n; ++i)
                points.push_back(sparq::Point::Constant(1, rng.uniform()));
            const sparq::KernelSpec spec{sparq::KernelFamily::SquaredExponential, 0.25, 1.0};
            const sparq::Matrix gram = sparq::kernel_matrix(spec, points);
            sparq::RngStream chain(dpp_seed, 2);
            const std::vector<std::size_t> subset =
                sparq::sample_mdpp(gram, dpp_m, dpp_iters, chain);
            sparq::SubsetState state(gram, subset);
            std::cout << "subset:";
            for (std::size_t idx : subset) std::cout << ' ' << idx;
            std::cout << "\nlogdet: " << state.log_det() << "\n";
            return kExitOk;
        }
        if (tune->parsed()) {
            const sparq::ExperimentConfig config = sparq::load_config(config_path);
            const sparq::KernelSpec spec =
                config.kernel ? *config.kernel : sparq::tuned_kernel(config);
            std::cout << sparq::kernel_spec_json(spec) << "\n";
            return kExitOk;
        }
    } catch (const sparq::ParseError& err) {
        std::cerr << "config error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const sparq::InputError& err) {
        std::cerr << "input error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const sparq::NumericalError& err) {
        std::cerr << "numerical error: " << err.what() << "\n";
        return kExitNumerical;
    } catch (const sparq::IoError& err) {
        std::cerr << "i/o error: " << err.what() << "\n";
        return kExitIo;
    }
    return kExitConfig;
}
