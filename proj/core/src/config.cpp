#include "sparq/config.hpp"

#include "sparq/errors.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace sparq {

using nlohmann::json;

namespace {

KernelSpec parse_kernel(const json& node) {
    KernelSpec spec;
    spec.family = kernel_family_from_name(node.value("family", "se"));
    spec.lengthscale = node.at("lengthscale").get<double>();
    spec.signal_variance = node.at("signal_variance").get<double>();
    spec.validate();
    return spec;
}

EnvironmentSpec parse_environment(const json& node) {
    EnvironmentSpec env;
    const std::string kind = node.value("kind", "synthetic");
    if (kind == "synthetic") {
        env.kind = EnvironmentKind::SyntheticDrift;
        const json& bounds = node.at("bounds");
        if (!bounds.is_array() || bounds.empty())
            throw ParseError("environment bounds must be an array");
        if (bounds[0].is_number()) {
            if (bounds.size() != 2)
                throw ParseError("1-d environment bounds must be [lo, hi]");
            env.lower = Vector::Constant(1, bounds[0].get<double>());
            env.upper = Vector::Constant(1, bounds[1].get<double>());
        } else {
            const auto d = static_cast<Eigen::Index>(bounds.size());
            env.lower.resize(d);
            env.upper.resize(d);
            for (Eigen::Index i = 0; i < d; ++i) {
                const json& pair = bounds[static_cast<std::size_t>(i)];
                if (!pair.is_array() || pair.size() != 2)
                    throw ParseError("each bounds entry must be [lo, hi]");
                env.lower(i) = pair[0].get<double>();
                env.upper(i) = pair[1].get<double>();
            }
        }
        env.sigma2 = node.value("sigma2", 0.01);
    } else if (kind == "csv") {
        env = load_csv_environment(node.at("path").get<std::string>(),
                                   CsvInterpolation::Nearest);
        env.sigma2 = node.value("sigma2", 0.01);
    } else {
        throw ParseError("unknown environment kind: " + kind);
    }
    env.validate();
    return env;
}

AlgorithmConfig parse_algorithm(const json& node, const ExperimentConfig& experiment) {
    AlgorithmConfig algo;
    algo.variant = variant_from_name(node.at("variant").get<std::string>());
    algo.delta = node.value("delta", experiment.delta);
    algo.rkhs_bound = node.value("rkhs_bound", experiment.rkhs_bound);
    algo.sigma2 = node.value("sigma2", experiment.environment.sigma2);
    if (node.contains("kernel"))
        algo.kernel = parse_kernel(node.at("kernel"));
    else
        algo.kernel.lengthscale = 0.0;   // inherit the shared (possibly tuned) kernel
    algo.window = node.value("window", 0L);
    algo.epsilon = node.value("epsilon", 0.01);
    algo.gamma = node.value("gamma", 0.95);
    if (node.contains("expert_variance"))
        algo.expert_variance = node.at("expert_variance").get<double>();
    if (node.contains("queries")) {
        const json& queries = node.at("queries");
        algo.queries.c = queries.value("c", 6.0);
        algo.queries.dimension =
            queries.value("d", static_cast<int>(experiment.environment.dimension()));
        algo.mcmc_scale = queries.value("mcmc_scale", 1.0);
        algo.mcmc_eta = queries.value("eta", 0.1);
    } else {
        algo.queries.dimension = static_cast<int>(experiment.environment.dimension());
    }
    return algo;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& err) {
        throw ParseError(std::string("config is not valid JSON: ") + err.what());
    }
    try {
        ExperimentConfig config;
        config.environment = parse_environment(root.at("environment"));
        config.horizon = root.value("horizon", 500L);
        config.realizations = root.value("realizations", 40L);
        config.base_seed = root.value("base_seed", std::uint64_t{1});
        config.grid_resolution = root.value("grid_resolution", std::size_t{1001});
        config.output_dir = root.value("output_dir", std::string("out"));
        config.delta = root.value("delta", 0.05);
        config.rkhs_bound = root.value("rkhs_bound", 2.0);
        if (root.contains("kernel"))
            config.kernel = parse_kernel(root.at("kernel"));
        if (root.contains("tuning")) {
            const json& tuning = root.at("tuning");
            if (tuning.contains("lengthscales"))
                config.tuning.lengthscales = tuning.at("lengthscales").get<std::vector<double>>();
            if (tuning.contains("signal_variances"))
                config.tuning.signal_variances =
                    tuning.at("signal_variances").get<std::vector<double>>();
            if (tuning.contains("family"))
                config.tuning.family = kernel_family_from_name(tuning.at("family").get<std::string>());
            config.tuning.samples = tuning.value("samples", std::size_t{128});
        }
        if (root.contains("bound_curve")) {
            const json& bound = root.at("bound_curve");
            config.bound_curve.enabled = bound.value("enabled", true);
            config.bound_curve.constant = bound.value("constant", 1.0);
        }
        for (const json& node : root.at("algorithms"))
            config.algorithms.push_back(parse_algorithm(node, config));
        config.validate();
        return config;
    } catch (const json::exception& err) {
        throw ParseError(std::string("config field error: ") + err.what());
    }
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw IoError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << file.rdbuf();
    return parse_config(buffer.str());
}

std::string kernel_spec_json(const KernelSpec& spec) {
    json node{{"family", kernel_family_name(spec.family)},
              {"lengthscale", spec.lengthscale},
              {"signal_variance", spec.signal_variance}};
    return node.dump();
}

} // namespace sparq
