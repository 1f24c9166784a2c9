#include "sparq/harness.hpp"

#include "sparq/config.hpp"
#include "sparq/errors.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace sparq;

namespace {

Point pt(double x) { return Point::Constant(1, x); }

ExperimentConfig tiny_config(long horizon = 6, long realizations = 2) {
    ExperimentConfig config;
    config.environment.kind = EnvironmentKind::SyntheticDrift;
    config.environment.lower = Vector::Constant(1, -10.0);
    config.environment.upper = Vector::Constant(1, 10.0);
    config.environment.sigma2 = 0.01;
    config.horizon = horizon;
    config.realizations = realizations;
    config.base_seed = 7;
    config.grid_resolution = 21;
    config.kernel = KernelSpec{KernelFamily::SquaredExponential, 2.0, 1.0};

    AlgorithmConfig gp;
    gp.variant = Variant::GPUCB;
    gp.kernel = *config.kernel;
    gp.sigma2 = config.environment.sigma2;
    config.algorithms = {gp};
    return config;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("sparq_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    static int& counter() {
        static int value = 0;
        return value;
    }
};

/// Minimal XML well-formedness scan: balanced tags, one root.
bool xml_well_formed(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0;
    int roots = 0;
    while (i < text.size()) {
        if (text[i] != '<') {
            ++i;
            continue;
        }
        const std::size_t end = text.find('>', i);
        if (end == std::string::npos) return false;
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.empty()) return false;
        if (tag[0] == '?' || tag[0] == '!') continue;
        if (tag[0] == '/') {
            if (stack.empty()) return false;
            if (stack.back() != tag.substr(1)) return false;
            stack.pop_back();
            if (stack.empty()) ++roots;
            continue;
        }
        const bool self_closing = tag.back() == '/';
        if (self_closing) tag.pop_back();
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n"));
        if (name.empty()) return false;
        if (!self_closing)
            stack.push_back(name);
        else if (stack.empty())
            ++roots;
    }
    return stack.empty() && roots == 1;
}

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
    std::size_t count = 0, pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

} // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("oracle actions have exactly zero regret") {
    const ExperimentConfig config = tiny_config();
    const std::vector<Point> grid = make_grid(config.environment, config.grid_resolution);
    std::vector<Point> actions;
    for (long t = 1; t <= config.horizon; ++t)
        actions.push_back(instant_optimum(config.environment, t, grid).first);
    const RegretTrace trace =
        trace_for_actions(config.environment, grid, actions, std::vector<std::size_t>{});
    for (double r : trace.instant) CHECK(r == 0.0);
    CHECK(trace.cumulative.back() == 0.0);
}

TEST_CASE("a fixed arm accumulates regret as the peak drifts") {
    ExperimentConfig config = tiny_config(40, 1);
    const std::vector<Point> grid = make_grid(config.environment, 201);
    const std::vector<Point> actions(40, pt(0.0));
    const RegretTrace trace =
        trace_for_actions(config.environment, grid, actions, std::vector<std::size_t>{});
    bool varies = false;
    for (std::size_t i = 1; i < trace.instant.size(); ++i) {
        CHECK(trace.instant[i] >= 0.0);
        if (std::abs(trace.instant[i] - trace.instant[0]) > 1e-6) varies = true;
        CHECK(trace.cumulative[i] >= trace.cumulative[i - 1]);
        CHECK(trace.cumulative[i] ==
              doctest::Approx(trace.cumulative[i - 1] + trace.instant[i]).epsilon(1e-15));
    }
    CHECK(varies);
    // once the peak has moved away the cumulative regret grows strictly
    for (std::size_t i = 20; i < trace.cumulative.size(); ++i)
        CHECK(trace.cumulative[i] > trace.cumulative[i - 1]);
}

TEST_CASE("episodes replay bit for bit") {
    const ExperimentConfig config = tiny_config();
    const std::vector<AlgorithmConfig> algorithms = resolve_algorithms(config);
    const RegretTrace a = run_episode(config, algorithms[0], 42);
    const RegretTrace b = run_episode(config, algorithms[0], 42);
    CHECK(a.instant == b.instant);
    CHECK(a.cumulative == b.cumulative);
    CHECK(a.average == b.average);
    CHECK(a.queries == b.queries);
}

TEST_CASE("batch aggregates match a by-hand recomputation") {
    ExperimentConfig config = tiny_config(5, 3);
    const BatchResult result = run_batch(config);
    REQUIRE(result.aggregates.size() == 1);
    REQUIRE(result.failures.empty());
    const AlgorithmAggregate& agg = result.aggregates[0];
    CHECK(agg.realizations == 3);

    const std::vector<AlgorithmConfig> algorithms = resolve_algorithms(config);
    for (std::size_t t = 0; t < 5; ++t) {
        double sum = 0.0;
        for (long i = 0; i < 3; ++i)
            sum += run_episode(config, algorithms[0], config.base_seed + static_cast<std::uint64_t>(i))
                       .average[t];
        CHECK(agg.mean_avg_regret[t] == doctest::Approx(sum / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("single realization has zero std") {
    ExperimentConfig config = tiny_config(4, 1);
    const BatchResult result = run_batch(config);
    const std::vector<AlgorithmConfig> algorithms = resolve_algorithms(config);
    const RegretTrace only = run_episode(config, algorithms[0], config.base_seed);
    for (std::size_t t = 0; t < 4; ++t) {
        CHECK(result.aggregates[0].mean_avg_regret[t] == doctest::Approx(only.average[t]));
        CHECK(result.aggregates[0].std_avg_regret[t] == 0.0);
    }
}

TEST_CASE("worker count does not change the batch result") {
    ExperimentConfig config = tiny_config(5, 4);
    ::setenv("SPARQ_WORKERS", "1", 1);
    const BatchResult serial = run_batch(config);
    ::setenv("SPARQ_WORKERS", "4", 1);
    const BatchResult parallel = run_batch(config);
    ::unsetenv("SPARQ_WORKERS");
    CHECK(serial.aggregates[0].mean_avg_regret == parallel.aggregates[0].mean_avg_regret);
    CHECK(serial.aggregates[0].std_avg_regret == parallel.aggregates[0].std_avg_regret);
}

TEST_CASE("theoretical bound curve shape") {
    const std::vector<long> steps = {1, 10, 1000, 1000000};
    const std::vector<double> zero = theoretical_bound(steps, 1, 0.05, 0.0);
    for (double v : zero) CHECK(v == 0.0);

    const std::vector<double> unit = theoretical_bound(steps, 1, 0.05, 1.0);
    CHECK(unit[3] < unit[2]);   // vanishing average-regret bound
    const std::vector<double> twice = theoretical_bound(steps, 1, 0.05, 2.0);
    for (std::size_t i = 0; i < steps.size(); ++i)
        CHECK(twice[i] == doctest::Approx(2.0 * unit[i]).epsilon(1e-15));
}

TEST_CASE("csv emission is byte-deterministic and round-trips") {
    ExperimentConfig config = tiny_config(3, 2);
    const BatchResult result = run_batch(config);

    TempDir dir_a, dir_b;
    emit_csv(result, dir_a.path.string());
    emit_csv(result, dir_b.path.string());

    const std::string body = read_file(dir_a.path / "gpucb.csv");
    CHECK(body == read_file(dir_b.path / "gpucb.csv"));
    CHECK(count_occurrences(body, "\n") == 4);   // header + 3 data rows
    CHECK(body.starts_with("t,mean_avg_regret,std_avg_regret,mean_queries\n"));

    // shortest round-trip floats: parsing back reproduces the aggregates exactly
    std::stringstream lines(body);
    std::string line;
    std::getline(lines, line);
    for (std::size_t t = 0; t < 3; ++t) {
        std::getline(lines, line);
        std::stringstream cells(line);
        std::string cell;
        std::getline(cells, cell, ',');
        CHECK(std::stoul(cell) == t + 1);
        std::getline(cells, cell, ',');
        CHECK(std::stod(cell) == result.aggregates[0].mean_avg_regret[t]);
        std::getline(cells, cell, ',');
        CHECK(std::stod(cell) == result.aggregates[0].std_avg_regret[t]);
        std::getline(cells, cell, ',');
        CHECK(std::stod(cell) == result.aggregates[0].mean_queries[t]);
    }

    const std::string summary = read_file(dir_a.path / "summary.csv");
    CHECK(summary.starts_with("algorithm,t,mean_avg_regret,std_avg_regret,mean_queries\n"));
    CHECK(count_occurrences(summary, "gpucb") == 1);
}

TEST_CASE("svg plot structure") {
    TempDir dir;

    BatchResult empty;
    const std::string empty_path = (dir.path / "empty.svg").string();
    emit_plot(empty, empty_path);
    const std::string empty_svg = read_file(empty_path);
    CHECK(xml_well_formed(empty_svg));
    CHECK(count_occurrences(empty_svg, "<path ") == 0);

    ExperimentConfig config = tiny_config(4, 2);
    config.bound_curve.enabled = true;
    const BatchResult result = run_batch(config);
    REQUIRE(!result.bound_curve.empty());
    const std::string path = (dir.path / "plot.svg").string();
    emit_plot(result, path);
    const std::string svg = read_file(path);
    CHECK(xml_well_formed(svg));
    // one band and one mean path per algorithm, plus the bound path
    CHECK(count_occurrences(svg, "<path ") == 2 * result.aggregates.size() + 1);
    CHECK(svg.find("iteration t") != std::string::npos);
    CHECK(svg.find("average regret") != std::string::npos);
}

TEST_CASE("config parsing applies defaults and validates") {
    const std::string json = R"({
      "environment": {"kind": "synthetic", "bounds": [-50, 50], "sigma2": 0.01},
      "horizon": 25,
      "realizations": 2,
      "base_seed": 3,
      "grid_resolution": 101,
      "delta": 0.05,
      "rkhs_bound": 2.0,
      "kernel": {"family": "se", "lengthscale": 2.0, "signal_variance": 1.0},
      "bound_curve": {"enabled": true, "constant": 1.0},
      "algorithms": [
        {"variant": "sparq", "expert_variance": 0.01,
         "queries": {"c": 6, "mcmc_scale": 1.0, "eta": 0.1}},
        {"variant": "rgpucb", "window": 23},
        {"variant": "tvgpucb", "epsilon": 0.02}
      ]
    })";
    const ExperimentConfig config = parse_config(json);
    CHECK(config.horizon == 25);
    REQUIRE(config.algorithms.size() == 3);
    CHECK(config.algorithms[0].variant == Variant::SparQ);
    CHECK(config.algorithms[0].queries.c == 6.0);
    CHECK(config.algorithms[0].expert_variance == 0.01);
    CHECK(config.algorithms[1].window == 23);
    CHECK(config.algorithms[2].epsilon == 0.02);

    const std::vector<AlgorithmConfig> resolved = resolve_algorithms(config);
    CHECK(resolved[0].kernel.lengthscale == 2.0);   // inherited shared kernel
    CHECK(resolved[2].kernel.lengthscale == 2.0);

    CHECK_THROWS_AS(parse_config("not json"), ParseError);
    CHECK_THROWS_AS(parse_config(R"({"environment": {"kind": "synthetic", "bounds": [-1, 1]},
                                     "algorithms": []})"),
                    InputError);
    CHECK_THROWS_AS(parse_config(R"({"environment": {"kind": "warp", "bounds": [-1, 1]},
                                     "algorithms": [{"variant": "gpucb"}]})"),
                    ParseError);
}

TEST_SUITE_END();
