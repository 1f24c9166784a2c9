#include "sparq/gp.hpp"
#include "sparq/rng.hpp"

#include <benchmark/benchmark.h>

using namespace sparq;

namespace {

HeteroscedasticDataset make_dataset(std::size_t n, RngStream& rng) {
    HeteroscedasticDataset data;
    data.values.resize(static_cast<Eigen::Index>(n));
    data.noise_variances.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        data.locations.push_back(Point::Constant(1, 100.0 * rng.uniform() - 50.0));
        data.values(static_cast<Eigen::Index>(i)) = rng.gaussian();
        data.noise_variances(static_cast<Eigen::Index>(i)) = 0.01 * (1.0 + rng.uniform());
    }
    return data;
}

std::vector<Point> make_query_grid(std::size_t n) {
    std::vector<Point> grid;
    grid.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        grid.push_back(Point::Constant(1, -50.0 + 100.0 * static_cast<double>(i) /
                                              static_cast<double>(n - 1)));
    return grid;
}

} // namespace

static void BM_Fit(benchmark::State& state) {
    RngStream rng(1);
    const KernelSpec spec{KernelFamily::SquaredExponential, 8.0, 4.0};
    const HeteroscedasticDataset data = make_dataset(static_cast<std::size_t>(state.range(0)), rng);
    for (auto _ : state) {
        GPPosterior post = fit(spec, data);
        benchmark::DoNotOptimize(post.weights());
    }
}
BENCHMARK(BM_Fit)->Arg(50)->Arg(150)->Arg(500);

static void BM_PosteriorGrid(benchmark::State& state) {
    RngStream rng(2);
    const KernelSpec spec{KernelFamily::SquaredExponential, 8.0, 4.0};
    const GPPosterior post =
        fit(spec, make_dataset(static_cast<std::size_t>(state.range(0)), rng));
    const std::vector<Point> grid = make_query_grid(1001);
    Vector means, variances;
    for (auto _ : state) {
        post.evaluate(grid, means, variances);
        benchmark::DoNotOptimize(means.sum());
    }
}
BENCHMARK(BM_PosteriorGrid)->Arg(50)->Arg(150)->Arg(500);

static void BM_LogMarginalLikelihood(benchmark::State& state) {
    RngStream rng(3);
    const KernelSpec spec{KernelFamily::SquaredExponential, 4.0, 1.0};
    const HeteroscedasticDataset data = make_dataset(static_cast<std::size_t>(state.range(0)), rng);
    for (auto _ : state)
        benchmark::DoNotOptimize(log_marginal_likelihood(spec, data));
}
BENCHMARK(BM_LogMarginalLikelihood)->Arg(50)->Arg(200);
