#include "sparq/kernel.hpp"
#include "sparq/rng.hpp"
#include "sparq/sparse.hpp"

#include <benchmark/benchmark.h>

using namespace sparq;

namespace {

Matrix ground_matrix(std::size_t n, double lengthscale = 4.0) {
    RngStream rng(7);
    const KernelSpec spec{KernelFamily::SquaredExponential, lengthscale, 1.0};
    std::vector<Point> points;
    points.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        points.push_back(Point::Constant(1, 100.0 * rng.uniform() - 50.0));
    return kernel_matrix(spec, points);
}

} // namespace

static void BM_GreedyInit(benchmark::State& state) {
    const Matrix gram = ground_matrix(static_cast<std::size_t>(state.range(0)));
    const auto m = static_cast<std::size_t>(state.range(1));
    for (auto _ : state)
        benchmark::DoNotOptimize(greedy_init(gram, m));
}
BENCHMARK(BM_GreedyInit)->Args({100, 10})->Args({300, 30});

static void BM_McmcChain(benchmark::State& state) {
    const Matrix gram = ground_matrix(static_cast<std::size_t>(state.range(0)));
    const auto m = static_cast<std::size_t>(state.range(1));
    SubsetState subset(gram, greedy_selection_order(gram, m));
    RngStream rng(11, 2);
    for (auto _ : state) {
        subset = mcmc_step(std::move(subset), rng);
        benchmark::DoNotOptimize(subset.log_det());
    }
}
BENCHMARK(BM_McmcChain)->Args({100, 10})->Args({300, 30})->Args({500, 38});

static void BM_SampleMdpp(benchmark::State& state) {
    const Matrix gram = ground_matrix(100);
    for (auto _ : state) {
        RngStream rng(13, 2);
        benchmark::DoNotOptimize(sample_mdpp(gram, 10, 1000, rng));
    }
}
BENCHMARK(BM_SampleMdpp);

BENCHMARK_MAIN();
