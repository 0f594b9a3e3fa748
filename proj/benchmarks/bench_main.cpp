#include <benchmark/benchmark.h>

#include <cstdint>

#include "fdrm/claim.hpp"
#include "fdrm/driver.hpp"
#include "fdrm/mc.hpp"
#include "fdrm/time_grid.hpp"
#include "fdrm/tree.hpp"
#include "fdrm/tree_dual.hpp"

namespace {

// Backward pass over the lattice: O(N^2) nodes for a BSDE driver.
void bm_tree_solve(benchmark::State& state) {
    const auto steps = static_cast<std::size_t>(state.range(0));
    const fdrm::TreeModel tree(fdrm::TimeGrid::uniform(1.0, steps));
    const auto driver = fdrm::DriverSpec::linear({0.3}, 0.1);
    const auto claim = fdrm::ClaimSpec::terminal_brownian({1.0}, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(fdrm::tree_solve(tree, driver, claim, 1.0).root());
    state.SetComplexityN(static_cast<std::int64_t>(steps));
}

// One frozen-argument pass per evaluation level: O(N^3) for the diagonal.
void bm_tree_solve_volterra(benchmark::State& state) {
    const auto steps = static_cast<std::size_t>(state.range(0));
    const fdrm::TreeModel tree(fdrm::TimeGrid::uniform(1.0, steps));
    const auto driver = fdrm::DriverSpec::volterra_linear(
        [](double, double) { return std::vector<double>{0.2}; },
        [](double t, double s) { return 0.1 + 0.05 * (s - t); });
    const auto claim = fdrm::ClaimSpec::terminal_brownian({1.0}, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(fdrm::tree_solve(tree, driver, claim, 1.0).root());
    state.SetComplexityN(static_cast<std::int64_t>(steps));
}

// Least-squares regression backward pass, cost linear in the path count.
void bm_mc_backward(benchmark::State& state) {
    const auto paths = static_cast<std::size_t>(state.range(0));
    fdrm::McConfig config;
    config.paths = paths;
    config.seed = 17;
    const auto grid = fdrm::TimeGrid::uniform(1.0, 50);
    const auto ensemble = fdrm::PathEnsemble::simulate(grid, 1, config);
    const auto driver = fdrm::DriverSpec::linear({0.3}, 0.1);
    const auto claim = fdrm::ClaimSpec::terminal_brownian({1.0}, 1.0);
    for (auto _ : state)
        benchmark::DoNotOptimize(
            fdrm::mc_solve_bsvie(ensemble, driver, claim, 0.0, 1.0, config).value);
    state.SetComplexityN(static_cast<std::int64_t>(paths));
}

// Nodewise grid maximization of the dual objective: O(N^2 |grid|).
void bm_dual_sup(benchmark::State& state) {
    const auto steps = static_cast<std::size_t>(state.range(0));
    const fdrm::TreeModel tree(fdrm::TimeGrid::uniform(1.0, steps));
    const auto driver = fdrm::DriverSpec::entropic(1.0, [](double) { return 0.1; });
    const auto claim = fdrm::ClaimSpec::call(0.0, 1.0);
    std::vector<double> q_grid(41);
    for (std::size_t i = 0; i < q_grid.size(); ++i)
        q_grid[i] = -2.0 + 4.0 * static_cast<double>(i) / 40.0;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            fdrm::tree_dual_sup(tree, driver, claim, 0.0, 1.0, q_grid).value.front());
    state.SetComplexityN(static_cast<std::int64_t>(steps));
}

}  // namespace

BENCHMARK(bm_tree_solve)->RangeMultiplier(2)->Range(64, 1024)->Complexity();
BENCHMARK(bm_tree_solve_volterra)->RangeMultiplier(2)->Range(16, 128)->Complexity();
BENCHMARK(bm_mc_backward)
    ->RangeMultiplier(4)
    ->Range(4096, 65536)
    ->Unit(benchmark::kMillisecond)
    ->Complexity();
BENCHMARK(bm_dual_sup)->RangeMultiplier(2)->Range(16, 128)->Complexity();

BENCHMARK_MAIN();
