#include <benchmark/benchmark.h>

#include "ppe/encoder.hpp"
#include "ppe/grid_env.hpp"
#include "ppe/harness/experiments.hpp"
#include "ppe/masked_planning.hpp"
#include "ppe/planners.hpp"

using namespace ppe;

namespace {

GridScene solvable_scene(int size) {
    for (std::uint64_t seed = 0;; ++seed) {
        GridScene s = generate_scene(ScenarioFamily::uniform_clutter(0.2), seed, size, size);
        if (bfs_shortest(s).cost >= 0) return s;
    }
}

void BM_Bfs(benchmark::State& state) {
    const GridScene s = solvable_scene(int(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(bfs_shortest(s));
}
BENCHMARK(BM_Bfs)->Arg(30)->Arg(60)->Arg(120);

void BM_Dijkstra(benchmark::State& state) {
    const GridScene s = solvable_scene(int(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(dijkstra(s));
}
BENCHMARK(BM_Dijkstra)->Arg(30)->Arg(60)->Arg(120);

void BM_AStarManhattan(benchmark::State& state) {
    const GridScene s = solvable_scene(int(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(astar(s, {}, Heuristic::Manhattan));
}
BENCHMARK(BM_AStarManhattan)->Arg(30)->Arg(60)->Arg(120);

void BM_EncoderForward(benchmark::State& state) {
    const GridScene s = solvable_scene(int(state.range(0)));
    const EncoderModel m = init_model(default_architecture(), 1);
    const Tensor3 input = encode_input(s);
    for (auto _ : state) benchmark::DoNotOptimize(forward(m, input));
}
BENCHMARK(BM_EncoderForward)->Arg(30)->Arg(60)->Unit(benchmark::kMicrosecond);

// Oracle-region A* plus the paired full-grid run plan_with_mask always makes.
void BM_MaskedAStarOracle(benchmark::State& state) {
    const GridScene s = solvable_scene(int(state.range(0)));
    const RegionProbabilities probs = oracle_probabilities(compute_label(s));
    MaskConfig cfg;
    cfg.dilation = 1;
    for (auto _ : state) benchmark::DoNotOptimize(plan_with_mask(s, probs, cfg, PlannerKind::AStar, 1));
}
BENCHMARK(BM_MaskedAStarOracle)->Arg(60)->Arg(120);

}  // namespace

BENCHMARK_MAIN();
