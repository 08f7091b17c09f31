#include <benchmark/benchmark.h>

#include "vtok/merge.hpp"
#include "vtok/scene.hpp"

namespace {

std::pair<vtok::TokenGrid, vtok::ForegroundMask> bench_scene(std::uint32_t side_tokens) {
    vtok::SceneSpec scene;
    scene.frames = 8;
    scene.height = side_tokens;
    scene.width = side_tokens;
    scene.channels = 8;
    scene.side = side_tokens / 4;
    scene.start_y = 2;
    scene.start_x = 2;
    scene.velocity_y = 1;
    scene.velocity_x = 1;
    scene.seed = 7;
    return vtok::generate(scene);
}

vtok::MergeConfig bench_config(vtok::SearchMode mode) {
    vtok::MergeConfig cfg;
    cfg.ratio = 0.5;
    cfg.eta = 0.3;
    cfg.window = {1, 2, 2};
    cfg.search = mode;
    cfg.seed = 11;
    return cfg;
}

void BM_BuildPlanWindowed(benchmark::State& state) {
    const auto [grid, mask] = bench_scene(std::uint32_t(state.range(0)));
    const auto cfg = bench_config(vtok::SearchMode::windowed);
    for (auto _ : state) {
        auto plan = vtok::build_plan(grid, mask, cfg);
        benchmark::DoNotOptimize(plan);
    }
    state.SetItemsProcessed(state.iterations() * grid.token_count());
}
BENCHMARK(BM_BuildPlanWindowed)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BuildPlanGlobal(benchmark::State& state) {
    const auto [grid, mask] = bench_scene(std::uint32_t(state.range(0)));
    const auto cfg = bench_config(vtok::SearchMode::global);
    for (auto _ : state) {
        auto plan = vtok::build_plan(grid, mask, cfg);
        benchmark::DoNotOptimize(plan);
    }
    state.SetItemsProcessed(state.iterations() * grid.token_count());
}
BENCHMARK(BM_BuildPlanGlobal)->Arg(16)->Arg(32)->Unit(benchmark::kMillisecond);

void BM_MergeUnmergeRoundtrip(benchmark::State& state) {
    const auto [grid, mask] = bench_scene(std::uint32_t(state.range(0)));
    const auto plan = vtok::build_plan(grid, mask, bench_config(vtok::SearchMode::windowed));
    for (auto _ : state) {
        auto merged = vtok::apply_merge(grid, plan);
        auto back = vtok::unmerge(merged, plan, grid.frames, grid.height, grid.width);
        benchmark::DoNotOptimize(back);
    }
    state.SetItemsProcessed(state.iterations() * grid.element_count());
}
BENCHMARK(BM_MergeUnmergeRoundtrip)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Replay(benchmark::State& state) {
    const auto [grid, mask] = bench_scene(std::uint32_t(state.range(0)));
    const auto plan = vtok::build_plan(grid, mask, bench_config(vtok::SearchMode::windowed));
    for (auto _ : state) {
        auto merged = vtok::replay(plan, grid);
        benchmark::DoNotOptimize(merged);
    }
    state.SetItemsProcessed(state.iterations() * grid.element_count());
}
BENCHMARK(BM_Replay)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace
