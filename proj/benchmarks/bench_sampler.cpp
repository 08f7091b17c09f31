#include <benchmark/benchmark.h>

#include "vtok/rng.hpp"
#include "vtok/sampler.hpp"
#include "vtok/scene.hpp"

namespace {

struct Fixture {
    vtok::TokenGrid target;
    vtok::TokenGrid start;
    vtok::ForegroundMask mask;
    vtok::NoiseSchedule schedule = vtok::NoiseSchedule::linear(1000);
};

Fixture sampler_fixture(std::uint32_t side_tokens) {
    vtok::SceneSpec scene;
    scene.frames = 4;
    scene.height = side_tokens;
    scene.width = side_tokens;
    scene.channels = 4;
    scene.side = side_tokens / 4;
    scene.velocity_y = 1;
    scene.velocity_x = 1;
    scene.seed = 3;
    auto [target, mask] = vtok::generate(scene);
    vtok::TokenGrid start =
        vtok::TokenGrid::zeros(scene.frames, scene.height, scene.width, scene.channels);
    vtok::Rng rng(17);
    for (double& v : start.data) {
        v = rng.next_normal();
    }
    return {std::move(target), std::move(start), std::move(mask)};
}

void BM_StandardSample(benchmark::State& state) {
    const Fixture fx = sampler_fixture(std::uint32_t(state.range(0)));
    const vtok::DeltaOracleDenoiser oracle(fx.target, fx.schedule);
    const vtok::SamplerConfig cfg;
    for (auto _ : state) {
        auto out = vtok::standard_sample(oracle, fx.start, cfg, fx.schedule);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() * cfg.inference_steps * fx.start.token_count());
}
BENCHMARK(BM_StandardSample)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ObjectCentricSample(benchmark::State& state) {
    const Fixture fx = sampler_fixture(std::uint32_t(state.range(0)));
    const vtok::DeltaOracleDenoiser oracle(fx.target, fx.schedule);
    vtok::SamplerConfig cfg;
    cfg.gamma = 0.25;
    cfg.phi = double(state.range(1));
    for (auto _ : state) {
        auto out = vtok::object_centric_sample(oracle, fx.start, fx.mask, cfg, fx.schedule);
        benchmark::DoNotOptimize(out);
    }
    state.SetItemsProcessed(state.iterations() *
                            vtok::count_token_steps(cfg, fx.mask).total());
}
BENCHMARK(BM_ObjectCentricSample)
    ->Args({32, 1})
    ->Args({32, 4})
    ->Args({64, 4})
    ->Unit(benchmark::kMillisecond);

void BM_CountTokenSteps(benchmark::State& state) {
    const Fixture fx = sampler_fixture(64);
    vtok::SamplerConfig cfg;
    cfg.phi = 4.0;
    for (auto _ : state) {
        auto counts = vtok::count_token_steps(cfg, fx.mask);
        benchmark::DoNotOptimize(counts);
    }
}
BENCHMARK(BM_CountTokenSteps);

}  // namespace
