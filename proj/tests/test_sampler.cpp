#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "vtok/sampler.hpp"

using namespace vtok;

namespace {

TokenGrid noise_grid(std::uint32_t f, std::uint32_t h, std::uint32_t w, std::uint32_t c,
                     std::uint64_t seed) {
    TokenGrid grid = TokenGrid::zeros(f, h, w, c);
    Rng rng(seed);
    for (double& v : grid.data) {
        v = rng.next_normal();
    }
    return grid;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

// Counts tokens pushed through predict; used to check the instrumentation.
class CountingDenoiser : public Denoiser {
public:
    CountingDenoiser(TokenGrid target, NoiseSchedule schedule)
        : inner_(std::move(target), std::move(schedule)) {}
    std::vector<double> predict(const TokenSet& z, int t) const override {
        tokens_seen += z.count();
        return inner_.predict(z, t);
    }
    mutable std::uint64_t tokens_seen = 0;

private:
    DeltaOracleDenoiser inner_;
};

SamplerConfig make_config(double gamma, double phi) {
    SamplerConfig cfg;
    cfg.gamma = gamma;
    cfg.phi = phi;
    return cfg;
}

}  // namespace

TEST_CASE("noise schedule invariants") {
    const NoiseSchedule s = NoiseSchedule::linear(1000);
    CHECK(s.training_steps() == 1000);
    CHECK(s.alpha_bar_at(0) == 1.0);
    CHECK(s.beta.front() == doctest::Approx(1e-4));
    CHECK(s.beta.back() == doctest::Approx(2e-2));
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar_at(t) < s.alpha_bar_at(t - 1));
        CHECK(s.alpha_bar_at(t) > 0.0);
    }
}

TEST_CASE("inference schedule construction") {
    const auto steps = make_schedule(1000, 20);
    REQUIRE(steps.size() == 20);
    CHECK(steps.front() == 1000);
    CHECK(steps.back() == 50);
    for (std::size_t i = 1; i < steps.size(); ++i) {
        CHECK(steps[i - 1] - steps[i] == 50);
    }

    const auto dense = make_schedule(16, 16);
    CHECK(dense.size() == 16);
    CHECK(dense.front() == 16);
    CHECK(dense.back() == 1);

    CHECK(make_schedule(1000, 1) == std::vector<int>{1000});
    CHECK_THROWS_AS(make_schedule(10, 11), config_error);
}

TEST_CASE("background schedule matches the foreground above the blend start") {
    const auto fg = make_schedule(1000, 20);
    const auto bg = make_bg_schedule(1000, 20, 1.0, 0.25);
    std::vector<int> fg_above;
    for (int t : fg) {
        if (t > 250) {
            fg_above.push_back(t);
        }
    }
    CHECK(bg == fg_above);
}

TEST_CASE("background schedule strides by phi and can skip entirely") {
    // T=1000, N=20, phi=2, gamma=0.25: stride 100 down to the blend start at
    // 250, landing below it at 200 after the final step.
    const auto bg = make_bg_schedule(1000, 20, 2.0, 0.25);
    CHECK(bg == std::vector<int>{1000, 900, 800, 700, 600, 500, 400, 300});
    CHECK(make_bg_schedule(1000, 20, std::numeric_limits<double>::infinity(), 0.25).empty());
}

TEST_CASE("blend start snaps to a schedule timestep") {
    CHECK(make_config(0.25, 1.0).blend_start() == 250);
    CHECK(make_config(0.30, 1.0).blend_start() == 300);
    CHECK(make_config(0.33, 1.0).blend_start() == 300);
    CHECK(make_config(1.0, 1.0).blend_start() == 1000);
    CHECK(make_config(0.0, 1.0).blend_start() == 0);
    CHECK(make_config(0.01, 1.0).blend_start() == 0);
}

TEST_CASE("delta oracle recovers the target after one full jump") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 11);
    const DeltaOracleDenoiser oracle(mu, sched);
    TokenSet z;
    z.channels = 2;
    const TokenGrid start = noise_grid(1, 4, 4, 2, 12);
    z.indices.resize(start.token_count());
    for (std::size_t i = 0; i < z.indices.size(); ++i) {
        z.indices[i] = std::uint32_t(i);
    }
    z.data = start.data;
    const TokenSet out = ddim_step(oracle, std::move(z), 1000, 0, sched);
    CHECK(max_abs_diff(out.data, mu.data) < 1e-9);
}

TEST_CASE("two consecutive oracle steps agree with one combined step") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 21);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(1, 4, 4, 2, 22);

    const auto as_set = [&](const TokenGrid& grid) {
        TokenSet set;
        set.channels = grid.channels;
        set.indices.resize(grid.token_count());
        for (std::size_t i = 0; i < set.indices.size(); ++i) {
            set.indices[i] = std::uint32_t(i);
        }
        set.data = grid.data;
        return set;
    };
    const TokenSet two =
        ddim_step(oracle, ddim_step(oracle, as_set(start), 1000, 950, sched), 950, 900, sched);
    const TokenSet one = ddim_step(oracle, as_set(start), 1000, 900, sched);
    CHECK(max_abs_diff(two.data, one.data) < 1e-9);
}

TEST_CASE("standard sampling recovers a point-mass target") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 4, 4, 3, 31);
    const DeltaOracleDenoiser oracle(mu, sched);
    SamplerConfig cfg;
    const TokenGrid z0 = standard_sample(oracle, noise_grid(2, 4, 4, 3, 32), cfg, sched);
    CHECK(max_abs_diff(z0.data, mu.data) < 1e-6);

    // Single-step jump.
    cfg.inference_steps = 1;
    const TokenGrid one = standard_sample(oracle, noise_grid(2, 4, 4, 3, 33), cfg, sched);
    CHECK(max_abs_diff(one.data, mu.data) < 1e-6);
}

TEST_CASE("standard sampling is deterministic") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 41);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(1, 4, 4, 2, 42);
    const SamplerConfig cfg;
    const TokenGrid a = standard_sample(oracle, start, cfg, sched);
    const TokenGrid b = standard_sample(oracle, start, cfg, sched);
    CHECK(a.data == b.data);
}

TEST_CASE("gamma=1 object-centric sampling equals standard bit-exactly") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 6, 6, 2, 51);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(2, 6, 6, 2, 52);
    const auto mask = oracles::random_mask(2, 6, 6, 53, 0.2);
    const SamplerConfig cfg = make_config(1.0, 4.0);
    const TokenGrid standard = standard_sample(oracle, start, cfg, sched);
    const TokenGrid oc = object_centric_sample(oracle, start, mask, cfg, sched);
    CHECK(oc.data == standard.data);
}

TEST_CASE("phi=1 object-centric sampling equals standard under a tokenwise denoiser") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 6, 6, 2, 61);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(2, 6, 6, 2, 62);
    const auto mask = oracles::random_mask(2, 6, 6, 63, 0.25);
    const SamplerConfig cfg = make_config(0.25, 1.0);
    const TokenGrid standard = standard_sample(oracle, start, cfg, sched);
    const TokenGrid oc = object_centric_sample(oracle, start, mask, cfg, sched);
    CHECK(oc.data == standard.data);
}

TEST_CASE("object-centric sampling recovers the target for any gamma and phi") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 8, 8, 2, 71);
    const DeltaOracleDenoiser oracle(mu, sched);
    const double inf = std::numeric_limits<double>::infinity();
    std::uint64_t seed = 72;
    for (const double gamma : {0.05, 0.25, 0.5}) {
        for (const double phi : {1.0, 2.0, 4.0, inf}) {
            const TokenGrid start = noise_grid(2, 8, 8, 2, ++seed);
            const auto mask = oracles::random_mask(2, 8, 8, ++seed, 0.2);
            const SamplerConfig cfg = make_config(gamma, phi);
            const TokenGrid z0 = object_centric_sample(oracle, start, mask, cfg, sched);
            CHECK(max_abs_diff(z0.data, mu.data) < 1e-6);
        }
    }
}

TEST_CASE("empty mask degenerates to the background-only path") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 81);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(1, 4, 4, 2, 82);
    const auto empty = ForegroundMask::filled(1, 4, 4, false);
    SampleTrace trace;
    const TokenGrid z0 = object_centric_sample(oracle, start, empty, make_config(0.25, 2.0),
                                               sched, nullptr, &trace);
    CHECK(max_abs_diff(z0.data, mu.data) < 1e-6);
    CHECK(trace.token_steps.foreground == 0);
    CHECK(trace.token_steps.background > 0);
}

TEST_CASE("skipped background with no blending is rejected") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 91);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(1, 4, 4, 2, 92);
    ForegroundMask mask = ForegroundMask::filled(1, 4, 4, false);
    mask.set(0, 1, 1, true);
    const SamplerConfig cfg = make_config(0.0, std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(object_centric_sample(oracle, start, mask, cfg, sched), config_error);
}

TEST_CASE("skipped background holds the source latent until blending") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(1, 4, 4, 2, 101);
    const TokenGrid source = oracles::random_grid(1, 4, 4, 2, 102);
    const TokenGrid start = noise_grid(1, 4, 4, 2, 103);
    ForegroundMask mask = ForegroundMask::filled(1, 4, 4, false);
    mask.set(0, 1, 1, true);
    const SamplerConfig cfg = make_config(0.25, std::numeric_limits<double>::infinity());

    // Records the grid seen at the first blend invocation.
    class Probe : public Denoiser {
    public:
        Probe(TokenGrid target, NoiseSchedule schedule, int t_watch)
            : inner_(std::move(target), std::move(schedule)), t_watch_(t_watch) {}
        std::vector<double> predict(const TokenSet& z, int t) const override {
            if (t == t_watch_ && first_.empty()) {
                first_ = z.data;
            }
            return inner_.predict(z, t);
        }
        mutable std::vector<double> first_;

    private:
        DeltaOracleDenoiser inner_;
        int t_watch_;
    };
    const Probe probe(mu, sched, cfg.blend_start());

    SampleTrace trace;
    object_centric_sample(probe, start, mask, cfg, sched, &source, &trace);
    CHECK(trace.background_skipped);
    CHECK(trace.background_from_source);
    REQUIRE(!probe.first_.empty());
    // At the blend start every background token still equals the source.
    const auto fg_mask =
        mask_from_box(1, 4, 4, *mask_to_padded_box(mask, cfg.crop_pad), cfg.per_frame_crop);
    for (std::uint64_t t = 0; t < source.token_count(); ++t) {
        if (fg_mask.test(t)) {
            continue;
        }
        for (std::uint32_t c = 0; c < 2; ++c) {
            CHECK(probe.first_[t * 2 + c] == source.token(t)[c]);
        }
    }
}

TEST_CASE("trace schedules are strictly decreasing and meet at the blend start") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 6, 6, 2, 111);
    const DeltaOracleDenoiser oracle(mu, sched);
    const TokenGrid start = noise_grid(2, 6, 6, 2, 112);
    const auto mask = oracles::random_mask(2, 6, 6, 113, 0.3);
    const SamplerConfig cfg = make_config(0.25, 2.0);
    SampleTrace trace;
    object_centric_sample(oracle, start, mask, cfg, sched, nullptr, &trace);

    const auto strictly_decreasing = [](const std::vector<int>& v) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            if (v[i] >= v[i - 1]) {
                return false;
            }
        }
        return true;
    };
    CHECK(strictly_decreasing(trace.foreground_schedule));
    CHECK(strictly_decreasing(trace.background_schedule));
    CHECK(strictly_decreasing(trace.blend_schedule));
    CHECK(trace.blend_start == 250);
    CHECK(trace.foreground_schedule.back() == 250 + cfg.stride());
    CHECK(trace.blend_schedule.front() == 250);
    CHECK(trace.background_landing == 200);  // overshoot recorded, state used as-is
}

TEST_CASE("token step counts: full-grid blending cases") {
    // gamma=1: everything is blend work.
    ForegroundMask mask = ForegroundMask::filled(2, 8, 8, true);
    TokenStepCounts all_blend = count_token_steps(make_config(1.0, 2.0), mask);
    CHECK(all_blend.foreground == 0);
    CHECK(all_blend.background == 0);
    CHECK(all_blend.blend == 20ull * 128);

    // Full-frame mask, background skipped: 75% foreground, 25% blend.
    const SamplerConfig cfg = make_config(0.25, std::numeric_limits<double>::infinity());
    const TokenStepCounts counts = count_token_steps(cfg, mask);
    CHECK(counts.foreground == 15ull * 128);
    CHECK(counts.background == 0);
    CHECK(counts.blend == 5ull * 128);
}

TEST_CASE("token step fraction for a quarter-area box") {
    // 16x16 box on a single 64x64 frame, background skipped:
    // 0.25 + 0.75 * (256/4096) = 0.296875 of the baseline.
    ForegroundMask mask = ForegroundMask::filled(1, 64, 64, false);
    for (std::uint32_t y = 10; y < 26; ++y) {
        for (std::uint32_t x = 20; x < 36; ++x) {
            mask.set(0, y, x, true);
        }
    }
    const SamplerConfig cfg = make_config(0.25, std::numeric_limits<double>::infinity());
    const TokenStepCounts counts = count_token_steps(cfg, mask);
    const double fraction = double(counts.total()) / double(20ull * 4096);
    CHECK(fraction == doctest::Approx(0.296875).epsilon(1e-12));
}

TEST_CASE("instrumented run matches count_token_steps exactly") {
    const NoiseSchedule sched = NoiseSchedule::linear(1000);
    const TokenGrid mu = oracles::random_grid(2, 8, 8, 2, 121);
    const TokenGrid start = noise_grid(2, 8, 8, 2, 122);
    std::uint64_t seed = 123;
    for (const double gamma : {0.1, 0.25, 0.5, 1.0}) {
        for (const double phi : {1.0, 2.0, 3.0, std::numeric_limits<double>::infinity()}) {
            const auto mask = oracles::random_mask(2, 8, 8, ++seed, 0.15);
            const SamplerConfig cfg = make_config(gamma, phi);
            const CountingDenoiser counting(mu, sched);
            SampleTrace trace;
            object_centric_sample(counting, start, mask, cfg, sched, nullptr, &trace);
            const TokenStepCounts expected = count_token_steps(cfg, mask);
            CHECK(trace.token_steps.foreground == expected.foreground);
            CHECK(trace.token_steps.background == expected.background);
            CHECK(trace.token_steps.blend == expected.blend);
            CHECK(counting.tokens_seen == expected.total());
        }
    }
}

TEST_CASE("token steps shrink with phi and grow with gamma") {
    const auto mask = oracles::random_mask(2, 8, 8, 131, 0.2);
    std::uint64_t previous = std::numeric_limits<std::uint64_t>::max();
    for (const double phi : {1.0, 2.0, 4.0, 8.0, std::numeric_limits<double>::infinity()}) {
        const std::uint64_t total = count_token_steps(make_config(0.25, phi), mask).total();
        CHECK(total <= previous);
        previous = total;
    }
    previous = 0;
    for (const double gamma : {0.05, 0.25, 0.5, 0.75, 1.0}) {
        const std::uint64_t total = count_token_steps(make_config(gamma, 2.0), mask).total();
        CHECK(total >= previous);
        previous = total;
    }
}
