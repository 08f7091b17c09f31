#include "vtok/scene.hpp"

#include <algorithm>

#include "vtok/rng.hpp"

namespace vtok {

void SceneSpec::validate() const {
    if (side == 0) {
        throw config_error("object side must be >= 1");
    }
    if (side > height || side > width) {
        throw config_error("object does not fit in the frame");
    }
    if (channels == 0 || frames == 0 || height == 0 || width == 0) {
        throw config_error("scene dims must all be >= 1");
    }
}

namespace {

// Stateless per-element noise in [-1, 1]; hashing keeps generation order-free.
double element_noise(std::uint64_t seed, std::uint64_t element) {
    std::uint64_t x = seed ^ (element * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return double(x >> 11) * 0x1.0p-52 - 1.0;
}

double texture_value(const Texture& tex, std::uint64_t seed, std::uint64_t element,
                     std::uint32_t f, std::uint32_t y, std::uint32_t x, std::uint32_t c,
                     const SceneSpec& scene) {
    const auto frac = [](std::uint32_t v, std::uint32_t n) {
        return n > 1 ? double(v) / double(n - 1) : 0.0;
    };
    return tex.base + tex.grad_y * frac(y, scene.height) + tex.grad_x * frac(x, scene.width) +
           tex.grad_t * frac(f, scene.frames) + tex.grad_c * frac(c, scene.channels) +
           tex.noise_amp * element_noise(seed, element);
}

std::int32_t clamp_position(std::int32_t v, std::uint32_t side, std::uint32_t extent) {
    const std::int32_t hi = static_cast<std::int32_t>(extent - side);
    return std::clamp<std::int32_t>(v, 0, hi);
}

}  // namespace

std::pair<TokenGrid, ForegroundMask> generate(const SceneSpec& scene) {
    scene.validate();
    TokenGrid grid = TokenGrid::zeros(scene.frames, scene.height, scene.width, scene.channels);
    ForegroundMask mask = ForegroundMask::filled(scene.frames, scene.height, scene.width, false);

    const std::uint64_t fg_seed = substream_seed(scene.seed, "scene-fg");
    const std::uint64_t bg_seed = substream_seed(scene.seed, "scene-bg");

    for (std::uint32_t f = 0; f < scene.frames; ++f) {
        const std::int32_t oy =
            clamp_position(scene.start_y + std::int32_t(f) * scene.velocity_y, scene.side,
                           scene.height);
        const std::int32_t ox =
            clamp_position(scene.start_x + std::int32_t(f) * scene.velocity_x, scene.side,
                           scene.width);
        for (std::uint32_t y = 0; y < scene.height; ++y) {
            for (std::uint32_t x = 0; x < scene.width; ++x) {
                const bool inside = std::int32_t(y) >= oy &&
                                    y < std::uint32_t(oy) + scene.side &&
                                    std::int32_t(x) >= ox && x < std::uint32_t(ox) + scene.side;
                if (inside) {
                    mask.set(f, y, x, true);
                }
                const Texture& tex = inside ? scene.foreground : scene.background;
                const std::uint64_t seed = inside ? fg_seed : bg_seed;
                for (std::uint32_t c = 0; c < scene.channels; ++c) {
                    const std::uint64_t element =
                        grid.token_index(f, y, x) * scene.channels + c;
                    grid.at(f, y, x, c) = texture_value(tex, seed, element, f, y, x, c, scene);
                }
            }
        }
    }
    return {std::move(grid), std::move(mask)};
}

ReconMetrics merge_roundtrip_error(const TokenGrid& grid, const ForegroundMask& mask,
                                   const MergeConfig& cfg) {
    return merge_roundtrip_error(grid, mask, build_plan(grid, mask, cfg));
}

ReconMetrics merge_roundtrip_error(const TokenGrid& grid, const ForegroundMask& mask,
                                   const MergePlan& plan) {
    if (!mask.dims_match(grid)) {
        throw shape_error("mask dims do not match grid dims");
    }
    const MergedTokens merged = apply_merge(grid, plan);
    const TokenGrid recon = unmerge(merged, plan, grid.frames, grid.height, grid.width);

    double fg_sq = 0.0, bg_sq = 0.0;
    std::uint64_t fg_elems = 0, bg_elems = 0;
    for (std::uint64_t t = 0; t < grid.token_count(); ++t) {
        const auto a = grid.token(t);
        const auto b = recon.token(t);
        double sq = 0.0;
        for (std::uint32_t c = 0; c < grid.channels; ++c) {
            const double d = a[c] - b[c];
            sq += d * d;
        }
        if (mask.test(t)) {
            fg_sq += sq;
            fg_elems += grid.channels;
        } else {
            bg_sq += sq;
            bg_elems += grid.channels;
        }
    }
    ReconMetrics metrics;
    metrics.fg_mse = fg_elems > 0 ? fg_sq / double(fg_elems) : 0.0;
    metrics.bg_mse = bg_elems > 0 ? bg_sq / double(bg_elems) : 0.0;
    metrics.total_mse = (fg_sq + bg_sq) / double(fg_elems + bg_elems);
    return metrics;
}

}  // namespace vtok
