#pragma once

#include <cstdint>
#include <utility>

#include "vtok/grid.hpp"
#include "vtok/merge.hpp"

namespace vtok {

// Procedural value field: smooth gradients plus per-element noise, so merge
// similarity structure is nontrivial.
struct Texture {
    double base = 0.0;
    double grad_y = 0.0;
    double grad_x = 0.0;
    double grad_t = 0.0;
    double grad_c = 0.0;
    double noise_amp = 0.0;
};

// A square object of side `side` moving with integer per-frame velocity over
// a textured background; positions clamp at the frame border.
struct SceneSpec {
    std::uint32_t frames = 8;
    std::uint32_t height = 64;
    std::uint32_t width = 64;
    std::uint32_t channels = 8;

    std::uint32_t side = 16;
    std::int32_t start_y = 0;
    std::int32_t start_x = 0;
    std::int32_t velocity_y = 0;
    std::int32_t velocity_x = 0;

    // Foreground strictly positive, background strictly negative, so the two
    // populations stay separated in cosine space and merges cross over only
    // when a test asks for it.
    Texture foreground{1.6, 0.9, 0.7, 0.5, 0.35, 0.05};
    Texture background{-0.6, 0.15, 0.1, 0.1, 0.05, 0.05};

    std::uint64_t seed = 0;

    void validate() const;
};

struct ReconMetrics {
    double fg_mse = 0.0;
    double bg_mse = 0.0;
    double total_mse = 0.0;  // mask-weighted combination of the two
};

// Deterministic grid plus the exact per-frame object mask.
std::pair<TokenGrid, ForegroundMask> generate(const SceneSpec& scene);

// MSE of unmerge(apply_merge(grid)) against the original, split by mask.
ReconMetrics merge_roundtrip_error(const TokenGrid& grid, const ForegroundMask& mask,
                                   const MergeConfig& cfg);
// Same with an already-built plan.
ReconMetrics merge_roundtrip_error(const TokenGrid& grid, const ForegroundMask& mask,
                                   const MergePlan& plan);

}  // namespace vtok
