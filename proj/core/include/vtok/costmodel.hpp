#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vtok/sampler.hpp"

namespace vtok {

struct AttentionLayerSpec {
    std::uint64_t tokens_per_frame = 1;
    std::uint64_t frames_attended = 1;  // 1 = self, 2 = sparse, F = dense
    std::uint64_t heads = 1;
    std::uint64_t head_dim = 1;
    std::uint64_t occurrences_per_unet_pass = 1;
};

struct ModelSpec {
    std::vector<AttentionLayerSpec> layers;
    std::uint64_t frames = 1;
    std::uint64_t bytes_per_element = 2;

    void validate() const;
};

// All counts are exact integers so reports are platform-identical.
struct CostReport {
    std::uint64_t foreground_token_steps = 0;
    std::uint64_t background_token_steps = 0;
    std::uint64_t blend_token_steps = 0;
    std::uint64_t total_token_steps = 0;
    std::uint64_t baseline_token_steps = 0;

    // Quadratic-attention variant: token^2 units per invocation.
    std::uint64_t foreground_quad_units = 0;
    std::uint64_t background_quad_units = 0;
    std::uint64_t blend_quad_units = 0;
    std::uint64_t total_quad_units = 0;
    std::uint64_t baseline_quad_units = 0;

    double linear_fraction() const;
    double quad_fraction() const;
};

// Score and value-mixing FLOPs: 4 * heads * n_q * n_kv * head_dim.
std::uint64_t attention_flops(const AttentionLayerSpec& layer, std::uint64_t n_q,
                              std::uint64_t n_kv);

// Bytes needed to retain every attention map over `steps` denoiser passes,
// with n_q = tokens_per_frame*frames and n_kv = tokens_per_frame*frames_attended.
std::uint64_t attention_map_storage(const ModelSpec& model, std::uint64_t steps);

// Same with key/value (and optionally query) token counts scaled by the kept
// fractions, rounded to nearest.
std::uint64_t merged_storage(const ModelSpec& model, std::uint64_t steps,
                             double kv_keep_fraction, double q_keep_fraction);

// Storage when sampling splits foreground/background phases: full-grid maps
// during blending, crop-scaled maps during the split phase. delta and total
// are token counts at the reference (largest) layer resolution.
std::uint64_t object_centric_storage(const ModelSpec& model, const SamplerConfig& cfg,
                                     std::uint64_t delta, std::uint64_t total,
                                     double kv_keep_fraction, double q_keep_fraction);

// Token-step accounting that mirrors the sampling engine's instrumented
// counts exactly. delta = foreground tokens per invocation, total = F*H*W.
CostReport oc_sampling_report(const SamplerConfig& cfg, std::uint64_t delta, std::uint64_t total);

ModelSpec model_from_json(const std::string& text);
std::string model_to_json(const ModelSpec& model);

}  // namespace vtok
