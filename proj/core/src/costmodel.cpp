#include "vtok/costmodel.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace vtok {

void ModelSpec::validate() const {
    if (frames == 0 || bytes_per_element == 0) {
        throw config_error("model frames and bytes_per_element must be >= 1");
    }
    for (const auto& layer : layers) {
        if (layer.tokens_per_frame == 0 || layer.frames_attended == 0 || layer.heads == 0 ||
            layer.head_dim == 0 || layer.occurrences_per_unet_pass == 0) {
            throw config_error("attention layer counts must all be >= 1");
        }
    }
}

double CostReport::linear_fraction() const {
    return baseline_token_steps == 0 ? 0.0
                                     : double(total_token_steps) / double(baseline_token_steps);
}

double CostReport::quad_fraction() const {
    return baseline_quad_units == 0 ? 0.0
                                    : double(total_quad_units) / double(baseline_quad_units);
}

std::uint64_t attention_flops(const AttentionLayerSpec& layer, std::uint64_t n_q,
                              std::uint64_t n_kv) {
    if (n_q == 0 || n_kv == 0) {
        throw config_error("attention flops need n_q, n_kv >= 1");
    }
    return 4 * layer.heads * n_q * n_kv * layer.head_dim;
}

namespace {

std::uint64_t scaled(std::uint64_t count, double fraction) {
    return static_cast<std::uint64_t>(std::llround(double(count) * fraction));
}

void check_fraction(double f, const char* what) {
    if (!(f > 0.0 && f <= 1.0)) {
        throw config_error(std::string(what) + " must lie in (0, 1]");
    }
}

// Map bytes of one layer for one denoiser pass, with independently scaled
// query and key/value token counts.
std::uint64_t layer_step_bytes(const AttentionLayerSpec& layer, std::uint64_t frames,
                               std::uint64_t bytes_per_element, std::uint64_t tokens_per_frame,
                               double kv_keep, double q_keep) {
    const std::uint64_t n_q = scaled(tokens_per_frame * frames, q_keep);
    const std::uint64_t n_kv = scaled(tokens_per_frame * layer.frames_attended, kv_keep);
    return layer.occurrences_per_unet_pass * layer.heads * n_q * n_kv * bytes_per_element;
}

std::uint64_t model_step_bytes(const ModelSpec& model, double kv_keep, double q_keep) {
    std::uint64_t bytes = 0;
    for (const auto& layer : model.layers) {
        bytes += layer_step_bytes(layer, model.frames, model.bytes_per_element,
                                  layer.tokens_per_frame, kv_keep, q_keep);
    }
    return bytes;
}

struct PhaseInvocations {
    std::uint64_t foreground = 0;
    std::uint64_t background = 0;
    std::uint64_t blend = 0;
};

PhaseInvocations phase_invocations(const SamplerConfig& cfg) {
    cfg.validate();
    const int blend_start = cfg.blend_start();
    PhaseInvocations inv;
    for (int t : make_schedule(cfg.training_steps, cfg.inference_steps)) {
        if (t > blend_start) {
            ++inv.foreground;
        } else {
            ++inv.blend;
        }
    }
    inv.background =
        make_bg_schedule(cfg.training_steps, cfg.inference_steps, cfg.phi, cfg.gamma).size();
    return inv;
}

}  // namespace

std::uint64_t attention_map_storage(const ModelSpec& model, std::uint64_t steps) {
    model.validate();
    return model_step_bytes(model, 1.0, 1.0) * steps;
}

std::uint64_t merged_storage(const ModelSpec& model, std::uint64_t steps, double kv_keep_fraction,
                             double q_keep_fraction) {
    model.validate();
    check_fraction(kv_keep_fraction, "kv_keep_fraction");
    check_fraction(q_keep_fraction, "q_keep_fraction");
    return model_step_bytes(model, kv_keep_fraction, q_keep_fraction) * steps;
}

std::uint64_t object_centric_storage(const ModelSpec& model, const SamplerConfig& cfg,
                                     std::uint64_t delta, std::uint64_t total,
                                     double kv_keep_fraction, double q_keep_fraction) {
    model.validate();
    check_fraction(kv_keep_fraction, "kv_keep_fraction");
    check_fraction(q_keep_fraction, "q_keep_fraction");
    if (delta > total || total == 0) {
        throw config_error("need delta <= total and total >= 1");
    }
    const PhaseInvocations inv = phase_invocations(cfg);

    std::uint64_t fg_step = 0, bg_step = 0;
    for (const auto& layer : model.layers) {
        // Crop area scales proportionally at every layer resolution.
        const std::uint64_t tpf_fg = layer.tokens_per_frame * delta / total;
        const std::uint64_t tpf_bg = layer.tokens_per_frame - tpf_fg;
        if (tpf_fg > 0) {
            fg_step += layer_step_bytes(layer, model.frames, model.bytes_per_element, tpf_fg,
                                        kv_keep_fraction, q_keep_fraction);
        }
        if (tpf_bg > 0) {
            bg_step += layer_step_bytes(layer, model.frames, model.bytes_per_element, tpf_bg,
                                        kv_keep_fraction, q_keep_fraction);
        }
    }
    const std::uint64_t blend_step = model_step_bytes(model, kv_keep_fraction, q_keep_fraction);
    return inv.foreground * fg_step + inv.background * bg_step + inv.blend * blend_step;
}

CostReport oc_sampling_report(const SamplerConfig& cfg, std::uint64_t delta, std::uint64_t total) {
    if (delta > total) {
        throw config_error("delta cannot exceed total tokens");
    }
    const PhaseInvocations inv = phase_invocations(cfg);
    const std::uint64_t remaining = total - delta;
    const std::uint64_t steps = static_cast<std::uint64_t>(cfg.inference_steps);

    CostReport report;
    report.foreground_token_steps = inv.foreground * delta;
    report.background_token_steps = inv.background * remaining;
    report.blend_token_steps = inv.blend * total;
    report.total_token_steps = report.foreground_token_steps + report.background_token_steps +
                               report.blend_token_steps;
    report.baseline_token_steps = steps * total;

    report.foreground_quad_units = inv.foreground * delta * delta;
    report.background_quad_units = inv.background * remaining * remaining;
    report.blend_quad_units = inv.blend * total * total;
    report.total_quad_units = report.foreground_quad_units + report.background_quad_units +
                              report.blend_quad_units;
    report.baseline_quad_units = steps * total * total;
    return report;
}

ModelSpec model_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ModelSpec model;
    model.frames = j.at("frames").get<std::uint64_t>();
    model.bytes_per_element = j.value("bytes_per_element", std::uint64_t{2});
    for (const auto& entry : j.at("layers")) {
        AttentionLayerSpec layer;
        layer.tokens_per_frame = entry.at("tokens_per_frame").get<std::uint64_t>();
        layer.frames_attended = entry.at("frames_attended").get<std::uint64_t>();
        layer.heads = entry.at("heads").get<std::uint64_t>();
        layer.head_dim = entry.at("head_dim").get<std::uint64_t>();
        layer.occurrences_per_unet_pass = entry.at("occurrences_per_unet_pass").get<std::uint64_t>();
        model.layers.push_back(layer);
    }
    model.validate();
    return model;
}

std::string model_to_json(const ModelSpec& model) {
    nlohmann::json j;
    j["frames"] = model.frames;
    j["bytes_per_element"] = model.bytes_per_element;
    auto& layers = j["layers"] = nlohmann::json::array();
    for (const auto& layer : model.layers) {
        layers.push_back({{"tokens_per_frame", layer.tokens_per_frame},
                          {"frames_attended", layer.frames_attended},
                          {"heads", layer.heads},
                          {"head_dim", layer.head_dim},
                          {"occurrences_per_unet_pass", layer.occurrences_per_unet_pass}});
    }
    return j.dump(2) + "\n";
}

}  // namespace vtok
