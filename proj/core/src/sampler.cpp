#include "vtok/sampler.hpp"

#include <algorithm>
#include <cmath>

namespace vtok {

double NoiseSchedule::alpha_bar_at(int t) const {
    if (t < 0 || t >= static_cast<int>(alpha_bar.size())) {
        throw config_error("timestep outside schedule range");
    }
    return alpha_bar[static_cast<std::size_t>(t)];
}

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) {
        throw config_error("training steps must be >= 1");
    }
    NoiseSchedule s;
    s.beta.resize(steps);
    for (int i = 0; i < steps; ++i) {
        const double frac = steps > 1 ? double(i) / double(steps - 1) : 0.0;
        s.beta[i] = beta_start + (beta_end - beta_start) * frac;
    }
    s.alpha_bar.resize(steps + 1);
    s.alpha_bar[0] = 1.0;
    for (int i = 0; i < steps; ++i) {
        s.alpha_bar[i + 1] = s.alpha_bar[i] * (1.0 - s.beta[i]);
    }
    s.validate();
    return s;
}

void NoiseSchedule::validate() const {
    if (beta.empty() || alpha_bar.size() != beta.size() + 1 || alpha_bar[0] != 1.0) {
        throw config_error("malformed noise schedule");
    }
    for (std::size_t i = 0; i < beta.size(); ++i) {
        if (!(beta[i] > 0.0 && beta[i] < 1.0)) {
            throw config_error("beta values must lie in (0, 1)");
        }
        if (i > 0 && !(beta[i] > beta[i - 1])) {
            throw config_error("beta values must increase strictly");
        }
        if (!(alpha_bar[i + 1] > 0.0 && alpha_bar[i + 1] < alpha_bar[i])) {
            throw config_error("alpha_bar must decrease strictly within (0, 1)");
        }
    }
}

namespace {

int snapped_blend_start(int training_steps, int inference_steps, double gamma) {
    const int stride = training_steps / inference_steps;
    const double raw = gamma * double(training_steps);
    if (raw >= double(training_steps)) {
        return training_steps;
    }
    // Snap down to the nearest schedule timestep; the epsilon absorbs cases
    // like 0.3*1000 landing a hair under an exact grid value.
    const int k = static_cast<int>(
        std::ceil((double(training_steps) - raw) / double(stride) - 1e-9));
    if (k > inference_steps - 1) {
        return 0;
    }
    return training_steps - k * stride;
}

TokenSet identity_token_set(const TokenGrid& grid) {
    TokenSet set;
    set.channels = grid.channels;
    set.indices.resize(grid.token_count());
    for (std::size_t i = 0; i < set.indices.size(); ++i) {
        set.indices[i] = static_cast<std::uint32_t>(i);
    }
    set.data = grid.data;
    return set;
}

}  // namespace

int SamplerConfig::background_stride() const {
    return static_cast<int>(std::llround(phi * double(stride())));
}

int SamplerConfig::blend_start() const {
    return snapped_blend_start(training_steps, inference_steps, gamma);
}

void SamplerConfig::validate() const {
    if (inference_steps < 1) {
        throw config_error("inference steps must be >= 1");
    }
    if (inference_steps > training_steps) {
        throw config_error("inference steps cannot exceed training steps");
    }
    if (gamma < 0.0 || gamma > 1.0) {
        throw config_error("gamma must lie in [0, 1]");
    }
    if (!(phi >= 1.0)) {  // admits infinity
        throw config_error("phi must be >= 1");
    }
}

DeltaOracleDenoiser::DeltaOracleDenoiser(TokenGrid target, NoiseSchedule schedule)
    : target_(std::move(target)), schedule_(std::move(schedule)) {
    schedule_.validate();
}

std::vector<double> DeltaOracleDenoiser::predict(const TokenSet& z, int t) const {
    if (t < 1) {
        throw config_error("delta oracle is undefined at t=0");
    }
    const double ab = schedule_.alpha_bar_at(t);
    const double scale = std::sqrt(ab);
    const double inv_sigma = 1.0 / std::sqrt(1.0 - ab);
    const std::uint32_t c = z.channels;
    std::vector<double> eps(z.data.size());
    for (std::size_t i = 0; i < z.count(); ++i) {
        const auto mu = target_.token(z.indices[i]);
        const auto zi = z.token(i);
        double* out = eps.data() + i * c;
        for (std::uint32_t ch = 0; ch < c; ++ch) {
            out[ch] = (zi[ch] - scale * mu[ch]) * inv_sigma;
        }
    }
    return eps;
}

std::vector<int> make_schedule(int training_steps, int inference_steps) {
    if (inference_steps < 1 || inference_steps > training_steps) {
        throw config_error("need 1 <= inference steps <= training steps");
    }
    const int stride = training_steps / inference_steps;
    std::vector<int> steps(inference_steps);
    for (int i = 0; i < inference_steps; ++i) {
        steps[i] = training_steps - i * stride;
    }
    return steps;
}

std::vector<int> make_bg_schedule(int training_steps, int inference_steps, double phi,
                                  double gamma) {
    if (!(phi >= 1.0)) {
        throw config_error("phi must be >= 1");
    }
    if (!std::isfinite(phi)) {
        return {};
    }
    const int blend_start = snapped_blend_start(training_steps, inference_steps, gamma);
    const int stride = static_cast<int>(
        std::llround(phi * double(training_steps / inference_steps)));
    std::vector<int> steps;
    for (int t = training_steps; t > blend_start; t -= stride) {
        steps.push_back(t);
    }
    return steps;
}

TokenSet ddim_step(const Denoiser& denoiser, TokenSet z, int t, int t_next,
                   const NoiseSchedule& schedule) {
    if (t_next < 0 || t <= t_next || t > schedule.training_steps()) {
        throw config_error("ddim step outside schedule range");
    }
    const std::vector<double> eps = denoiser.predict(z, t);
    const double ab_t = schedule.alpha_bar_at(t);
    const double ab_n = schedule.alpha_bar_at(t_next);
    const double sigma_t = std::sqrt(1.0 - ab_t);
    const double scale_t = std::sqrt(ab_t);
    const double sigma_n = std::sqrt(1.0 - ab_n);
    const double scale_n = std::sqrt(ab_n);
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        const double pred_x0 = (z.data[i] - sigma_t * eps[i]) / scale_t;
        z.data[i] = scale_n * pred_x0 + sigma_n * eps[i];
    }
    return z;
}

TokenGrid standard_sample(const Denoiser& denoiser, const TokenGrid& z_start,
                          const SamplerConfig& cfg, const NoiseSchedule& schedule) {
    cfg.validate();
    if (schedule.training_steps() != cfg.training_steps) {
        throw config_error("schedule length does not match sampler config");
    }
    std::vector<int> steps = make_schedule(cfg.training_steps, cfg.inference_steps);
    steps.push_back(0);
    TokenSet z = identity_token_set(z_start);
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        z = ddim_step(denoiser, std::move(z), steps[i], steps[i + 1], schedule);
    }
    TokenGrid out = z_start;
    out.data = std::move(z.data);
    return out;
}

TokenGrid object_centric_sample(const Denoiser& denoiser, const TokenGrid& z_start,
                                const ForegroundMask& mask, const SamplerConfig& cfg,
                                const NoiseSchedule& schedule,
                                const TokenGrid* background_source, SampleTrace* trace) {
    cfg.validate();
    if (!mask.dims_match(z_start)) {
        throw shape_error("mask dims do not match latent dims");
    }
    if (schedule.training_steps() != cfg.training_steps) {
        throw config_error("schedule length does not match sampler config");
    }
    if (background_source != nullptr && !background_source->same_shape(z_start)) {
        throw shape_error("background source shape does not match latent");
    }

    const int blend_start = cfg.blend_start();
    std::vector<int> steps = make_schedule(cfg.training_steps, cfg.inference_steps);
    steps.push_back(0);

    const auto box = mask_to_padded_box(mask, cfg.crop_pad);
    ForegroundMask fg_mask =
        box ? mask_from_box(z_start.frames, z_start.height, z_start.width, *box,
                            cfg.per_frame_crop)
            : ForegroundMask::filled(z_start.frames, z_start.height, z_start.width, false);
    TokenSet fg = gather(z_start, fg_mask);
    TokenSet bg = gather(z_start, fg_mask.inverted());

    const bool skip_background = !std::isfinite(cfg.phi);
    if (skip_background && blend_start == 0 && bg.count() > 0) {
        throw config_error("background would never be produced (gamma=0 with skipped background)");
    }

    SampleTrace local;
    SampleTrace& tr = trace != nullptr ? *trace : local;
    tr = SampleTrace{};
    tr.blend_start = blend_start;
    tr.background_skipped = skip_background;

    // Foreground crop at the normal rate, down to the blend start.
    for (std::size_t i = 0; i + 1 < steps.size() && steps[i] > blend_start; ++i) {
        tr.foreground_schedule.push_back(steps[i]);
        if (fg.count() > 0) {
            fg = ddim_step(denoiser, std::move(fg), steps[i], steps[i + 1], schedule);
        }
    }
    tr.token_steps.foreground = std::uint64_t(tr.foreground_schedule.size()) * fg.count();

    // Background at the accelerated rate, or held as-is when skipped.
    tr.background_landing = cfg.training_steps;
    if (skip_background) {
        if (background_source != nullptr && bg.count() > 0) {
            bg = gather(*background_source, fg_mask.inverted());
            tr.background_from_source = true;
        }
    } else {
        tr.background_schedule =
            make_bg_schedule(cfg.training_steps, cfg.inference_steps, cfg.phi, cfg.gamma);
        const int stride = cfg.background_stride();
        for (int t : tr.background_schedule) {
            const int next = std::max(t - stride, 0);
            if (bg.count() > 0) {
                bg = ddim_step(denoiser, std::move(bg), t, next, schedule);
            }
            tr.background_landing = next;
        }
    }
    tr.token_steps.background = std::uint64_t(tr.background_schedule.size()) * bg.count();

    // Merge the halves at the blend start and denoise the full grid jointly.
    TokenGrid joined = scatter(fg, bg, z_start.frames, z_start.height, z_start.width);
    TokenSet z = identity_token_set(joined);
    for (std::size_t i = 0; i + 1 < steps.size(); ++i) {
        if (steps[i] > blend_start) {
            continue;
        }
        tr.blend_schedule.push_back(steps[i]);
        z = ddim_step(denoiser, std::move(z), steps[i], steps[i + 1], schedule);
    }
    tr.token_steps.blend = std::uint64_t(tr.blend_schedule.size()) * z.count();

    joined.data = std::move(z.data);
    return joined;
}

TokenStepCounts count_token_steps(const SamplerConfig& cfg, const ForegroundMask& mask) {
    cfg.validate();
    const int blend_start = cfg.blend_start();
    const std::vector<int> steps = make_schedule(cfg.training_steps, cfg.inference_steps);

    std::uint64_t fg_invocations = 0;
    for (int t : steps) {
        fg_invocations += t > blend_start;
    }
    const std::uint64_t blend_invocations = steps.size() - fg_invocations;
    const std::uint64_t bg_invocations =
        make_bg_schedule(cfg.training_steps, cfg.inference_steps, cfg.phi, cfg.gamma).size();

    const auto box = mask_to_padded_box(mask, cfg.crop_pad);
    std::uint64_t fg_tokens = 0;
    if (box) {
        fg_tokens = mask_from_box(mask.frames, mask.height, mask.width, *box, cfg.per_frame_crop)
                        .count_true();
    }
    const std::uint64_t total = mask.token_count();

    TokenStepCounts counts;
    counts.foreground = fg_invocations * fg_tokens;
    counts.background = bg_invocations * (total - fg_tokens);
    counts.blend = blend_invocations * total;
    return counts;
}

}  // namespace vtok
