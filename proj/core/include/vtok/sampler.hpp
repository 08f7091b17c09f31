#pragma once

#include <cstdint>
#include <vector>

#include "vtok/grid.hpp"

namespace vtok {

// Forward-process parameters. alpha_bar[0] is defined as 1 so stepping to
// t=0 lands on the clean prediction.
struct NoiseSchedule {
    std::vector<double> beta;       // beta[t-1] for t = 1..T, strictly increasing in (0,1)
    std::vector<double> alpha_bar;  // alpha_bar[t] for t = 0..T, strictly decreasing

    int training_steps() const { return static_cast<int>(beta.size()); }
    double alpha_bar_at(int t) const;

    static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 2e-2);
    void validate() const;
};

struct SamplerConfig {
    int training_steps = 1000;  // T
    int inference_steps = 20;   // N
    double gamma = 0.25;        // blending steps ratio in [0, 1]
    double phi = 1.0;           // background acceleration >= 1; infinity skips background
    std::uint64_t seed = 0;
    std::uint32_t crop_pad = 0;    // padding around the foreground box
    bool per_frame_crop = false;   // default: one union box across frames

    int stride() const { return training_steps / inference_steps; }
    int background_stride() const;
    // gamma*T snapped down to an actual schedule timestep.
    int blend_start() const;
    void validate() const;
};

class Denoiser {
public:
    virtual ~Denoiser() = default;
    // Noise prediction per token, same element count as z. The token set
    // carries origin indices so implementations may condition on position.
    virtual std::vector<double> predict(const TokenSet& z, int t) const = 0;
};

// Exact optimal prediction when the data distribution is a point mass:
//   eps = (z_t - sqrt(alpha_bar_t) * target) / sqrt(1 - alpha_bar_t)
class DeltaOracleDenoiser : public Denoiser {
public:
    DeltaOracleDenoiser(TokenGrid target, NoiseSchedule schedule);
    std::vector<double> predict(const TokenSet& z, int t) const override;
    const TokenGrid& target() const { return target_; }

private:
    TokenGrid target_;
    NoiseSchedule schedule_;
};

// Descending inference timesteps [T, T-dT, ..., T-(N-1)dT]; length N.
std::vector<int> make_schedule(int training_steps, int inference_steps);

// Background invocation timesteps: from T with stride phi*dT while above the
// blend start. Empty when phi is infinite (background skipped).
std::vector<int> make_bg_schedule(int training_steps, int inference_steps, double phi,
                                  double gamma);

// Deterministic (variance-zero) update from t to t_next.
TokenSet ddim_step(const Denoiser& denoiser, TokenSet z, int t, int t_next,
                   const NoiseSchedule& schedule);

TokenGrid standard_sample(const Denoiser& denoiser, const TokenGrid& z_start,
                          const SamplerConfig& cfg, const NoiseSchedule& schedule);

struct TokenStepCounts {
    std::uint64_t foreground = 0;
    std::uint64_t background = 0;
    std::uint64_t blend = 0;
    std::uint64_t total() const { return foreground + background + blend; }
};

struct SampleTrace {
    std::vector<int> foreground_schedule;  // invocation timesteps
    std::vector<int> background_schedule;
    std::vector<int> blend_schedule;
    int blend_start = 0;
    int background_landing = 0;  // timestep of the last computed background state
    bool background_skipped = false;
    bool background_from_source = false;
    TokenStepCounts token_steps;
};

// Foreground crop at full step rate, background at stride phi*dT (or held
// as-is when phi is infinite, taking background_source when provided), merged
// at the blend start and denoised jointly to zero.
TokenGrid object_centric_sample(const Denoiser& denoiser, const TokenGrid& z_start,
                                const ForegroundMask& mask, const SamplerConfig& cfg,
                                const NoiseSchedule& schedule,
                                const TokenGrid* background_source = nullptr,
                                SampleTrace* trace = nullptr);

// Exact token*invocation units each phase would consume, without running a
// denoiser.
TokenStepCounts count_token_steps(const SamplerConfig& cfg, const ForegroundMask& mask);

}  // namespace vtok
