// Independent reference implementations used to cross-check the library.
// Everything here recomputes results from first principles via the public
// types only; none of it shares code with the library internals it checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "vtok/grid.hpp"
#include "vtok/merge.hpp"
#include "vtok/rng.hpp"

namespace oracles {

// Exhaustive best-match search over all src x dst pairs, then ranked
// selection with the same tie-break (higher score first, then lower src id)
// and the per-frame floor when a cap matches the resolution.
inline vtok::MergePlan brute_force_plan(const vtok::TokenGrid& tokens,
                                        const vtok::ForegroundMask& mask,
                                        const vtok::MergeConfig& cfg,
                                        std::vector<std::uint32_t> dst) {
    const std::uint64_t n = tokens.token_count();
    const std::uint32_t c = tokens.channels;
    const std::uint64_t frame_tokens = std::uint64_t(tokens.height) * tokens.width;

    std::vector<std::uint8_t> is_dst(n, 0);
    for (std::uint32_t d : dst) {
        is_dst[d] = 1;
    }

    struct Candidate {
        std::uint32_t src;
        std::uint32_t dst_pos;
        double score;
    };
    std::vector<Candidate> candidates;
    for (std::uint64_t s = 0; s < n; ++s) {
        if (is_dst[s]) {
            continue;
        }
        const std::uint32_t s_frame = std::uint32_t(s / frame_tokens);
        const std::uint32_t s_window = s_frame / std::min(cfg.window.temporal, tokens.frames);
        const double weight = mask.test(s) ? cfg.eta : 1.0;

        double best = -1.0;
        std::uint32_t best_pos = 0;
        for (std::uint32_t pos = 0; pos < dst.size(); ++pos) {
            const std::uint32_t d = dst[pos];
            if (cfg.search == vtok::SearchMode::windowed) {
                const std::uint32_t d_window = std::uint32_t(d / frame_tokens) /
                                               std::min(cfg.window.temporal, tokens.frames);
                if (d_window != s_window) {
                    continue;
                }
            }
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (std::uint32_t ch = 0; ch < c; ++ch) {
                const double a = tokens.data[s * c + ch];
                const double b = tokens.data[std::uint64_t(d) * c + ch];
                dot += a * b;
                na += a * a;
                nb += b * b;
            }
            const double cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
            const double score = weight * (0.5 * (cosine + 1.0));
            if (score > best) {
                best = score;
                best_pos = pos;
            }
        }
        candidates.push_back({std::uint32_t(s), best_pos, best});
    }

    double r_eff = cfg.ratio;
    const vtok::ResolutionCap* cap = nullptr;
    for (const auto& entry : cfg.caps) {
        if (entry.height == tokens.height && entry.width == tokens.width) {
            cap = &entry;
        }
    }
    if (cap != nullptr) {
        if (cap->min_tokens_per_frame >= frame_tokens) {
            r_eff = 0.0;
        } else {
            r_eff = std::min(r_eff, double(frame_tokens - cap->min_tokens_per_frame) /
                                        double(frame_tokens));
        }
    }
    const std::size_t want = std::size_t(r_eff * double(candidates.size()));

    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (candidates[a].score != candidates[b].score) {
            return candidates[a].score > candidates[b].score;
        }
        return candidates[a].src < candidates[b].src;
    });

    std::vector<std::uint64_t> quota;
    if (cap != nullptr) {
        quota.assign(tokens.frames, frame_tokens > cap->min_tokens_per_frame
                                        ? frame_tokens - cap->min_tokens_per_frame
                                        : 0);
    }
    std::vector<std::uint8_t> chosen(candidates.size(), 0);
    std::size_t taken = 0;
    for (std::size_t idx : order) {
        if (taken == want) {
            break;
        }
        if (!quota.empty()) {
            const std::uint32_t frame = std::uint32_t(candidates[idx].src / frame_tokens);
            if (quota[frame] == 0) {
                continue;
            }
            --quota[frame];
        }
        chosen[idx] = 1;
        ++taken;
    }

    vtok::MergePlan plan;
    plan.seed = cfg.seed;
    plan.dst = std::move(dst);
    plan.sizes.assign(plan.dst.size(), 1);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        if (chosen[i]) {
            plan.merges.emplace_back(candidates[i].src, candidates[i].dst_pos);
        } else {
            plan.unm.push_back(candidates[i].src);
        }
    }
    return plan;
}

inline bool plans_equal(const vtok::MergePlan& a, const vtok::MergePlan& b) {
    return a.dst == b.dst && a.unm == b.unm && a.merges == b.merges && a.sizes == b.sizes;
}

// Size-weighted per-channel sum; conserved by average pooling.
inline std::vector<double> weighted_channel_sums(const vtok::TokenGrid& grid) {
    std::vector<double> sums(grid.channels, 0.0);
    for (std::uint64_t t = 0; t < grid.token_count(); ++t) {
        const auto tok = grid.token(t);
        for (std::uint32_t c = 0; c < grid.channels; ++c) {
            sums[c] += tok[c];
        }
    }
    return sums;
}

inline std::vector<double> weighted_channel_sums(const vtok::MergedTokens& merged,
                                                 const vtok::MergePlan& plan) {
    std::vector<double> sums(merged.channels, 0.0);
    const std::size_t dst_base = plan.unm.size();
    for (std::size_t i = 0; i < merged.count(); ++i) {
        const double weight = i < dst_base ? 1.0 : double(merged.sizes[i - dst_base]);
        for (std::uint32_t c = 0; c < merged.channels; ++c) {
            sums[c] += merged.data[i * merged.channels + c] * weight;
        }
    }
    return sums;
}

// Deterministic random inputs for property tests.
inline vtok::TokenGrid random_grid(std::uint32_t f, std::uint32_t h, std::uint32_t w,
                                   std::uint32_t c, std::uint64_t seed, double lo = -1.0,
                                   double hi = 1.0) {
    vtok::TokenGrid grid = vtok::TokenGrid::zeros(f, h, w, c);
    vtok::Rng rng(seed);
    for (double& v : grid.data) {
        v = lo + (hi - lo) * rng.next_unit();
    }
    return grid;
}

inline vtok::ForegroundMask random_mask(std::uint32_t f, std::uint32_t h, std::uint32_t w,
                                        std::uint64_t seed, double density = 0.5) {
    vtok::ForegroundMask mask = vtok::ForegroundMask::filled(f, h, w, false);
    vtok::Rng rng(seed);
    for (auto& b : mask.bits) {
        b = rng.next_unit() < density ? 1 : 0;
    }
    return mask;
}

}  // namespace oracles
