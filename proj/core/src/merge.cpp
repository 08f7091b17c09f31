#include "vtok/merge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "vtok/rng.hpp"

namespace vtok {

void MergeConfig::validate() const {
    if (ratio < 0.0 || ratio > 1.0) {
        throw config_error("merge ratio must lie in [0, 1]");
    }
    if (eta < 0.0 || eta > 1.0) {
        throw config_error("eta must lie in [0, 1]");
    }
    if (window.temporal == 0 || window.stride_y == 0 || window.stride_x == 0) {
        throw config_error("window strides must be >= 1");
    }
    for (const auto& cap : caps) {
        if (cap.min_tokens_per_frame == 0) {
            throw config_error("cap values must be >= 1");
        }
    }
}

void MergePlan::validate() const {
    const std::uint64_t n = token_count();
    if (sizes.size() != dst.size()) {
        throw partition_error("plan sizes do not match dst count");
    }
    std::vector<std::uint8_t> seen(n, 0);
    const auto mark = [&](std::uint32_t id) {
        if (id >= n || seen[id]) {
            throw partition_error("plan does not partition the token range");
        }
        seen[id] = 1;
    };
    for (std::uint32_t id : dst) {
        mark(id);
    }
    for (std::uint32_t id : unm) {
        mark(id);
    }
    for (const auto& [src, pos] : merges) {
        mark(src);
        if (pos >= dst.size()) {
            throw partition_error("merge target position out of range");
        }
    }
    if (!std::is_sorted(dst.begin(), dst.end()) || !std::is_sorted(unm.begin(), unm.end())) {
        throw partition_error("plan dst/unm lists must be ascending");
    }
}

double sim(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.empty()) {
        throw shape_error("similarity requires equal-length nonempty vectors");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw degenerate_token_error("zero-norm token in similarity");
    }
    const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
    return 0.5 * (std::clamp(cosine, -1.0, 1.0) + 1.0);
}

double eta_sim(std::span<const double> a, std::span<const double> b, bool src_in_foreground,
               double eta) {
    const double s = sim(a, b);
    return src_in_foreground ? eta * s : s;
}

std::vector<std::uint32_t> sample_dst(std::uint32_t frames, std::uint32_t height,
                                      std::uint32_t width, const WindowSpec& window,
                                      bool resample_per_window, std::uint64_t seed) {
    const std::uint32_t s_t = std::min(window.temporal, frames);
    const std::uint32_t s_y = std::min(window.stride_y, height);
    const std::uint32_t s_x = std::min(window.stride_x, width);
    const std::uint32_t n_t = (frames + s_t - 1) / s_t;
    const std::uint32_t n_y = (height + s_y - 1) / s_y;
    const std::uint32_t n_x = (width + s_x - 1) / s_x;

    Rng rng(seed);
    struct Offset {
        std::uint32_t f, y, x;
    };
    std::vector<Offset> first_window(std::size_t(n_y) * n_x);
    std::vector<std::uint32_t> out;
    out.reserve(std::size_t(n_t) * n_y * n_x);

    for (std::uint32_t wt = 0; wt < n_t; ++wt) {
        const std::uint32_t f0 = wt * s_t;
        const std::uint32_t fs = std::min(s_t, frames - f0);
        for (std::uint32_t cy = 0; cy < n_y; ++cy) {
            const std::uint32_t y0 = cy * s_y;
            const std::uint32_t ys = std::min(s_y, height - y0);
            for (std::uint32_t cx = 0; cx < n_x; ++cx) {
                const std::uint32_t x0 = cx * s_x;
                const std::uint32_t xs = std::min(s_x, width - x0);
                Offset off;
                if (wt == 0 || resample_per_window) {
                    off = {rng.next_below(fs), rng.next_below(ys), rng.next_below(xs)};
                    if (wt == 0) {
                        first_window[std::size_t(cy) * n_x + cx] = off;
                    }
                } else {
                    off = first_window[std::size_t(cy) * n_x + cx];
                    off.f = std::min(off.f, fs - 1);  // ragged last window
                    off.y = std::min(off.y, ys - 1);
                    off.x = std::min(off.x, xs - 1);
                }
                const std::uint64_t token =
                    (std::uint64_t(f0 + off.f) * height + (y0 + off.y)) * width + (x0 + off.x);
                out.push_back(static_cast<std::uint32_t>(token));
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

double cap_rate(double ratio, std::uint32_t tokens_per_frame, std::uint32_t height,
                std::uint32_t width, std::span<const ResolutionCap> caps) {
    for (const auto& cap : caps) {
        if (cap.height != height || cap.width != width) {
            continue;
        }
        if (cap.min_tokens_per_frame >= tokens_per_frame) {
            return 0.0;
        }
        const double limit =
            double(tokens_per_frame - cap.min_tokens_per_frame) / double(tokens_per_frame);
        return std::min(ratio, limit);
    }
    return ratio;
}

namespace {

// Per-token L2-normalized copy; flags zero-norm tokens.
std::vector<double> normalize_tokens(const TokenGrid& tokens) {
    const std::uint64_t n = tokens.token_count();
    const std::uint32_t c = tokens.channels;
    std::vector<double> normed(tokens.data.size());
    for (std::uint64_t t = 0; t < n; ++t) {
        const auto tok = tokens.token(t);
        double sq = 0.0;
        for (double v : tok) {
            sq += v * v;
        }
        if (sq == 0.0) {
            throw degenerate_token_error("zero-norm token at index " + std::to_string(t));
        }
        const double inv = 1.0 / std::sqrt(sq);
        for (std::uint32_t i = 0; i < c; ++i) {
            normed[t * c + i] = tok[i] * inv;
        }
    }
    return normed;
}

const ResolutionCap* find_cap(const MergeConfig& cfg, std::uint32_t height, std::uint32_t width) {
    for (const auto& cap : cfg.caps) {
        if (cap.height == height && cap.width == width) {
            return &cap;
        }
    }
    return nullptr;
}

}  // namespace

std::vector<SourceMatch> match_sources(const TokenGrid& tokens, const ForegroundMask& mask,
                                       const MergeConfig& cfg,
                                       std::span<const std::uint32_t> dst) {
    if (!mask.dims_match(tokens)) {
        throw shape_error("mask dims do not match token dims");
    }
    if (dst.empty()) {
        throw config_error("destination set must be nonempty");
    }
    const std::uint64_t n = tokens.token_count();
    const std::uint32_t c = tokens.channels;
    const std::vector<double> normed = normalize_tokens(tokens);

    std::vector<std::uint8_t> is_dst(n, 0);
    for (std::uint32_t d : dst) {
        is_dst[d] = 1;
    }

    // Destination pools, grouped per temporal window for windowed search.
    const std::uint32_t s_t = std::min(cfg.window.temporal, tokens.frames);
    const std::uint32_t n_windows = (tokens.frames + s_t - 1) / s_t;
    const std::uint64_t frame_tokens = std::uint64_t(tokens.height) * tokens.width;
    const bool windowed = cfg.search == SearchMode::windowed;
    std::vector<std::vector<std::uint32_t>> pool(windowed ? n_windows : 1);
    for (std::uint32_t pos = 0; pos < dst.size(); ++pos) {
        const std::uint32_t frame = static_cast<std::uint32_t>(dst[pos] / frame_tokens);
        pool[windowed ? frame / s_t : 0].push_back(pos);
    }
    for (const auto& candidates : pool) {
        if (candidates.empty()) {
            throw config_error("a temporal window has no destination tokens");
        }
    }

    std::vector<SourceMatch> matches;
    matches.reserve(n - dst.size());
    for (std::uint64_t t = 0; t < n; ++t) {
        if (is_dst[t]) {
            continue;
        }
        const std::uint32_t frame = static_cast<std::uint32_t>(t / frame_tokens);
        const auto& candidates = pool[windowed ? frame / s_t : 0];
        const double weight = mask.test(t) ? cfg.eta : 1.0;
        const double* src_vec = normed.data() + t * c;

        double best = -1.0;
        std::uint32_t best_pos = 0;
        for (std::uint32_t pos : candidates) {
            const double* dst_vec = normed.data() + std::uint64_t(dst[pos]) * c;
            double dot = 0.0;
            for (std::uint32_t i = 0; i < c; ++i) {
                dot += src_vec[i] * dst_vec[i];
            }
            const double score = weight * (0.5 * (std::clamp(dot, -1.0, 1.0) + 1.0));
            if (score > best) {  // ties keep the lower dst id (pools are ascending)
                best = score;
                best_pos = pos;
            }
        }
        matches.push_back({static_cast<std::uint32_t>(t), best_pos, best});
    }
    return matches;
}

MergePlan build_plan(const TokenGrid& tokens, const ForegroundMask& mask, const MergeConfig& cfg) {
    return build_plan(tokens, mask, cfg,
                      sample_dst(tokens.frames, tokens.height, tokens.width, cfg.window,
                                 cfg.resample_per_window, cfg.seed));
}

MergePlan build_plan(const TokenGrid& tokens, const ForegroundMask& mask, const MergeConfig& cfg,
                     std::vector<std::uint32_t> dst) {
    cfg.validate();
    std::vector<SourceMatch> matches = match_sources(tokens, mask, cfg, dst);

    const std::uint64_t frame_tokens = std::uint64_t(tokens.height) * tokens.width;
    const double r_eff = cap_rate(cfg.ratio, static_cast<std::uint32_t>(frame_tokens),
                                  tokens.height, tokens.width, cfg.caps);
    const std::size_t merge_count = static_cast<std::size_t>(r_eff * double(matches.size()));

    // Rank all sources by similarity; equal scores resolve to the lower src id.
    std::vector<std::uint32_t> order(matches.size());
    for (std::uint32_t i = 0; i < matches.size(); ++i) {
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        if (matches[a].score != matches[b].score) {
            return matches[a].score > matches[b].score;
        }
        return matches[a].src < matches[b].src;
    });

    // Per-frame merge quota when a cap applies: never drop a frame below its
    // floor even if the top of the ranking concentrates there.
    std::vector<std::uint64_t> quota;
    const ResolutionCap* cap = find_cap(cfg, tokens.height, tokens.width);
    if (cap != nullptr) {
        const std::uint64_t budget =
            frame_tokens > cap->min_tokens_per_frame ? frame_tokens - cap->min_tokens_per_frame : 0;
        quota.assign(tokens.frames, budget);
    }

    std::vector<std::uint8_t> merged(matches.size(), 0);
    std::size_t taken = 0;
    for (std::uint32_t idx : order) {
        if (taken == merge_count) {
            break;
        }
        if (!quota.empty()) {
            const std::uint32_t frame =
                static_cast<std::uint32_t>(matches[idx].src / frame_tokens);
            if (quota[frame] == 0) {
                continue;
            }
            --quota[frame];
        }
        merged[idx] = 1;
        ++taken;
    }

    MergePlan plan;
    plan.seed = cfg.seed;
    plan.dst = std::move(dst);
    plan.sizes.assign(plan.dst.size(), 1);
    plan.unm.reserve(matches.size() - taken);
    plan.merges.reserve(taken);
    for (std::uint32_t i = 0; i < matches.size(); ++i) {
        if (merged[i]) {
            plan.merges.emplace_back(matches[i].src, matches[i].dst_pos);
        } else {
            plan.unm.push_back(matches[i].src);
        }
    }
    plan.validate();
    return plan;
}

MergedTokens replay(const MergePlan& plan, const TokenGrid& tokens) {
    if (plan.token_count() != tokens.token_count()) {
        throw shape_error("plan token count does not match tensor");
    }
    const std::uint32_t c = tokens.channels;
    MergedTokens out;
    out.channels = c;
    out.sizes = plan.sizes;
    out.data.resize((plan.unm.size() + plan.dst.size()) * c);

    double* cursor = out.data.data();
    for (std::uint32_t id : plan.unm) {
        const auto tok = tokens.token(id);
        std::copy(tok.begin(), tok.end(), cursor);
        cursor += c;
    }
    const std::size_t dst_base = plan.unm.size();
    std::vector<double> weight(plan.dst.size());
    for (std::size_t i = 0; i < plan.dst.size(); ++i) {
        const auto tok = tokens.token(plan.dst[i]);
        double* acc = out.data.data() + (dst_base + i) * c;
        const double size = double(plan.sizes[i]);
        for (std::uint32_t ch = 0; ch < c; ++ch) {
            acc[ch] = tok[ch] * size;
        }
        weight[i] = size;
    }
    for (const auto& [src, pos] : plan.merges) {
        const auto tok = tokens.token(src);
        double* acc = out.data.data() + (dst_base + pos) * c;
        for (std::uint32_t ch = 0; ch < c; ++ch) {
            acc[ch] += tok[ch];
        }
        weight[pos] += 1.0;
        ++out.sizes[pos];
    }
    for (std::size_t i = 0; i < plan.dst.size(); ++i) {
        double* acc = out.data.data() + (dst_base + i) * c;
        const double inv = 1.0 / weight[i];
        for (std::uint32_t ch = 0; ch < c; ++ch) {
            acc[ch] *= inv;
        }
    }
    return out;
}

MergedTokens apply_merge(const TokenGrid& tokens, const MergePlan& plan) {
    return replay(plan, tokens);
}

TokenGrid unmerge(const MergedTokens& merged, const MergePlan& plan, std::uint32_t frames,
                  std::uint32_t height, std::uint32_t width) {
    const std::uint64_t n = plan.token_count();
    if (std::uint64_t(frames) * height * width != n) {
        throw shape_error("grid dims do not match plan token count");
    }
    if (merged.count() != plan.unm.size() + plan.dst.size()) {
        throw shape_error("merged token count does not match plan");
    }
    const std::uint32_t c = merged.channels;
    TokenGrid out = TokenGrid::zeros(frames, height, width, c);
    for (std::size_t i = 0; i < plan.unm.size(); ++i) {
        const double* src = merged.data.data() + i * c;
        std::copy(src, src + c, out.token(plan.unm[i]).begin());
    }
    const std::size_t dst_base = plan.unm.size();
    for (std::size_t i = 0; i < plan.dst.size(); ++i) {
        const double* src = merged.data.data() + (dst_base + i) * c;
        std::copy(src, src + c, out.token(plan.dst[i]).begin());
    }
    for (const auto& [src_id, pos] : plan.merges) {
        const double* src = merged.data.data() + (dst_base + pos) * c;
        std::copy(src, src + c, out.token(src_id).begin());
    }
    return out;
}

AttentionMerge merge_attention_inputs(const TokenGrid& queries, const TokenGrid& keys,
                                      const TokenGrid& values, const ForegroundMask& mask,
                                      const MergeConfig& cfg) {
    if (queries.token_count() != keys.token_count() ||
        keys.token_count() != values.token_count()) {
        throw shape_error("q/k/v token counts differ");
    }
    AttentionMerge out;
    out.plan = build_plan(keys, mask, cfg);
    out.keys = apply_merge(keys, out.plan);
    out.values = replay(out.plan, values);
    if (!cfg.kv_only) {
        out.query_merged = true;
        out.query = replay(out.plan, queries);
    }
    return out;
}

std::string serialize_plan(const MergePlan& plan) {
    nlohmann::json j;
    j["dst"] = plan.dst;
    j["unm"] = plan.unm;
    auto& merges = j["merges"] = nlohmann::json::array();
    for (const auto& [src, pos] : plan.merges) {
        merges.push_back({src, pos});
    }
    j["sizes"] = plan.sizes;
    j["seed"] = plan.seed;
    return j.dump();
}

MergePlan deserialize_plan(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    MergePlan plan;
    plan.dst = j.at("dst").get<std::vector<std::uint32_t>>();
    plan.unm = j.at("unm").get<std::vector<std::uint32_t>>();
    for (const auto& entry : j.at("merges")) {
        plan.merges.emplace_back(entry.at(0).get<std::uint32_t>(),
                                 entry.at(1).get<std::uint32_t>());
    }
    plan.sizes = j.at("sizes").get<std::vector<std::uint32_t>>();
    plan.seed = j.at("seed").get<std::uint64_t>();
    plan.validate();
    return plan;
}

}  // namespace vtok
