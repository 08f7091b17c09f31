#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vtok/grid.hpp"

namespace vtok {

// Where a source token may look for its destination match: its own temporal
// window, or the whole clip.
enum class SearchMode { windowed, global };

// One destination token is sampled per temporal×spatial cell.
struct WindowSpec {
    std::uint32_t temporal = 1;  // frames per window
    std::uint32_t stride_y = 2;
    std::uint32_t stride_x = 2;
};

// Minimum surviving tokens per frame at a given layer resolution.
struct ResolutionCap {
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t min_tokens_per_frame = 1;
};

struct MergeConfig {
    double ratio = 0.5;  // fraction of source tokens to merge, in [0, 1]
    double eta = 1.0;    // similarity weight for foreground sources, in [0, 1]
    WindowSpec window;
    SearchMode search = SearchMode::windowed;
    bool resample_per_window = true;
    bool kv_only = true;
    std::vector<ResolutionCap> caps;
    std::uint64_t seed = 0;

    void validate() const;
};

// Recorded dst/unm/merged partition of the token range. Plans are pure data:
// they can be serialized after inversion and replayed on generation tensors.
struct MergePlan {
    std::vector<std::uint32_t> dst;  // ascending flat token ids
    std::vector<std::uint32_t> unm;  // ascending flat token ids
    std::vector<std::pair<std::uint32_t, std::uint32_t>> merges;  // (src id, dst position)
    std::vector<std::uint32_t> sizes;  // per dst; 1 when freshly built
    std::uint64_t seed = 0;

    std::uint64_t token_count() const {
        return std::uint64_t(dst.size()) + unm.size() + merges.size();
    }
    // Partition and bounds checks; throws partition_error on violation.
    void validate() const;
};

// Merged token list: unmerged sources first (ascending), then destinations in
// plan order.
struct MergedTokens {
    std::uint32_t channels = 0;
    std::vector<double> data;
    std::vector<std::uint32_t> sizes;  // per dst, after averaging

    std::size_t count() const { return data.size() / channels; }
};

// Cosine similarity normalized to [0, 1]. Throws degenerate_token_error on a
// zero-norm vector.
double sim(std::span<const double> a, std::span<const double> b);

// sim scaled by eta when the source lies in the foreground.
double eta_sim(std::span<const double> a, std::span<const double> b, bool src_in_foreground,
               double eta);

// One destination per temporal×spatial cell, uniformly random within the
// cell. With resample_per_window=false the within-cell offsets drawn for the
// first temporal window are reused in all later windows. Sorted ascending.
std::vector<std::uint32_t> sample_dst(std::uint32_t frames, std::uint32_t height,
                                      std::uint32_t width, const WindowSpec& window,
                                      bool resample_per_window, std::uint64_t seed);

// Largest rate not exceeding `ratio` that keeps at least the capped number of
// tokens alive per frame; rates pass through at uncapped resolutions.
double cap_rate(double ratio, std::uint32_t tokens_per_frame, std::uint32_t height,
                std::uint32_t width, std::span<const ResolutionCap> caps);

struct SourceMatch {
    std::uint32_t src = 0;
    std::uint32_t dst_pos = 0;  // position in the dst list
    double score = 0.0;         // eta-weighted similarity of the best destination
};

// Best destination per source under eta_sim, restricted to the source's
// temporal window under windowed search. Ties resolve to the lower dst id.
// Returned in ascending src order.
std::vector<SourceMatch> match_sources(const TokenGrid& tokens, const ForegroundMask& mask,
                                       const MergeConfig& cfg,
                                       std::span<const std::uint32_t> dst);

MergePlan build_plan(const TokenGrid& tokens, const ForegroundMask& mask, const MergeConfig& cfg);
// Same, with a caller-supplied destination set (ascending, deduplicated).
MergePlan build_plan(const TokenGrid& tokens, const ForegroundMask& mask, const MergeConfig& cfg,
                     std::vector<std::uint32_t> dst);

// Size-weighted average pooling of merged sources into their destinations.
MergedTokens apply_merge(const TokenGrid& tokens, const MergePlan& plan);

// Applies a recorded plan to another tensor of the same token count without
// recomputing similarities.
MergedTokens replay(const MergePlan& plan, const TokenGrid& tokens);

// Full-size grid: unm and dst tokens return to their origin indices, every
// merged source receives its destination's post-merge value.
TokenGrid unmerge(const MergedTokens& merged, const MergePlan& plan, std::uint32_t frames,
                  std::uint32_t height, std::uint32_t width);

struct AttentionMerge {
    MergePlan plan;
    bool query_merged = false;
    MergedTokens query;  // meaningful only when query_merged
    MergedTokens keys;
    MergedTokens values;
};

// Builds one plan from the key tokens and applies it to keys and values (and
// to queries as well when kv_only is off; callers must then unmerge outputs).
AttentionMerge merge_attention_inputs(const TokenGrid& queries, const TokenGrid& keys,
                                      const TokenGrid& values, const ForegroundMask& mask,
                                      const MergeConfig& cfg);

// JSON: {"dst":[...],"unm":[...],"merges":[[src,dstPos],...],"sizes":[...],"seed":...}
std::string serialize_plan(const MergePlan& plan);
MergePlan deserialize_plan(const std::string& text);

}  // namespace vtok
