#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "vtok/errors.hpp"

namespace vtok {

// Dense frame-major token field. Element layout:
//   data[((f*H + y)*W + x)*C + c]
// The flat token order f*H*W + y*W + x is the canonical ordering shared by
// masks, merge plans and samplers.
struct TokenGrid {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::uint32_t channels = 0;
    std::vector<double> data;

    static TokenGrid zeros(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                           std::uint32_t channels);
    // Validates length and finiteness.
    static TokenGrid from_data(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                               std::uint32_t channels, std::vector<double> values);

    std::uint64_t token_count() const {
        return std::uint64_t(frames) * height * width;
    }
    std::uint64_t element_count() const { return token_count() * channels; }

    std::uint64_t token_index(std::uint32_t f, std::uint32_t y, std::uint32_t x) const {
        return (std::uint64_t(f) * height + y) * width + x;
    }

    std::span<const double> token(std::uint64_t t) const {
        return {data.data() + t * channels, channels};
    }
    std::span<double> token(std::uint64_t t) {
        return {data.data() + t * channels, channels};
    }

    double at(std::uint32_t f, std::uint32_t y, std::uint32_t x, std::uint32_t c) const {
        return data[token_index(f, y, x) * channels + c];
    }
    double& at(std::uint32_t f, std::uint32_t y, std::uint32_t x, std::uint32_t c) {
        return data[token_index(f, y, x) * channels + c];
    }

    bool same_shape(const TokenGrid& other) const {
        return frames == other.frames && height == other.height && width == other.width &&
               channels == other.channels;
    }
};

// One boolean per (f, y, x) in flat token order.
struct ForegroundMask {
    std::uint32_t frames = 0;
    std::uint32_t height = 0;
    std::uint32_t width = 0;
    std::vector<std::uint8_t> bits;

    static ForegroundMask filled(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                                 bool value);

    std::uint64_t token_count() const {
        return std::uint64_t(frames) * height * width;
    }
    std::uint64_t token_index(std::uint32_t f, std::uint32_t y, std::uint32_t x) const {
        return (std::uint64_t(f) * height + y) * width + x;
    }
    bool test(std::uint64_t t) const { return bits[t] != 0; }
    void set(std::uint32_t f, std::uint32_t y, std::uint32_t x, bool value) {
        bits[token_index(f, y, x)] = value ? 1 : 0;
    }
    std::uint64_t count_true() const;

    bool dims_match(const TokenGrid& grid) const {
        return frames == grid.frames && height == grid.height && width == grid.width;
    }

    // Spatial any-true (max-pool) reduction by an integer factor; ragged edge
    // blocks cover the remainder.
    ForegroundMask downsample(std::uint32_t factor) const;
    ForegroundMask inverted() const;
};

// Half-open token-coordinate rectangle.
struct Rect {
    std::uint32_t y0 = 0, y1 = 0, x0 = 0, x1 = 0;

    std::uint64_t area() const { return std::uint64_t(y1 - y0) * (x1 - x0); }
    bool contains(std::uint32_t y, std::uint32_t x) const {
        return y >= y0 && y < y1 && x >= x0 && x < x1;
    }
    bool operator==(const Rect&) const = default;
};

struct BoundingBox {
    std::vector<std::optional<Rect>> per_frame;

    // Smallest rectangle covering every per-frame box; nullopt if all frames
    // are empty.
    std::optional<Rect> union_rect() const;
};

// Flat token list paired with its origin indices; the result of gather and
// the unit samplers and denoisers operate on.
struct TokenSet {
    std::uint32_t channels = 0;
    std::vector<std::uint32_t> indices;  // origin flat token ids
    std::vector<double> data;            // indices.size() * channels

    std::size_t count() const { return indices.size(); }
    std::span<const double> token(std::size_t i) const {
        return {data.data() + i * channels, channels};
    }
    std::span<double> token(std::size_t i) {
        return {data.data() + i * channels, channels};
    }
};

// Tokens where mask is true, ascending flat index. Throws shape_error when
// dims differ.
TokenSet gather(const TokenGrid& grid, const ForegroundMask& mask);

// Inverse of a gather pair: the two index sets must partition the token
// range. Throws partition_error otherwise.
TokenGrid scatter(const TokenSet& a, const TokenSet& b, std::uint32_t frames,
                  std::uint32_t height, std::uint32_t width);

// Tightest per-frame box around true bits, expanded by pad and clamped to the
// frame. Returns nullopt when the mask has no true bit at all (caller decides
// whether to skip the foreground phase).
std::optional<BoundingBox> mask_to_padded_box(const ForegroundMask& mask, std::uint32_t pad);

// Rasterizes a bounding box back to a mask. With per_frame=false every frame
// uses the union rectangle.
ForegroundMask mask_from_box(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                             const BoundingBox& box, bool per_frame);

}  // namespace vtok
