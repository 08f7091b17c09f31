#include "vtok/grid.hpp"

#include <algorithm>
#include <cmath>

namespace vtok {

namespace {

void require_nonzero_dims(std::uint32_t frames, std::uint32_t height, std::uint32_t width) {
    if (frames == 0 || height == 0 || width == 0) {
        throw shape_error("grid dimensions must all be >= 1");
    }
}

}  // namespace

TokenGrid TokenGrid::zeros(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                           std::uint32_t channels) {
    require_nonzero_dims(frames, height, width);
    if (channels == 0) {
        throw shape_error("channel count must be >= 1");
    }
    TokenGrid grid;
    grid.frames = frames;
    grid.height = height;
    grid.width = width;
    grid.channels = channels;
    grid.data.assign(std::uint64_t(frames) * height * width * channels, 0.0);
    return grid;
}

TokenGrid TokenGrid::from_data(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                               std::uint32_t channels, std::vector<double> values) {
    TokenGrid grid = zeros(frames, height, width, channels);
    if (values.size() != grid.data.size()) {
        throw shape_error("value count does not match F*H*W*C");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw shape_error("grid values must be finite");
        }
    }
    grid.data = std::move(values);
    return grid;
}

ForegroundMask ForegroundMask::filled(std::uint32_t frames, std::uint32_t height,
                                      std::uint32_t width, bool value) {
    require_nonzero_dims(frames, height, width);
    ForegroundMask mask;
    mask.frames = frames;
    mask.height = height;
    mask.width = width;
    mask.bits.assign(std::uint64_t(frames) * height * width, value ? 1 : 0);
    return mask;
}

std::uint64_t ForegroundMask::count_true() const {
    std::uint64_t n = 0;
    for (std::uint8_t b : bits) {
        n += b != 0;
    }
    return n;
}

ForegroundMask ForegroundMask::downsample(std::uint32_t factor) const {
    if (factor == 0) {
        throw config_error("downsample factor must be >= 1");
    }
    const std::uint32_t out_h = (height + factor - 1) / factor;
    const std::uint32_t out_w = (width + factor - 1) / factor;
    ForegroundMask out = filled(frames, out_h, out_w, false);
    for (std::uint32_t f = 0; f < frames; ++f) {
        for (std::uint32_t y = 0; y < height; ++y) {
            for (std::uint32_t x = 0; x < width; ++x) {
                if (test(token_index(f, y, x))) {
                    out.set(f, y / factor, x / factor, true);
                }
            }
        }
    }
    return out;
}

ForegroundMask ForegroundMask::inverted() const {
    ForegroundMask out = *this;
    for (auto& b : out.bits) {
        b = b ? 0 : 1;
    }
    return out;
}

std::optional<Rect> BoundingBox::union_rect() const {
    std::optional<Rect> acc;
    for (const auto& rect : per_frame) {
        if (!rect) {
            continue;
        }
        if (!acc) {
            acc = *rect;
        } else {
            acc->y0 = std::min(acc->y0, rect->y0);
            acc->y1 = std::max(acc->y1, rect->y1);
            acc->x0 = std::min(acc->x0, rect->x0);
            acc->x1 = std::max(acc->x1, rect->x1);
        }
    }
    return acc;
}

TokenSet gather(const TokenGrid& grid, const ForegroundMask& mask) {
    if (!mask.dims_match(grid)) {
        throw shape_error("mask dims do not match grid dims");
    }
    TokenSet out;
    out.channels = grid.channels;
    const std::uint64_t n = grid.token_count();
    out.indices.reserve(mask.count_true());
    for (std::uint64_t t = 0; t < n; ++t) {
        if (mask.test(t)) {
            out.indices.push_back(static_cast<std::uint32_t>(t));
        }
    }
    out.data.resize(out.indices.size() * grid.channels);
    double* dst = out.data.data();
    for (std::uint32_t t : out.indices) {
        const auto src = grid.token(t);
        std::copy(src.begin(), src.end(), dst);
        dst += grid.channels;
    }
    return out;
}

TokenGrid scatter(const TokenSet& a, const TokenSet& b, std::uint32_t frames,
                  std::uint32_t height, std::uint32_t width) {
    const std::uint64_t n = std::uint64_t(frames) * height * width;
    if (a.count() + b.count() != n) {
        throw partition_error("index maps do not cover the token range");
    }
    std::uint32_t channels = 0;
    if (a.count() > 0) {
        channels = a.channels;
    }
    if (b.count() > 0) {
        if (channels != 0 && b.channels != channels) {
            throw shape_error("scatter halves disagree on channel count");
        }
        channels = b.channels;
    }
    if (channels == 0) {
        throw shape_error("scatter requires at least one token");
    }

    TokenGrid out = TokenGrid::zeros(frames, height, width, channels);
    std::vector<std::uint8_t> seen(n, 0);
    const auto place = [&](const TokenSet& part) {
        for (std::size_t i = 0; i < part.count(); ++i) {
            const std::uint32_t t = part.indices[i];
            if (t >= n || seen[t]) {
                throw partition_error("index maps overlap or exceed the token range");
            }
            seen[t] = 1;
            const auto src = part.token(i);
            std::copy(src.begin(), src.end(), out.token(t).begin());
        }
    };
    place(a);
    place(b);
    return out;
}

std::optional<BoundingBox> mask_to_padded_box(const ForegroundMask& mask, std::uint32_t pad) {
    BoundingBox box;
    box.per_frame.resize(mask.frames);
    bool any = false;
    for (std::uint32_t f = 0; f < mask.frames; ++f) {
        std::uint32_t ymin = mask.height, ymax = 0, xmin = mask.width, xmax = 0;
        bool found = false;
        for (std::uint32_t y = 0; y < mask.height; ++y) {
            for (std::uint32_t x = 0; x < mask.width; ++x) {
                if (!mask.test(mask.token_index(f, y, x))) {
                    continue;
                }
                found = true;
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
            }
        }
        if (!found) {
            continue;
        }
        any = true;
        Rect rect;
        rect.y0 = ymin > pad ? ymin - pad : 0;
        rect.x0 = xmin > pad ? xmin - pad : 0;
        rect.y1 = std::min<std::uint64_t>(std::uint64_t(ymax) + 1 + pad, mask.height);
        rect.x1 = std::min<std::uint64_t>(std::uint64_t(xmax) + 1 + pad, mask.width);
        box.per_frame[f] = rect;
    }
    if (!any) {
        return std::nullopt;
    }
    return box;
}

ForegroundMask mask_from_box(std::uint32_t frames, std::uint32_t height, std::uint32_t width,
                             const BoundingBox& box, bool per_frame) {
    if (box.per_frame.size() != frames) {
        throw shape_error("bounding box frame count does not match");
    }
    ForegroundMask mask = ForegroundMask::filled(frames, height, width, false);
    const std::optional<Rect> united = box.union_rect();
    for (std::uint32_t f = 0; f < frames; ++f) {
        const std::optional<Rect>& rect = per_frame ? box.per_frame[f] : united;
        if (!rect) {
            continue;
        }
        if (rect->y1 > height || rect->x1 > width || rect->y0 >= rect->y1 ||
            rect->x0 >= rect->x1) {
            throw shape_error("bounding box exceeds mask dims");
        }
        for (std::uint32_t y = rect->y0; y < rect->y1; ++y) {
            for (std::uint32_t x = rect->x0; x < rect->x1; ++x) {
                mask.set(f, y, x, true);
            }
        }
    }
    return mask;
}

}  // namespace vtok
