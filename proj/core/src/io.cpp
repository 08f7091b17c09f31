#include "vtok/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace vtok {

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    unsigned char bytes[4] = {
        static_cast<unsigned char>(v & 0xff),
        static_cast<unsigned char>((v >> 8) & 0xff),
        static_cast<unsigned char>((v >> 16) & 0xff),
        static_cast<unsigned char>((v >> 24) & 0xff),
    };
    out.write(reinterpret_cast<const char*>(bytes), 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    in.read(reinterpret_cast<char*>(bytes), 4);
    if (!in) {
        throw error("truncated file header");
    }
    return std::uint32_t(bytes[0]) | (std::uint32_t(bytes[1]) << 8) |
           (std::uint32_t(bytes[2]) << 16) | (std::uint32_t(bytes[3]) << 24);
}

void put_f32(std::ostream& out, float v) {
    static_assert(sizeof(float) == 4);
    put_u32(out, std::bit_cast<std::uint32_t>(v));
}

float get_f32(std::istream& in) {
    return std::bit_cast<float>(get_u32(in));
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw error("cannot open for writing: " + path);
    }
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw error("cannot open for reading: " + path);
    }
    return in;
}

}  // namespace

void save_grid(const TokenGrid& grid, const std::string& path) {
    std::ofstream out = open_out(path);
    put_u32(out, grid.frames);
    put_u32(out, grid.height);
    put_u32(out, grid.width);
    put_u32(out, grid.channels);
    for (double v : grid.data) {
        put_f32(out, static_cast<float>(v));
    }
    if (!out) {
        throw error("write failed: " + path);
    }
}

TokenGrid load_grid(const std::string& path) {
    std::ifstream in = open_in(path);
    const std::uint32_t f = get_u32(in);
    const std::uint32_t h = get_u32(in);
    const std::uint32_t w = get_u32(in);
    const std::uint32_t c = get_u32(in);
    TokenGrid grid = TokenGrid::zeros(f, h, w, c);
    for (double& v : grid.data) {
        v = get_f32(in);
        if (!std::isfinite(v)) {
            throw error("non-finite value in grid file: " + path);
        }
    }
    if (!in) {
        throw error("truncated grid file: " + path);
    }
    return grid;
}

void save_mask(const ForegroundMask& mask, const std::string& path) {
    std::ofstream out = open_out(path);
    put_u32(out, mask.frames);
    put_u32(out, mask.height);
    put_u32(out, mask.width);
    unsigned char acc = 0;
    int used = 0;
    for (std::uint64_t t = 0; t < mask.token_count(); ++t) {
        if (mask.test(t)) {
            acc |= static_cast<unsigned char>(1u << used);
        }
        if (++used == 8) {
            out.put(static_cast<char>(acc));
            acc = 0;
            used = 0;
        }
    }
    if (used > 0) {
        out.put(static_cast<char>(acc));
    }
    if (!out) {
        throw error("write failed: " + path);
    }
}

ForegroundMask load_mask(const std::string& path) {
    std::ifstream in = open_in(path);
    const std::uint32_t f = get_u32(in);
    const std::uint32_t h = get_u32(in);
    const std::uint32_t w = get_u32(in);
    ForegroundMask mask = ForegroundMask::filled(f, h, w, false);
    const std::uint64_t n = mask.token_count();
    for (std::uint64_t t = 0; t < n; t += 8) {
        const int ch = in.get();
        if (ch == std::char_traits<char>::eof()) {
            throw error("truncated mask file: " + path);
        }
        for (int b = 0; b < 8 && t + b < n; ++b) {
            mask.bits[t + b] = (static_cast<unsigned>(ch) >> b) & 1u;
        }
    }
    return mask;
}

void write_pgm(const TokenGrid& grid, std::uint32_t frame, std::uint32_t channel,
               const std::string& path) {
    if (frame >= grid.frames || channel >= grid.channels) {
        throw shape_error("frame/channel out of range");
    }
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::uint32_t y = 0; y < grid.height; ++y) {
        for (std::uint32_t x = 0; x < grid.width; ++x) {
            const double v = grid.at(frame, y, x, channel);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double span = hi > lo ? hi - lo : 1.0;
    std::ofstream out = open_out(path);
    out << "P5\n" << grid.width << " " << grid.height << "\n255\n";
    for (std::uint32_t y = 0; y < grid.height; ++y) {
        for (std::uint32_t x = 0; x < grid.width; ++x) {
            const double v = (grid.at(frame, y, x, channel) - lo) / span;
            out.put(static_cast<char>(std::lround(v * 255.0)));
        }
    }
    if (!out) {
        throw error("write failed: " + path);
    }
}

}  // namespace vtok
