#pragma once

#include <string>

#include "vtok/grid.hpp"

namespace vtok {

// Grid file: little-endian u32 header (F, H, W, C) followed by F*H*W*C
// little-endian IEEE-754 binary32 values in element order.
void save_grid(const TokenGrid& grid, const std::string& path);
TokenGrid load_grid(const std::string& path);

// Mask file: little-endian u32 header (F, H, W) followed by packed bits in
// flat token order, LSB-first within each byte.
void save_mask(const ForegroundMask& mask, const std::string& path);
ForegroundMask load_mask(const std::string& path);

// One frame/channel slice as a binary 8-bit PGM, min-max scaled.
void write_pgm(const TokenGrid& grid, std::uint32_t frame, std::uint32_t channel,
               const std::string& path);

}  // namespace vtok
