#include "vtok/rng.hpp"

#include <cmath>
#include <numbers>

namespace vtok {

std::uint32_t Rng::next_below(std::uint32_t bound) {
    const std::uint64_t x = next_u64();
    return static_cast<std::uint32_t>((static_cast<unsigned __int128>(x) * bound) >> 64);
}

double Rng::next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::next_normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = next_unit();
    if (u1 <= 0.0) {
        u1 = 0x1.0p-53;
    }
    const double u2 = next_unit();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= bytes[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::string_view name) {
    return mix64(seed ^ fnv1a64(name.data(), name.size()));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    return mix64(seed ^ (salt * 0x9e3779b97f4a7c15ULL + 0x1d8e4e27c47d124fULL));
}

}  // namespace vtok
