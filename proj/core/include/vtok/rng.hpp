#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace vtok {

// Deterministic random helpers. mt19937_64 raw output is pinned by the
// standard; the bounded/uniform/normal mappings are implemented here because
// std distributions are implementation-defined and reports must be
// reproducible byte-for-byte.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, bound), bound >= 1. Fixed multiply-shift mapping.
    std::uint32_t next_below(std::uint32_t bound);

    // Uniform in [0, 1), 53-bit resolution.
    double next_unit();

    // Standard normal via Box-Muller.
    double next_normal();

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Derives an independent seed for a named stream, so adding one consumer does
// not shift the draws of another.
std::uint64_t substream_seed(std::uint64_t seed, std::string_view name);

// Indexed variant for numbered instances within a stream.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

// FNV-1a over arbitrary bytes; also used for config hashes in reports.
std::uint64_t fnv1a64(const void* data, std::size_t size);

}  // namespace vtok
