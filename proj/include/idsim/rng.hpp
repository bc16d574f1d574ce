#pragma once

#include <cstdint>

namespace idsim {

// splitmix64 finalizer: full-avalanche bijection on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

// Fold one word into a running hash state. Bijective in either argument
// with the other fixed, so distinct word sequences collide only by chance.
constexpr std::uint64_t hash_fold(std::uint64_t h, std::uint64_t w) noexcept {
    return mix64(h ^ (w + kGolden64));
}

// Counter-based pseudorandom stream. The pair (seed, stream) fully
// determines the output sequence; copies replay it. Distinct stream ids
// give statistically independent substreams, which makes trial-level
// parallel partitioning reproducible regardless of worker count.
class RngStream {
  public:
    RngStream() : RngStream(0, 0) {}
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), base_(hash_fold(mix64(seed + kGolden64), stream)) {}

    std::uint64_t next_u64() noexcept { return mix64(base_ + kGolden64 * ++counter_); }

    // Uniform on the open interval (0,1) with 53-bit resolution.
    double next_unit() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    // Independent substream addressed by (a, b). Pure function of the
    // stream identity, not of how much has been consumed.
    RngStream derive(std::uint64_t a, std::uint64_t b = 0) const noexcept {
        return RngStream(seed_, hash_fold(hash_fold(stream_, a), b));
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

  private:
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t base_ = 0;
    std::uint64_t counter_ = 0;
};

} // namespace idsim
