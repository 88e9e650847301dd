#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "isorec/grid.hpp"

namespace isorec {

/// Counter-based random source (Philox4x32-10). The key is the seed and the
/// upper half of the 128-bit counter is the stream id, so every (seed, stream)
/// pair addresses an independent sequence without shared state. Work that can
/// run in parallel takes its own stream; results do not depend on scheduling.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }
    /// Number of 128-bit blocks consumed so far.
    std::uint64_t position() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;
    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n) noexcept;

    /// A source on a stream derived from this one's stream id and `tag`.
    RandomSource derive(std::uint64_t tag) const noexcept;

    static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> counter,
                                               std::array<std::uint32_t, 2> key) noexcept;

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int used_ = 4;
    std::optional<double> spare_normal_;
};

/// Mixes a 64-bit value (splitmix64 finalizer).
std::uint64_t mix64(std::uint64_t x) noexcept;

/// I.i.d. standard normal image.
Image2D gaussian_noise(RandomSource& rng, std::size_t height, std::size_t width);

}  // namespace isorec
