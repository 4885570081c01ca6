#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace camo {

/// Philox4x32-10 counter-based generator. A (key, counter) pair maps to four
/// independent 32-bit words, so any element of a stream can be produced
/// without generating the ones before it.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// Uniform in the open interval (0, 1) from a 32-bit word.
inline double unit_open(std::uint32_t word) noexcept
{
    return (static_cast<double>(word) + 0.5) * (1.0 / 4294967296.0);
}

/// Element `index` of the standard-normal stream identified by (seed, stream).
/// Box-Muller over Philox output, four normals per counter block.
double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept;

/// Sequential convenience wrapper: a private counter walks the Philox stream.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream)
    {}

    std::uint32_t next_u32() noexcept;
    std::uint64_t next_u64() noexcept;
    double uniform() noexcept;  // (0, 1)
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    double normal() noexcept;
    /// Uniform integer in [0, n).
    std::size_t below(std::size_t n) noexcept;

    /// Independent child stream, used to hand sub-seeds to workers.
    Rng split() noexcept { return Rng(next_u64(), stream_ + 1); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int lane_ = 4;
};

/// Mixes two values into a new seed (SplitMix64 finalizer).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace camo
