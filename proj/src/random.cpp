#include "camo/random.hpp"

#include <cmath>
#include <numbers>

namespace camo {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept
{
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key) noexcept
{
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

double normal_at(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) noexcept
{
    const std::uint64_t block = index / 4;
    const int lane = static_cast<int>(index % 4);
    const auto words = philox4x32(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
         static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    const int pair = lane / 2;
    const double u1 = unit_open(words[2 * pair]);
    const double u2 = unit_open(words[2 * pair + 1]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return (lane % 2 == 0) ? r * std::cos(theta) : r * std::sin(theta);
}

std::uint32_t Rng::next_u32() noexcept
{
    if (lane_ == 4) {
        block_ = philox4x32(
            {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
             static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
            {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
        ++counter_;
        lane_ = 0;
    }
    return block_[lane_++];
}

std::uint64_t Rng::next_u64() noexcept
{
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double Rng::uniform() noexcept { return unit_open(next_u32()); }

double Rng::normal() noexcept
{
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::below(std::size_t n) noexcept
{
    if (n <= 1) {
        return 0;
    }
    // Rejection keeps the draw exactly uniform.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return static_cast<std::size_t>(v % n);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace camo
