#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace oppnet {

/// SplitMix64 finalizer. Used to spread seeds and to hash counters.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a list of
/// counters (replication, content, node pair, ...). Counter-based, so the
/// derived seed never depends on evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) noexcept
{
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t c : counters)
        h = splitmix64(h ^ splitmix64(c + 0x632BE59BD9B4E019ull));
    return h;
}

/// xoshiro256** generator. Satisfies UniformRandomBitGenerator, cheap to
/// seed, so one engine per work item is affordable.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept
    {
        for (auto& s : state_) {
            seed = splitmix64(seed);
            s = seed;
        }
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept
    {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
};

} // namespace oppnet
