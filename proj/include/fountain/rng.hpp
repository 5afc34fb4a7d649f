#pragma once

// Portable, seedable random streams. The generator is xoshiro256** seeded
// through splitmix64 (Blackman & Vigna); both are fully specified, so a
// (session seed, column id) pair reproduces the same equation on any
// platform. Bounded integers use rejection sampling instead of
// std::uniform_int_distribution, whose output is implementation-defined.

#include <array>
#include <cstdint>
#include <limits>

namespace fountain {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Mixes two 64-bit values into one seed.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t id) noexcept {
    std::uint64_t s = base;
    std::uint64_t a = splitmix64(s);
    std::uint64_t t = id ^ a;
    return splitmix64(t);
}

class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

    void reseed(std::uint64_t seed) noexcept {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform integer in [0, bound). bound must be > 0.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = max() - (max() % bound);
        std::uint64_t x;
        do {
            x = (*this)();
        } while (x >= limit);
        return x % bound;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> s_{};
};

// Independent stream for one encoded column.
inline Rng column_stream(std::uint64_t session_seed, std::uint64_t column_id) noexcept {
    return Rng(derive_seed(session_seed, column_id));
}

} // namespace fountain
