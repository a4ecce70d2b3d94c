#pragma once

#include <cstdint>
#include <limits>

namespace bpre {

// xoshiro256** with splitmix64 seeding. Satisfies UniformRandomBitGenerator,
// so the <random> distributions can run on top of it.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<std::uint64_t>::max(); }

    result_type operator()() {
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

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    static constexpr std::uint64_t rotl(std::uint64_t v, int k) {
        return (v << k) | (v >> (64 - k));
    }

    std::uint64_t state_[4];
};

// Counter-derived substream: replicate i of a run seeded with `base` always
// sees the same generator, independent of scheduling.
inline Rng substream(std::uint64_t base, std::uint64_t index) {
    std::uint64_t mixed = base;
    mixed ^= 0x2545F4914F6CDD1Dull * (index + 1);
    mixed ^= mixed >> 29;
    mixed *= 0xFF51AFD7ED558CCDull;
    mixed ^= mixed >> 32;
    return Rng(mixed);
}

}  // namespace bpre
