#pragma once

#include <cmath>
#include <cstdint>

namespace pmc {

/// xoshiro256** seeded through splitmix64. Fixed algorithm so that seeded
/// runs reproduce bit-identically across platforms; replica i of a master
/// seed s is seeded with splitmix64-stream(s) advanced i times (see
/// replica_seed below).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        // splitmix64 expansion of the seed into the four words of state
        std::uint64_t x = seed;
        for (auto& w : state_) w = splitmix64(x);
    }

    std::uint64_t next_u64() {
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

    /// Uniform double in [0,1), 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Exponential with the given rate (mean 1/rate).
    double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }
    std::uint64_t state_[4];
};

/// Documented replica-seed derivation: the i-th replica of master seed s
/// uses the (i+1)-th output of the splitmix64 stream started at s.
inline std::uint64_t replica_seed(std::uint64_t master, std::uint64_t replica) {
    std::uint64_t x = master;
    std::uint64_t s = 0;
    for (std::uint64_t i = 0; i <= replica; ++i) s = Rng::splitmix64(x);
    return s;
}

} // namespace pmc
