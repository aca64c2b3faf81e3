// Seeded random streams for reproducible Monte Carlo work.
//
// The engine is xoshiro256++ seeded through splitmix64. Every stream keeps
// its origin seed, so independent substreams can be derived at any time
// regardless of how many draws were consumed; parallel consumers stay
// bit-reproducible. All samplers are inverse-CDF based, so a given seed
// produces the same values on any conforming platform.

#pragma once

#include <cstdint>
#include <cmath>
#include <string_view>

#include "special_math.hpp"

namespace sens {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Combine a seed with a stream key into a fresh seed.
inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t key) {
    std::uint64_t s = seed ^ (0xd6e8feb86659fd93ULL * (key + 0x632be59bd9b4e019ULL));
    std::uint64_t h = splitmix64(s);
    return h ^ splitmix64(s);
}

// Stable 64-bit string hash (FNV-1a); used to derive seeds from method names.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : origin_(seed) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on the open interval (0,1).
    double next_uniform() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_uniform();
    }

    double next_normal() { return std_normal_quantile(next_uniform()); }

    double next_normal(double mean, double sd) { return mean + sd * next_normal(); }

    double next_laplace(double mean, double scale) {
        const double u = next_uniform() - 0.5;
        const double mag = -std::log(1.0 - 2.0 * std::fabs(u));
        return mean + (u < 0.0 ? -scale : scale) * mag;
    }

    // Uniform integer in [0, n); n > 0.
    std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Independent stream derived from the origin seed, not the current state.
    Rng substream(std::uint64_t key) const { return Rng(hash_combine(origin_, key)); }

    Rng substream(std::uint64_t key1, std::uint64_t key2) const {
        return Rng(hash_combine(hash_combine(origin_, key1), key2));
    }

    std::uint64_t origin() const { return origin_; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t origin_;
    std::uint64_t state_[4];
};

} // namespace sens
