#pragma once

#include <cstdint>
#include <vector>

namespace darforge {

// splitmix64: seed expander / integer mixer (Steele, Lea, Flood 2014).
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stateless mix of two 64-bit values into one; used to derive independent
// per-item seeds from (global_seed, image_id, config...) so sweep results
// do not depend on scheduling.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a + 0x9E3779B97F4A7C15ULL * (b + 1);
    return splitmix64(s);
}

// xoshiro256** 1.0 (Blackman & Vigna), the toolkit's deterministic PRNG.
// Every stochastic path (noise draws, shuffles, weight init, pixel
// sampling) goes through this generator so runs are bit-reproducible.
class Xoshiro256 {
public:
    explicit Xoshiro256(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t next() {
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 24 bits of mantissa.
    float uniform() { return static_cast<float>(next() >> 40) * 0x1.0p-24f; }

    // Uniform in [lo, hi).
    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Uniform in [-bound, bound).
    float symmetric(float bound) { return (2.0f * uniform() - 1.0f) * bound; }

    // Uniform integer in [0, n). Modulo bias is irrelevant at toolkit scales
    // (n is tiny against 2^64) and keeps the draw sequence trivially
    // documentable.
    uint64_t below(uint64_t n) { return next() % n; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// Fisher-Yates shuffle driven by Xoshiro256; stdlib std::shuffle is
// implementation-defined, this one is pinned.
template <typename T>
void fisher_yates(std::vector<T>& v, Xoshiro256& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace darforge
