#pragma once

#include <cstdint>

namespace hg {

// 64-bit linear congruential generator (Knuth MMIX multiplier/increment):
//
//   s <- s * 6364136223846793005 + 1442695040888963407   (mod 2^64)
//
// Seeds are scrambled once through the splitmix64 finalizer so that nearby
// seeds give unrelated streams. Floats come from the top 24 bits of the
// state, so every value is exactly representable and every stream is
// bit-identical across platforms (integer arithmetic only).
class Lcg64 {
  public:
    explicit Lcg64(uint64_t seed) : state_(mix(seed)) {}

    uint64_t next_u64() {
        state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
        return state_;
    }

    // Uniform in [0, 1), in steps of 2^-24.
    float next_uniform() {
        return static_cast<float>(next_u64() >> 40) * (1.0f / 16777216.0f);
    }

    // Uniform in [-1, 1).
    float next_symmetric() { return 2.0f * next_uniform() - 1.0f; }

    // Uniform integer in [0, n). n must be > 0.
    uint64_t next_below(uint64_t n) { return next_u64() % n; }

    // Independent child stream tagged by an integer (tensor index, worker id).
    Lcg64 fork(uint64_t tag) const { return Lcg64(mix(state_ ^ mix(tag))); }

    static uint64_t mix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

  private:
    uint64_t state_;
};

}  // namespace hg
