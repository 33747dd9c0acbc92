#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace causalbench {

// splitmix64 finalizer. Good avalanche, cheap, stable across platforms.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Derives one child seed from a base seed and a chain of tags. Each tag is
// folded in with splitmix64 so distinct (stage, cell, seed, role) tuples land
// in distinct streams. Used everywhere a module needs its own RNG role.
class SeedMixer {
  public:
    explicit SeedMixer(std::uint64_t base) : state_(splitmix64(base ^ 0x6a09e667f3bcc909ULL)) {}

    SeedMixer& mix(std::uint64_t v) {
        state_ = splitmix64(state_ ^ v);
        return *this;
    }
    SeedMixer& mix(std::string_view tag) { return mix(fnv1a64(tag)); }

    std::uint64_t value() const { return state_; }

  private:
    std::uint64_t state_;
};

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view role) {
    return SeedMixer(base).mix(role).value();
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view stage,
                                 std::uint64_t cell_index, std::uint64_t seed_index,
                                 std::string_view role) {
    return SeedMixer(base).mix(stage).mix(cell_index).mix(seed_index).mix(role).value();
}

// Seeded Gaussian/uniform stream. Thin wrapper so every module draws the
// same way and the stream discipline is visible at call sites.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double gaussian() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }  // [0, 1)
    // Uniform over ±[lo, hi]: magnitude uniform, sign a fair coin.
    double signed_uniform(double lo, double hi) {
        double mag = lo + (hi - lo) * uniform();
        return uniform() < 0.5 ? -mag : mag;
    }
    std::uint64_t integer() { return engine_(); }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace causalbench
