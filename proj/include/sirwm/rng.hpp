#pragma once

// Counter-mode pseudo-random primitives. Everything downstream (dimension
// maps, toy LM logits, green lists, synthetic embeddings, weight init) is a
// pure function of named 64-bit seeds, so runs are reproducible across
// platforms without carrying generator state around.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace sirwm::rng {

// splitmix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash2(std::uint64_t seed, std::uint64_t a) noexcept {
    return mix(mix(seed) ^ a);
}

constexpr std::uint64_t hash3(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    return mix(hash2(seed, a) ^ b);
}

constexpr std::uint64_t hash4(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                              std::uint64_t c) noexcept {
    return mix(hash3(seed, a, b) ^ c);
}

// Uniform in the open interval (0, 1); never 0, so log() below is safe.
inline double to_unit(std::uint64_t h) noexcept {
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal via Box-Muller on two decorrelated sub-hashes.
inline double to_gaussian(std::uint64_t h) noexcept {
    const double u1 = to_unit(mix(h));
    const double u2 = to_unit(mix(h ^ 0xd1b54a32d192ed03ull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Sequential splitmix64 stream for places that want many draws from one seed.
class Stream {
  public:
    explicit Stream(std::uint64_t seed) noexcept : state_(seed) {}

    std::uint64_t next() noexcept {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    double next_unit() noexcept { return to_unit(next()); }

    double next_gaussian() noexcept {
        const double u1 = next_unit();
        const double u2 = next_unit();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    // Uniform integer in [0, n) via 128-bit multiply; bias is O(n / 2^64).
    std::uint64_t next_below(std::uint64_t n) noexcept {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[next_below(i)]);
        }
    }

  private:
    std::uint64_t state_;
};

}  // namespace sirwm::rng
