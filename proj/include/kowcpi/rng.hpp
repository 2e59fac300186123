#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace kowcpi {

// splitmix64 finalizer (Vigna). Used to turn arbitrary 64-bit state into a
// well-mixed engine seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from (root seed, purpose tag, index).
// Purposes keep e.g. predictor bootstrap draws and generator noise draws on
// disjoint streams, so adding draws to one path never perturbs another.
inline std::uint64_t stream_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index = 0) {
    std::uint64_t h = 14695981039346656037ull; // FNV-1a over the purpose tag
    for (unsigned char c : purpose) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::uint64_t state = root;
    state ^= h + 0x9e3779b97f4a7c15ull + (state << 6) + (state >> 2);
    state ^= (index + 1) * 0xbf58476d1ce4e5b9ull;
    return splitmix64(state);
}

// Deterministic random source: mt19937_64 engine with hand-rolled
// distributions, so the same seed reproduces the same values regardless of
// standard-library implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t root, std::string_view purpose, std::uint64_t index = 0) {
        return Rng(stream_seed(root, purpose, index));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform index in [0, n); n must be positive.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(engine_() % static_cast<std::uint64_t>(n));
    }

    // Standard normal via Box-Muller; the spare deviate is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; // (0,1]
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace kowcpi
