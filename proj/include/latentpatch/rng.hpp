#pragma once

#include <cstdint>
#include <random>

namespace latentpatch {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

/**
 * @brief Seeded 64-bit generator with a portable bounded draw.
 *
 * `uniform_index` always consumes exactly one engine output (multiply-shift
 * reduction), so draw counts and results do not depend on the standard
 * library's distribution implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for item `index` of a batch seeded with `seed`.
    static Rng stream(std::uint64_t seed, std::uint64_t index) {
        return Rng(splitmix64(seed ^ splitmix64(index + 0x632be59bd9b4e019ull)));
    }

    std::uint64_t next() { return engine_(); }

    /// floor(next() * n / 2^64).
    std::size_t uniform_index(std::size_t n) { return static_cast<std::size_t>(mul_high(next(), n)); }

    /// Uniform double in [0, 1) from the top 53 bits of one draw.
    double uniform_real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    static std::uint64_t mul_high(std::uint64_t a, std::uint64_t b) noexcept {
        const std::uint64_t a_lo = a & 0xffffffffu, a_hi = a >> 32;
        const std::uint64_t b_lo = b & 0xffffffffu, b_hi = b >> 32;
        const std::uint64_t lo_lo = a_lo * b_lo;
        const std::uint64_t hi_lo = a_hi * b_lo;
        const std::uint64_t lo_hi = a_lo * b_hi;
        const std::uint64_t cross = (lo_lo >> 32) + (hi_lo & 0xffffffffu) + lo_hi;
        return a_hi * b_hi + (hi_lo >> 32) + (cross >> 32);
    }

    std::mt19937_64 engine_;
};

} // namespace latentpatch
