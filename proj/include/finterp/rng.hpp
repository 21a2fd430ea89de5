#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace finterp {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a key for substream `index` of the stream keyed by `parent`.
constexpr std::uint64_t substream_key(std::uint64_t parent, std::uint64_t index) noexcept {
    return mix64(parent ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream: draw k is a pure function of (key, k).
///
/// Normals come from Box-Muller over our own uniforms so a given key produces the same numbers
/// with every standard library.
class RandomStream {
public:
    explicit constexpr RandomStream(std::uint64_t key) noexcept : key_(key) {}

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t position() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform on [0,1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform on (0,1); safe for log().
    double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    void fill_normal(std::span<double> out) noexcept {
        for (double& x : out) x = normal();
    }

    /// Uniform direction on the unit sphere in R^d.
    void unit_vector(std::span<double> out) noexcept {
        for (;;) {
            double norm2 = 0.0;
            for (double& x : out) {
                x = normal();
                norm2 += x * x;
            }
            if (norm2 > 1e-300) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (double& x : out) x *= inv;
                return;
            }
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace finterp
