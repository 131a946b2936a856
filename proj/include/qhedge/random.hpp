#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace qhedge {

// Counter-based normal stream. Draw i is a pure function of (seed, i), so
// any partition of the index range reproduces the serial sequence.
class CounterStream {
public:
    explicit CounterStream(std::uint64_t seed, std::uint64_t stream = 0) noexcept
        : key_(mix(mix(seed) ^ (stream * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull))) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9E3779B97F4A7C15ull;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform on (0, 1].
    double uniform(std::uint64_t counter) const noexcept {
        const std::uint64_t bits = mix(key_ + counter * 0x9E3779B97F4A7C15ull) >> 11;
        return (static_cast<double>(bits) + 1.0) * 0x1.0p-53;
    }

    // Two independent standard normals for draw index i (Box-Muller).
    std::pair<double, double> normal_pair(std::uint64_t i) const noexcept {
        const double u1 = uniform(2 * i);
        const double u2 = uniform(2 * i + 1);
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    double normal(std::uint64_t i) const noexcept { return normal_pair(i).first; }

private:
    std::uint64_t key_;
};

}  // namespace qhedge
