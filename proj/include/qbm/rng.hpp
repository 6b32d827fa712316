// rng.hpp - counter-based random streams.
//
// Every stream is keyed by (seed, stream index); draw k of a stream is a pure
// function of (key, k). Results do not depend on iteration order or on which
// worker produced them, and normals use an explicit Box-Muller transform so
// the sequence is the same on every platform.

#pragma once

#include <cmath>
#include <cstdint>

#include "qbm/errors.hpp"

namespace qbm {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t derive_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept : key_(derive_key(seed, stream)) {}

    std::uint64_t next_u64() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

    // Uniform on the open interval (0, 1).
    double uniform() noexcept {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double r = std::sqrt(-2.0 * std::log(uniform()));
        const double phi = 2.0 * pi * uniform();
        spare_ = r * std::sin(phi);
        has_spare_ = true;
        return r * std::cos(phi);
    }

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_{0};
    double spare_{0.0};
    bool has_spare_{false};
};

} // namespace qbm
