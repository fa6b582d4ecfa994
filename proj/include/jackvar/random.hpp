#pragma once

// Reproducible random streams.
//
// Child seeds: h = master; for each v in (n, r, tag): h = mix(h ^ mix(v + GAMMA)),
// where mix is the SplitMix64 finalizer
//   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9; z = (z ^ (z >> 27)) * 0x94D049BB133111EB; z ^ (z >> 31)
// and GAMMA = 0x9E3779B97F4A7C15.
//
// Each child seed initializes a std::mt19937_64. Uniforms are ((g() >> 12) + 0.5) * 2^-52,
// strictly inside (0, 1). Normals use Box-Muller on two consecutive uniforms u1, u2:
// z0 = sqrt(-2 ln u1) cos(2 pi u2), then z1 = sqrt(-2 ln u1) sin(2 pi u2).

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "jackvar/measures.hpp"
#include "jackvar/population.hpp"

namespace jackvar {

inline constexpr std::uint64_t splitmix_gamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix_finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n, std::uint64_t r,
                                    std::uint64_t tag) noexcept {
    std::uint64_t h = master;
    for (std::uint64_t v : {n, r, tag}) h = splitmix_finalize(h ^ splitmix_finalize(v + splitmix_gamma));
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52; }

    /// Uniform index in [0, n).
    std::size_t index(std::size_t n) {
        const auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
        return k < n ? k : n - 1;
    }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// n iid draws from p.
inline Sample sample(const Population& p, std::size_t n, std::uint64_t seed) {
    if (n < 1) throw input_error("sample size must be at least 1");
    Rng rng(seed);
    std::vector<double> out(n);
    for (auto& x : out) {
        switch (p.kind()) {
        case Population::Kind::normal: x = p.param1() + p.param2() * rng.normal(); break;
        case Population::Kind::uniform: x = p.param1() + (p.param2() - p.param1()) * rng.uniform(); break;
        case Population::Kind::exponential: x = -std::log1p(-rng.uniform()) / p.param1(); break;
        }
    }
    return Sample(std::move(out));
}

} // namespace jackvar
