// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>

#include "occufield/core.hpp"

namespace occufield {

// Counter-based generator: each draw hashes (key, counter). Streams derived
// from (seed, stream, index) tuples are independent of evaluation order, so
// per-pixel sampling stays bit-identical under any thread schedule.
class CounterRng {
public:
    CounterRng() = default;
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    // Derives a child stream; mixing is one-way so sibling streams do not collide.
    static CounterRng derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
        std::uint64_t k = mix(seed ^ 0x9e3779b97f4a7c15ull);
        k = mix(k ^ stream);
        k = mix(k ^ index);
        return CounterRng(k);
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal, Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 0x1.0p-60) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Uniform direction on the unit sphere.
    Vec3 on_sphere() {
        const double z = uniform(-1.0, 1.0);
        const double a = 6.283185307179586 * uniform();
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {Real(r * std::cos(a)), Real(r * std::sin(a)), Real(z)};
    }

private:
    static std::uint64_t mix(std::uint64_t v) {
        // SplitMix64 finalizer.
        v += 0x9e3779b97f4a7c15ull;
        v = (v ^ (v >> 30)) * 0xbf58476d1ce4e5b9ull;
        v = (v ^ (v >> 27)) * 0x94d049bb133111ebull;
        return v ^ (v >> 31);
    }

    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0;
    bool have_spare_ = false;
};

// Stream ids keep unrelated consumers of the same seed decorrelated.
namespace rng_stream {
inline constexpr std::uint64_t kPixel = 1;
inline constexpr std::uint64_t kPose = 2;
inline constexpr std::uint64_t kLatent = 3;
inline constexpr std::uint64_t kFit = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kPerturb = 6;
inline constexpr std::uint64_t kVerify = 7;
}  // namespace rng_stream

}  // namespace occufield
