// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace w2s {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;
using Rng = std::mt19937_64;

/// Class condition: a label in {1..CLS} or the null token.
class Condition {
public:
    constexpr Condition() = default;

    static constexpr Condition null() { return Condition{}; }
    static Condition label(int c) {
        if (c < 1) {
            throw std::invalid_argument("class label must be >= 1, got " + std::to_string(c));
        }
        Condition out;
        out.value_ = c;
        return out;
    }

    constexpr bool is_null() const { return value_ == 0; }
    int value() const {
        if (is_null()) {
            throw std::logic_error("value() on null condition");
        }
        return value_;
    }
    /// Label, or 0 for null. Used for CSV columns.
    constexpr int raw() const { return value_; }
    static Condition from_raw(int raw) { return raw == 0 ? null() : label(raw); }

    constexpr auto operator<=>(const Condition&) const = default;

private:
    int value_ = 0;
};

/// SplitMix64 finalizer; used to derive independent deterministic substreams.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline Rng substream(std::uint64_t seed, std::uint64_t stream) {
    return Rng{mix_seed(seed, stream)};
}

inline Vec2 standard_normal2(Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double a = n01(rng);
    const double b = n01(rng);
    return {a, b};
}

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

}  // namespace w2s
