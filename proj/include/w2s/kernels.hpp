// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Data-parallel inner loops shared by the oracle, sampler and metrics code.
//
// Every kernel exists twice with the same signature: `serial::` is the plain
// reference loop and `parallel::` distributes the outer loop with OpenMP.
// Both call the same per-element routine, so their outputs are bit-identical;
// the tests and the benchmark target compare them directly.

#pragma once

#include "w2s/common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace w2s {
class MixtureSpec;
}

namespace w2s::kernels {

/// A mixture flattened at one noise level t, components grouped by class.
struct PackedMixture {
    double t = 0.0;
    int num_classes = 0;
    int num_selected = 0;
    // Per packed component.
    std::vector<double> mean_x, mean_y;        // (1-t) mu
    std::vector<double> prec_xx, prec_xy, prec_yy;  // inverse of (1-t)^2 Sigma + t^2 I
    std::vector<double> log_norm;              // -log(2 pi) - 0.5 log det
    std::vector<double> log_pi;                // log pi_i^(c)
    std::vector<double> gain_xx, gain_xy, gain_yx, gain_yy;  // (1-t) Sigma (cov_t)^-1
    std::vector<double> mu_x, mu_y;            // untransformed means
    std::vector<int> source_index;             // index into spec.components()
    std::vector<int> label;
    // class_begin[c] .. class_begin[c+1] is the packed range of label c (c in 1..CLS);
    // class_begin[1] .. class_begin[CLS+1] spans everything (the null condition).
    std::vector<int> class_begin;

    int begin(int raw_condition) const;
    int end(int raw_condition) const;
    double log_prior(int raw_condition) const;
    std::size_t size() const { return mean_x.size(); }
};

PackedMixture pack(const MixtureSpec& spec, double t);

/// Finite point set grouped by class for the empirical oracle.
struct PackedPoints {
    int num_classes = 0;
    std::vector<double> x, y;
    std::vector<int> class_begin;  // same layout as PackedMixture::class_begin

    int begin(int raw_condition) const;
    int end(int raw_condition) const;
    std::size_t size() const { return x.size(); }
};

PackedPoints pack_points(std::span<const Vec2> points, std::span<const int> labels, int num_classes);

/// Posterior over components for one query. Weights are written to `weights`
/// (length end-begin) and the posterior mean E[x0 | x_t, c] is returned.
Vec2 mixture_posterior(const PackedMixture& m, const Vec2& x, int raw_condition, std::span<double> weights);

namespace serial {

void mixture_velocity(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond, std::span<Vec2> out);
void mixture_log_density(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond,
                         std::span<double> out);
void empirical_velocity(const PackedPoints& p, double t, std::span<const Vec2> x, std::span<const int> cond,
                        std::span<Vec2> out);
/// hit[i] = 1 if some sample with the component's label (or a null label)
/// lies within Mahalanobis radius of packed component i (t must be 0).
void coverage_hits(const PackedMixture& m, const PackedPoints& samples, double radius, std::span<std::uint8_t> hit);

}  // namespace serial

namespace parallel {

void mixture_velocity(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond, std::span<Vec2> out);
void mixture_log_density(const PackedMixture& m, std::span<const Vec2> x, std::span<const int> cond,
                         std::span<double> out);
void empirical_velocity(const PackedPoints& p, double t, std::span<const Vec2> x, std::span<const int> cond,
                        std::span<Vec2> out);
void coverage_hits(const PackedMixture& m, const PackedPoints& samples, double radius, std::span<std::uint8_t> hit);

}  // namespace parallel

int max_threads();

}  // namespace w2s::kernels
