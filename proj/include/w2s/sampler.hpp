// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Reverse-time samplers for dx = v dt, integrated from t_start (noise) down
// to t_end on a uniform grid.
//
// The SDE variant recovers the score from the velocity through
// E[x0 | x_t] = x_t - t v, i.e. s = -(x_t + (1 - t) v) / t, and discretizes
//
//   x <- x - dt (v - g^2 s / 2) + g sqrt(dt) z,   g^2 = 2 churn t,
//
// which keeps the marginals of the probability-flow ODE. The final step is
// taken without noise. With churn = 0 the update is the ODE update.

#pragma once

#include "w2s/field.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace w2s {

enum class SamplerKind { ode_euler, sde_euler_maruyama };

std::string_view to_string(SamplerKind k);
SamplerKind parse_sampler_kind(std::string_view s);

struct SamplerSpec {
    SamplerKind kind = SamplerKind::ode_euler;
    int steps = 128;
    double t_start = 1.0;
    double t_end = 1e-3;
    std::uint64_t seed = 0;
    double churn = 1.0;  // SDE only
    bool record_trajectories = false;

    void validate() const;
    /// t_0 = t_start > t_1 > ... > t_steps = t_end.
    std::vector<double> grid() const;
};

struct SampleBatch {
    std::vector<Vec2> finals;
    std::vector<Condition> classes;
    /// trajectories[k][i]: state of chain i at grid point k (when recorded).
    std::vector<std::vector<Vec2>> trajectories;
    std::string guidance_label;
};

/// Round-robin prompts over the given classes: exact uniform occupancy.
std::vector<Condition> uniform_class_prompts(const std::vector<int>& classes, std::size_t n);
std::vector<Condition> null_prompts(std::size_t n);

/// Runs the sampler selected by `spec.kind`. Chain i draws its initial noise
/// (and SDE noise) from substream(seed, i).
SampleBatch sample(const VelocityField& field, const SamplerSpec& spec, const std::vector<Condition>& prompts);

SampleBatch sample_ode(const VelocityField& field, SamplerSpec spec, const std::vector<Condition>& prompts);
SampleBatch sample_sde(const VelocityField& field, SamplerSpec spec, const std::vector<Condition>& prompts);

}  // namespace w2s
