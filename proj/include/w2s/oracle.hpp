// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Exact optimal conditional velocities
//
//   v*(x_t, t, c) = (x_t - E[x0 | x_t, t, c]) / t
//
// for a finite labeled point set (posterior over Dirac atoms) and for a
// Gaussian mixture (posterior over components, each with a Gaussian
// posterior mean). Posterior weights are softmaxes of log-likelihoods with
// max subtraction, so both stay stable down to t ~ 1e-4.

#pragma once

#include "w2s/field.hpp"
#include "w2s/guidance.hpp"
#include "w2s/kernels.hpp"
#include "w2s/mixture.hpp"

#include <string>
#include <variant>
#include <vector>

namespace w2s {

struct VelocityQuery {
    Vec2 x_t = Vec2::Zero();
    double t = 0.5;
    Condition c;
};

/// Empirical optimal velocity over the dataset points of the query's class
/// (all points for the null condition).
Vec2 optimal_velocity_empirical(const Dataset& data, const VelocityQuery& q);

/// Closed-form optimal velocity of a class-conditional Gaussian mixture.
Vec2 optimal_velocity_mixture(const MixtureSpec& spec, const VelocityQuery& q);

/// Posterior component weights w_i for the query, in class_components order
/// (all selected classes in label order for the null condition).
std::vector<double> mixture_posterior_weights(const MixtureSpec& spec, const VelocityQuery& q);

class EmpiricalOracle final : public VelocityField {
public:
    EmpiricalOracle(const Dataset& data, int num_classes);
    void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const override;

private:
    kernels::PackedPoints points_;
};

class MixtureOracle final : public VelocityField {
public:
    explicit MixtureOracle(MixtureSpec spec) : spec_(std::move(spec)) {}
    void eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const override;
    const MixtureSpec& spec() const { return spec_; }

private:
    MixtureSpec spec_;
};

struct ErrorCurve {
    std::vector<double> t_grid;
    std::vector<double> values;  // mean squared distance to the oracle per t
    std::vector<double> stderr_;  // standard error of each mean
    std::string guidance_label;
    double w = 1.0;
    std::size_t n_states = 0;
};

/// `n` uniform midpoints of (0, 1).
std::vector<double> midpoint_grid(std::size_t n = 28);

/// Where forward-noised states draw their clean endpoints from.
using StateSource = std::variant<const MixtureSpec*, const Dataset*>;

struct ErrorCurveOptions {
    std::vector<double> t_grid = midpoint_grid();
    std::size_t n_states = 10000;
    std::uint64_t seed = 0;
    bool unconditional = false;  // evaluate every state under the null condition
};

/// Draws the stratified states used by the error curve at grid index j.
void draw_noised_states(const StateSource& source, double t, std::size_t n, std::uint64_t seed, std::size_t stream,
                        bool unconditional, std::vector<Vec2>& x_t, std::vector<Condition>& c);

ErrorCurve guidance_error_curve(const GuidanceModels& models, const GuidanceSpec& spec, const VelocityField& oracle,
                                const StateSource& source, const ErrorCurveOptions& opts);

}  // namespace w2s
