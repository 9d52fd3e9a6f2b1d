// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace w2s {

std::string_view to_string(SamplerKind k) { return k == SamplerKind::ode_euler ? "ode" : "sde"; }

SamplerKind parse_sampler_kind(std::string_view s) {
    if (s == "ode" || s == "ode_euler") {
        return SamplerKind::ode_euler;
    }
    if (s == "sde" || s == "sde_euler_maruyama") {
        return SamplerKind::sde_euler_maruyama;
    }
    throw std::invalid_argument("unknown sampler kind '" + std::string(s) + "' (ode, sde)");
}

void SamplerSpec::validate() const {
    if (steps < 1) {
        throw std::invalid_argument("sampler needs steps >= 1");
    }
    if (!(t_start > t_end && t_end >= 0.0 && t_start <= 1.0)) {
        throw std::invalid_argument("sampler needs 1 >= t_start > t_end >= 0");
    }
    if (!(churn >= 0.0) || !std::isfinite(churn)) {
        throw std::invalid_argument("sampler churn must be finite and >= 0");
    }
}

std::vector<double> SamplerSpec::grid() const {
    std::vector<double> g(static_cast<std::size_t>(steps) + 1);
    for (int k = 0; k <= steps; ++k) {
        g[static_cast<std::size_t>(k)] = t_start + (t_end - t_start) * static_cast<double>(k) / steps;
    }
    g.back() = t_end;
    return g;
}

std::vector<Condition> uniform_class_prompts(const std::vector<int>& classes, std::size_t n) {
    if (classes.empty()) {
        throw std::invalid_argument("class prompts need at least one class");
    }
    std::vector<Condition> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = Condition::label(classes[i % classes.size()]);
    }
    return out;
}

std::vector<Condition> null_prompts(std::size_t n) { return std::vector<Condition>(n, Condition::null()); }

namespace {

SampleBatch run(const VelocityField& field, const SamplerSpec& spec, const std::vector<Condition>& prompts,
                bool stochastic) {
    spec.validate();
    const std::size_t n = prompts.size();
    SampleBatch b;
    b.classes = prompts;

    std::vector<Rng> rngs;
    rngs.reserve(n);
    std::vector<Vec2> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        rngs.push_back(substream(spec.seed, i));
        x[i] = standard_normal2(rngs.back());
    }

    const auto grid = spec.grid();
    if (spec.record_trajectories) {
        b.trajectories.reserve(grid.size());
        b.trajectories.push_back(x);
    }
    std::vector<Vec2> v(n);
    for (int k = 0; k < spec.steps; ++k) {
        const double t = grid[static_cast<std::size_t>(k)];
        const double dt = t - grid[static_cast<std::size_t>(k) + 1];
        field.eval(x, t, prompts, v);
        const bool noisy = stochastic && spec.churn > 0.0 && k + 1 < spec.steps;
        if (!noisy) {
            for (std::size_t i = 0; i < n; ++i) {
                x[i] -= dt * v[i];
            }
        } else {
            const double g2 = 2.0 * spec.churn * t;
            const double amp = std::sqrt(g2 * dt);
            for (std::size_t i = 0; i < n; ++i) {
                const Vec2 score = -(x[i] + (1.0 - t) * v[i]) / t;
                x[i] -= dt * (v[i] - 0.5 * g2 * score);
                x[i] += amp * standard_normal2(rngs[i]);
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (!x[i].allFinite()) {
                throw std::runtime_error("sampler produced a non-finite state at step " + std::to_string(k) +
                                         " (t=" + std::to_string(t) + ", chain " + std::to_string(i) + ")");
            }
        }
        if (spec.record_trajectories) {
            b.trajectories.push_back(x);
        }
    }
    b.finals = std::move(x);
    return b;
}

}  // namespace

SampleBatch sample_ode(const VelocityField& field, SamplerSpec spec, const std::vector<Condition>& prompts) {
    spec.kind = SamplerKind::ode_euler;
    return run(field, spec, prompts, false);
}

SampleBatch sample_sde(const VelocityField& field, SamplerSpec spec, const std::vector<Condition>& prompts) {
    spec.kind = SamplerKind::sde_euler_maruyama;
    return run(field, spec, prompts, true);
}

SampleBatch sample(const VelocityField& field, const SamplerSpec& spec, const std::vector<Condition>& prompts) {
    return spec.kind == SamplerKind::ode_euler ? sample_ode(field, spec, prompts) : sample_sde(field, spec, prompts);
}

}  // namespace w2s
