// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Flow-matching training with weak-to-strong targets.
//
// Each step draws (x0, c, eps, t), forms x_t = (1-t) x0 + t eps and
// u = eps - x0, and regresses the strong net onto
//
//   u_w2s = u + w sg[g],   g = v(x_t, t, c) - v_weak(x_t, t, c)
//
// where the weak prediction depends on the variant:
//   baseline  no guidance term
//   mg        same net with the null condition
//   ag        a separate, smaller net updated every `weak_update_ratio` steps
//   br        a branch head after an early block, trained on plain regression
//   sgg       mg for t > tau, br for t <= tau
//   slg_warm  plain regression for `warmup_iters`, then the net with blocks skipped
//
// The guidance term is only applied inside [t_lo, t_hi]; for sgg the interval
// gates the condition-dependent segment only.

#pragma once

#include "w2s/mixture.hpp"
#include "w2s/net.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace w2s {

enum class Variant { baseline, mg, ag, br, sgg, slg_warm };

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

struct TrainConfig {
    Variant variant = Variant::baseline;
    double w = 0.0;
    double tau = 0.2;
    double t_lo = 0.0;
    double t_hi = 1.0;
    double cond_dropout = 0.1;
    std::int64_t iters = 1 << 15;
    int batch = 256;
    double lr = 1e-3;
    double lognormal_loc = -1.2;
    double lognormal_scale = 1.8;
    NetArch arch;
    // Weak net (always for ag; optional alongside any variant for inference-time AG).
    bool co_train_weak = false;
    NetArch weak_arch = [] {
        NetArch a;
        a.d_h = 64;
        return a;
    }();
    int weak_update_ratio = 4;
    // slg_warm
    std::int64_t warmup_iters = -1;  // < 0: a quarter of iters
    std::vector<int> slg_skip_blocks;  // empty: the middle block
    bool unconditional = false;
    std::uint64_t seed = 0;
    int log_every = 256;

    /// Per-variant defaults: w (mg 0.5, ag 0.3, br 0.3, sgg 0.6), branch head
    /// for br/sgg, the [0.2, 0.8] interval for sgg.
    static TrainConfig defaults(Variant v);
    void validate() const;
    bool uses_weak_net() const { return co_train_weak || variant == Variant::ag; }
    std::int64_t effective_warmup() const { return warmup_iters < 0 ? iters / 4 : warmup_iters; }
    std::vector<int> effective_skip_blocks() const;
};

/// Budgets and inference scales of the three toy regimes.
struct ToyBudget {
    std::int64_t iters_main = 0;
    std::int64_t iters_weak = 0;
    double tau = 0.5;
    double w_cfg = 2.0;
    double w_ag = 2.0;
    int weak_update_ratio() const { return static_cast<int>(iters_main / iters_weak); }
};

ToyBudget toy_budget(Preset p);

/// t = sigmoid(z), z ~ N(loc, scale^2), clamped to [1e-5, 1 - 1e-5].
double sample_timestep(double loc, double scale, Rng& rng);

/// u + w g inside [t_lo, t_hi] (and w != 0), else u.
Vec2 w2s_target(const Vec2& u, const Vec2& g, double w, double t, double t_lo, double t_hi);

struct TrainingPair {
    Vec2 x0;
    Vec2 eps;
    double t = 0.5;
    Vec2 x_t;
    Vec2 u;
    int class_label = 0;
    bool dropped = false;
    /// Condition actually fed to the net (null when dropped or unconditional).
    int fed_condition() const { return dropped ? 0 : class_label; }
};

/// Training data: fresh draws from a mixture, or uniform draws from a point set.
using TrainSource = std::variant<const MixtureSpec*, const Dataset*>;

std::vector<TrainingPair> draw_batch(const TrainSource& source, const TrainConfig& cfg, Rng& rng);

struct TrainState {
    NetParams strong;
    OptState opt;
    std::optional<NetParams> weak;
    std::optional<OptState> weak_opt;
    std::int64_t iter = 0;
    std::int64_t weak_steps = 0;
    // Reused gradient buffers (not part of the logical state).
    NetParams grads;
    std::optional<NetParams> weak_grads;
};

TrainState init_train_state(const TrainConfig& cfg, int num_classes);

/// Weak predictions (stop-gradient values) for a batch under the variant in use
/// at the state's current iteration. `strong_v` is the strong conditional output.
std::vector<Vec2> weak_velocity(const TrainConfig& cfg, const TrainState& state, const std::vector<TrainingPair>& batch,
                                const Matrix* branch_v);

struct StepRecord {
    std::int64_t iter = 0;
    double loss = 0.0;         // strong objective against the W2S target
    double reg_loss = 0.0;     // plain regression ||v - u||^2
    double branch_loss = 0.0;  // br/sgg branch head
    double weak_loss = 0.0;    // weak net (on steps where it trains)
    double g_norm_mean = 0.0;
    double g_norm_max = 0.0;
    int dropped = 0;
    bool weak_stepped = false;
};

StepRecord train_step(TrainState& state, const TrainConfig& cfg, const TrainSource& source);

struct RunLog {
    std::vector<StepRecord> records;  // every `log_every` iterations and the last one
    std::int64_t strong_iters = 0;
    std::int64_t weak_iters = 0;
    std::int64_t dropped_total = 0;
    std::int64_t samples_total = 0;

    std::string to_csv() const;
};

struct TrainResult {
    TrainState state;
    RunLog log;
};

using CheckpointHook = std::function<void(const TrainState&)>;

TrainResult train_loop(const TrainConfig& cfg, const TrainSource& source, int num_classes,
                       const CheckpointHook& hook = {}, std::int64_t checkpoint_every = 0);

}  // namespace w2s
