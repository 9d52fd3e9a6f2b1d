// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/training.hpp"

#include "w2s/textio.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace w2s {

namespace {

// Substream tags; batch streams are further keyed by iteration.
constexpr std::uint64_t kBatchStream = 1;
constexpr std::uint64_t kStrongInit = 2;
constexpr std::uint64_t kWeakInit = 3;

}  // namespace

std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::baseline:
            return "baseline";
        case Variant::mg:
            return "mg";
        case Variant::ag:
            return "ag";
        case Variant::br:
            return "br";
        case Variant::sgg:
            return "sgg";
        case Variant::slg_warm:
            return "slg_warm";
    }
    return "?";
}

Variant parse_variant(std::string_view s) {
    for (auto v : {Variant::baseline, Variant::mg, Variant::ag, Variant::br, Variant::sgg, Variant::slg_warm}) {
        if (s == to_string(v)) {
            return v;
        }
    }
    throw std::invalid_argument("unknown training variant '" + std::string(s) +
                                "' (baseline, mg, ag, br, sgg, slg_warm)");
}

TrainConfig TrainConfig::defaults(Variant v) {
    TrainConfig c;
    c.variant = v;
    switch (v) {
        case Variant::baseline:
            break;
        case Variant::mg:
            c.w = 0.5;
            break;
        case Variant::ag:
            c.w = 0.3;
            break;
        case Variant::br:
            c.w = 0.3;
            c.arch.branch = true;
            break;
        case Variant::sgg:
            c.w = 0.6;
            c.tau = 0.2;
            c.t_lo = 0.2;
            c.t_hi = 0.8;
            c.arch.branch = true;
            break;
        case Variant::slg_warm:
            c.w = 0.3;
            break;
    }
    return c;
}

void TrainConfig::validate() const {
    if (!(w >= 0.0) || !std::isfinite(w)) {
        throw std::invalid_argument("train.w must be finite and >= 0");
    }
    if (!(0.0 <= t_lo && t_lo <= t_hi && t_hi <= 1.0)) {
        throw std::invalid_argument("training interval needs 0 <= t_lo <= t_hi <= 1");
    }
    if (!(tau > 0.0 && tau < 1.0)) {
        throw std::invalid_argument("train.tau must lie in (0, 1)");
    }
    if (!(cond_dropout >= 0.0 && cond_dropout < 1.0)) {
        throw std::invalid_argument("train.cond_dropout must lie in [0, 1)");
    }
    if (iters < 0 || batch < 1 || !(lr > 0.0) || !(lognormal_scale > 0.0) || weak_update_ratio < 1 || log_every < 1) {
        throw std::invalid_argument("training needs iters >= 0, batch >= 1, lr > 0, lognormal_scale > 0, "
                                    "weak_update_ratio >= 1, log_every >= 1");
    }
    arch.validate();
    if (uses_weak_net()) {
        weak_arch.validate();
    }
    const bool cdg = variant == Variant::mg || variant == Variant::sgg;
    if (cdg && unconditional) {
        throw std::invalid_argument("variant '" + std::string(to_string(variant)) +
                                    "' needs conditional training (condition-dependent weak signal)");
    }
    if (cdg && !(cond_dropout > 0.0)) {
        throw std::invalid_argument("variant '" + std::string(to_string(variant)) + "' needs cond_dropout > 0");
    }
    if ((variant == Variant::br || variant == Variant::sgg) && !arch.branch) {
        throw std::invalid_argument("variant '" + std::string(to_string(variant)) + "' needs a branch head");
    }
    if (variant == Variant::slg_warm) {
        for (int b : effective_skip_blocks()) {
            if (b < 0 || b >= arch.n_blocks) {
                throw std::invalid_argument("slg skip block " + std::to_string(b) + " out of range");
            }
        }
    }
}

std::vector<int> TrainConfig::effective_skip_blocks() const {
    return slg_skip_blocks.empty() ? std::vector<int>{arch.n_blocks / 2} : slg_skip_blocks;
}

ToyBudget toy_budget(Preset p) {
    switch (p) {
        case Preset::A:
            return {1 << 15, 1 << 11, 0.5, 2.0, 2.0};
        case Preset::B:
            return {1 << 12, 1 << 10, 0.1, 2.0, 2.0};
        case Preset::C:
            return {1 << 15, 1 << 11, 0.3, 2.0, 2.0};
    }
    throw std::invalid_argument("unknown preset");
}

double sample_timestep(double loc, double scale, Rng& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    const double z = loc + scale * n01(rng);
    const double t = 1.0 / (1.0 + std::exp(-z));
    return std::clamp(t, 1e-5, 1.0 - 1e-5);
}

Vec2 w2s_target(const Vec2& u, const Vec2& g, double w, double t, double t_lo, double t_hi) {
    if (w == 0.0 || t < t_lo || t > t_hi) {
        return u;
    }
    return u + w * g;
}

std::vector<TrainingPair> draw_batch(const TrainSource& source, const TrainConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<TrainingPair> batch(static_cast<std::size_t>(cfg.batch));
    for (auto& p : batch) {
        if (std::holds_alternative<const MixtureSpec*>(source)) {
            const auto lp = sample_point(*std::get<const MixtureSpec*>(source), rng);
            p.x0 = lp.x0;
            p.class_label = lp.class_label;
        } else {
            const auto& pts = std::get<const Dataset*>(source)->points;
            std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
            const auto& lp = pts[pick(rng)];
            p.x0 = lp.x0;
            p.class_label = lp.class_label;
        }
        p.eps = standard_normal2(rng);
        p.t = sample_timestep(cfg.lognormal_loc, cfg.lognormal_scale, rng);
        const double drop_u = unif(rng);  // always drawn, keeps streams aligned across configs
        if (cfg.unconditional) {
            p.class_label = 0;
        } else {
            p.dropped = drop_u < cfg.cond_dropout;
        }
        p.x_t = (1.0 - p.t) * p.x0 + p.t * p.eps;
        p.u = p.eps - p.x0;
    }
    return batch;
}

TrainState init_train_state(const TrainConfig& cfg, int num_classes) {
    cfg.validate();
    const int classes = cfg.unconditional ? 0 : num_classes;
    TrainState s;
    s.strong = init_params(cfg.arch, classes, mix_seed(cfg.seed, kStrongInit));
    s.opt = OptState::for_params(s.strong, cfg.lr);
    if (cfg.uses_weak_net()) {
        s.weak = init_params(cfg.weak_arch, classes, mix_seed(cfg.seed, kWeakInit));
        s.weak_opt = OptState::for_params(*s.weak, cfg.lr);
    }
    return s;
}

namespace {

struct BatchArrays {
    std::vector<Vec2> x;
    std::vector<double> t;
    std::vector<int> c;
    std::vector<int> null_c;
};

BatchArrays arrays(const std::vector<TrainingPair>& batch) {
    BatchArrays a;
    for (const auto& p : batch) {
        a.x.push_back(p.x_t);
        a.t.push_back(p.t);
        a.c.push_back(p.fed_condition());
    }
    a.null_c.assign(batch.size(), 0);
    return a;
}

void zero_into(NetParams& buf, const NetParams& like) {
    if (buf.tensors.size() != like.tensors.size()) {
        buf = like.zeros_like();
        return;
    }
    for (auto& t : buf.tensors) {
        t.value.setZero();
    }
}

std::vector<Vec2> columns(const Matrix& m) {
    std::vector<Vec2> out(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        out[static_cast<std::size_t>(i)] = m.col(i);
    }
    return out;
}

}  // namespace

std::vector<Vec2> weak_velocity(const TrainConfig& cfg, const TrainState& state, const std::vector<TrainingPair>& batch,
                                const Matrix* branch_v) {
    const auto a = arrays(batch);
    auto branch = [&]() {
        if (branch_v != nullptr) {
            return columns(*branch_v);
        }
        ForwardOptions o;
        o.want_branch = true;
        return columns(forward(state.strong, a.x, a.t, a.c, o).branch);
    };
    switch (cfg.variant) {
        case Variant::baseline:
            throw std::invalid_argument("baseline training has no weak source");
        case Variant::mg:
            return columns(forward(state.strong, a.x, a.t, a.null_c).velocity);
        case Variant::ag:
            if (!state.weak) {
                throw std::invalid_argument("ag training needs a weak net");
            }
            return columns(forward(*state.weak, a.x, a.t, a.c).velocity);
        case Variant::br:
            return branch();
        case Variant::sgg: {
            auto out = columns(forward(state.strong, a.x, a.t, a.null_c).velocity);
            const auto br = branch();
            for (std::size_t i = 0; i < batch.size(); ++i) {
                if (batch[i].t <= cfg.tau) {
                    out[i] = br[i];
                }
            }
            return out;
        }
        case Variant::slg_warm: {
            ForwardOptions o;
            o.skip_blocks = cfg.effective_skip_blocks();
            return columns(forward(state.strong, a.x, a.t, a.c, o).velocity);
        }
    }
    throw std::invalid_argument("unknown variant");
}

StepRecord train_step(TrainState& state, const TrainConfig& cfg, const TrainSource& source) {
    Rng rng = substream(mix_seed(cfg.seed, kBatchStream), static_cast<std::uint64_t>(state.iter));
    const auto batch = draw_batch(source, cfg, rng);
    const auto a = arrays(batch);
    const auto B = static_cast<Eigen::Index>(batch.size());

    ForwardOptions o;
    o.want_branch = state.strong.arch.branch;
    ForwardTrace trace;
    const auto r = forward(state.strong, a.x, a.t, a.c, o, &trace);

    const bool guided = cfg.variant != Variant::baseline &&
                        !(cfg.variant == Variant::slg_warm && state.iter < cfg.effective_warmup());
    std::vector<Vec2> g(batch.size(), Vec2::Zero());
    if (guided) {
        const auto vw = weak_velocity(cfg, state, batch, o.want_branch ? &r.branch : nullptr);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            g[i] = r.velocity.col(static_cast<Eigen::Index>(i)) - vw[i];
        }
    }

    StepRecord rec;
    rec.iter = state.iter;
    Matrix gv(2, B);
    Matrix gbr;
    for (Eigen::Index i = 0; i < B; ++i) {
        const auto& p = batch[static_cast<std::size_t>(i)];
        // sgg: the interval gates the condition-dependent segment only.
        const bool cag_segment = cfg.variant == Variant::sgg && p.t <= cfg.tau;
        const Vec2 target = cag_segment ? w2s_target(p.u, g[static_cast<std::size_t>(i)], cfg.w, p.t, 0.0, 1.0)
                                        : w2s_target(p.u, g[static_cast<std::size_t>(i)], cfg.w, p.t, cfg.t_lo, cfg.t_hi);
        const Vec2 v = r.velocity.col(i);
        gv.col(i) = (2.0 / static_cast<double>(B)) * (v - target);
        rec.loss += (v - target).squaredNorm();
        rec.reg_loss += (v - p.u).squaredNorm();
        const double gn = g[static_cast<std::size_t>(i)].norm();
        rec.g_norm_mean += gn;
        rec.g_norm_max = std::max(rec.g_norm_max, gn);
        rec.dropped += p.dropped ? 1 : 0;
    }
    if (o.want_branch) {
        gbr.resize(2, B);
        for (Eigen::Index i = 0; i < B; ++i) {
            const Vec2 d = Vec2(r.branch.col(i)) - batch[static_cast<std::size_t>(i)].u;
            gbr.col(i) = (2.0 / static_cast<double>(B)) * d;
            rec.branch_loss += d.squaredNorm();
        }
    }
    const double nb = static_cast<double>(B);
    rec.loss /= nb;
    rec.reg_loss /= nb;
    rec.branch_loss /= nb;
    rec.g_norm_mean /= nb;
    if (!std::isfinite(rec.loss) || !std::isfinite(rec.branch_loss)) {
        throw std::runtime_error("non-finite training loss at iteration " + std::to_string(state.iter) +
                                 " (loss=" + text::fmt(rec.loss) + ", branch_loss=" + text::fmt(rec.branch_loss) +
                                 ", |g| max=" + text::fmt(rec.g_norm_max) + ")");
    }

    zero_into(state.grads, state.strong);
    backward(state.strong, trace, gv, o.want_branch ? &gbr : nullptr, state.grads);
    adam_step(state.strong, state.grads, state.opt);

    if (state.weak && state.iter % cfg.weak_update_ratio == 0) {
        ForwardTrace wt;
        const auto wr = forward(*state.weak, a.x, a.t, a.c, {}, &wt);
        Matrix wg(2, B);
        for (Eigen::Index i = 0; i < B; ++i) {
            const Vec2 d = Vec2(wr.velocity.col(i)) - batch[static_cast<std::size_t>(i)].u;
            wg.col(i) = (2.0 / nb) * d;
            rec.weak_loss += d.squaredNorm();
        }
        rec.weak_loss /= nb;
        if (!state.weak_grads) {
            state.weak_grads.emplace();
        }
        zero_into(*state.weak_grads, *state.weak);
        backward(*state.weak, wt, wg, nullptr, *state.weak_grads);
        adam_step(*state.weak, *state.weak_grads, *state.weak_opt);
        ++state.weak_steps;
        rec.weak_stepped = true;
    }
    ++state.iter;
    return rec;
}

std::string RunLog::to_csv() const {
    std::ostringstream os;
    os << "iter,loss,reg_loss,branch_loss,weak_loss,g_norm_mean,g_norm_max,dropped,weak_stepped\n";
    for (const auto& r : records) {
        os << r.iter << ',' << text::fmt(r.loss) << ',' << text::fmt(r.reg_loss) << ',' << text::fmt(r.branch_loss)
           << ',' << text::fmt(r.weak_loss) << ',' << text::fmt(r.g_norm_mean) << ',' << text::fmt(r.g_norm_max) << ','
           << r.dropped << ',' << (r.weak_stepped ? 1 : 0) << '\n';
    }
    return std::move(os).str();
}

TrainResult train_loop(const TrainConfig& cfg, const TrainSource& source, int num_classes, const CheckpointHook& hook,
                       std::int64_t checkpoint_every) {
    TrainResult res{init_train_state(cfg, num_classes), {}};
    for (std::int64_t i = 0; i < cfg.iters; ++i) {
        const auto rec = train_step(res.state, cfg, source);
        res.log.dropped_total += rec.dropped;
        res.log.samples_total += cfg.batch;
        if (i % cfg.log_every == 0 || i + 1 == cfg.iters) {
            res.log.records.push_back(rec);
        }
        if (hook && checkpoint_every > 0 && (i + 1) % checkpoint_every == 0) {
            hook(res.state);
        }
    }
    res.log.strong_iters = res.state.iter;
    res.log.weak_iters = res.state.weak_steps;
    return res;
}

}  // namespace w2s
