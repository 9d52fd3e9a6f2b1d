// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/training.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace w2s;

namespace {

NetArch tiny_arch(bool branch = true) {
    NetArch a;
    a.d_c = 4;
    a.d_h = 16;
    a.n_blocks = 3;
    a.n_freqs = 4;
    a.branch = branch;
    a.branch_index = 1;
    return a;
}

TrainConfig tiny_config(Variant v, std::uint64_t seed = 1) {
    auto c = TrainConfig::defaults(v);
    c.arch = tiny_arch(c.arch.branch);
    c.weak_arch = tiny_arch(false);
    c.weak_arch.d_h = 8;
    c.batch = 32;
    c.lr = 1e-3;
    c.seed = seed;
    return c;
}

void randomize_heads(NetParams& p, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& t : p.tensors) {
        if (t.name == "w_out" || t.name == "b_out" || t.name == "w_br" || t.name == "b_br") {
            for (Eigen::Index i = 0; i < t.value.size(); ++i) {
                t.value.data()[i] = 0.3 * n01(rng);
            }
        }
    }
}

bool same_params(const NetParams& a, const NetParams& b) {
    if (a.tensors.size() != b.tensors.size()) {
        return false;
    }
    for (std::size_t k = 0; k < a.tensors.size(); ++k) {
        if (a.tensors[k].value != b.tensors[k].value) {
            return false;
        }
    }
    return true;
}

std::vector<Vec2> columns(const Matrix& m) {
    std::vector<Vec2> out;
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
        out.emplace_back(m.col(i));
    }
    return out;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("logit-normal timesteps") {
    Rng rng(5);
    CHECK(std::abs(sample_timestep(0.0, 1e-12, rng) - 0.5) < 1e-9);

    const int n = 1000000;
    std::vector<double> ts(n);
    for (auto& t : ts) {
        t = sample_timestep(0.0, 1.0, rng);
        REQUIRE(t >= 1e-5);
        REQUIRE(t <= 1.0 - 1e-5);
    }
    std::nth_element(ts.begin(), ts.begin() + n / 2, ts.end());
    CHECK(std::abs(ts[n / 2] - 0.5) < 0.01);
    const double edge = 1.0 / (1.0 + std::exp(1.0));  // sigmoid(-1) = 0.2689
    const auto below = std::count_if(ts.begin(), ts.end(), [&](double t) { return t <= edge; });
    CHECK(std::abs(static_cast<double>(below) / n - phi(-1.0)) < 0.005);
}

TEST_CASE("w2s target") {
    const Vec2 u(1.0, 0.0);
    const Vec2 g(0.0, 2.0);
    CHECK(w2s_target(u, g, 0.5, 0.5, 0.2, 0.8) == Vec2(1.0, 1.0));
    CHECK(w2s_target(u, g, 0.5, 0.9, 0.2, 0.8) == u);
    CHECK(w2s_target(u, g, 0.5, 0.1, 0.2, 0.8) == u);
    CHECK(w2s_target(u, g, 0.5, 0.2, 0.2, 0.8) == Vec2(1.0, 1.0));  // closed interval
    for (double t : {0.01, 0.3, 0.99}) {
        CHECK(w2s_target(u, g, 0.0, t, 0.0, 1.0) == u);
    }
}

TEST_CASE("batch construction") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    auto cfg = tiny_config(Variant::baseline);
    cfg.batch = 1000;
    Rng rng(9);
    std::size_t dropped = 0;
    std::size_t total = 0;
    for (int k = 0; k < 100; ++k) {
        for (const auto& p : draw_batch(&spec, cfg, rng)) {
            REQUIRE(p.x_t == ((1.0 - p.t) * p.x0 + p.t * p.eps).eval());
            REQUIRE(p.u == (p.eps - p.x0).eval());
            REQUIRE(spec.is_selected(p.class_label));
            dropped += p.dropped ? 1 : 0;
            ++total;
        }
    }
    const double q = cfg.cond_dropout;
    const double sigma = std::sqrt(q * (1 - q) / static_cast<double>(total));
    CHECK(std::abs(static_cast<double>(dropped) / static_cast<double>(total) - q) <= 4.0 * sigma);

    cfg.unconditional = true;
    for (const auto& p : draw_batch(&spec, cfg, rng)) {
        CHECK(p.fed_condition() == 0);
    }
}

TEST_CASE("weak velocity sources") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    SUBCASE("mg on an untrained net is zero") {
        const auto cfg = tiny_config(Variant::mg);
        const auto st = init_train_state(cfg, 12);
        Rng rng(1);
        for (const auto& v : weak_velocity(cfg, st, draw_batch(&spec, cfg, rng), nullptr)) {
            CHECK(v == Vec2::Zero());
        }
    }
    SUBCASE("sgg is mg above tau and br at or below, bit for bit") {
        auto cfg = tiny_config(Variant::sgg);
        cfg.tau = 0.2;
        auto st = init_train_state(cfg, 12);
        randomize_heads(st.strong, 3);
        Rng rng(2);
        auto batch = draw_batch(&spec, cfg, rng);
        batch[0].t = 0.5;
        batch[1].t = 0.1;
        batch[2].t = 0.2;
        const auto sgg = weak_velocity(cfg, st, batch, nullptr);
        auto mg_cfg = cfg;
        mg_cfg.variant = Variant::mg;
        auto br_cfg = cfg;
        br_cfg.variant = Variant::br;
        const auto mg = weak_velocity(mg_cfg, st, batch, nullptr);
        const auto br = weak_velocity(br_cfg, st, batch, nullptr);
        int n_mg = 0;
        int n_br = 0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            if (batch[i].t > cfg.tau) {
                CHECK(sgg[i] == mg[i]);
                ++n_mg;
            } else {
                CHECK(sgg[i] == br[i]);
                ++n_br;
            }
        }
        CHECK(n_mg > 0);
        CHECK(n_br > 0);
        CHECK(mg[0] != br[0]);
    }
    SUBCASE("ag with a copy of the strong net reproduces the strong output") {
        auto cfg = tiny_config(Variant::ag);
        cfg.weak_arch = cfg.arch;
        auto st = init_train_state(cfg, 12);
        randomize_heads(st.strong, 4);
        st.weak = st.strong;
        Rng rng(3);
        const auto batch = draw_batch(&spec, cfg, rng);
        std::vector<Vec2> x;
        std::vector<double> t;
        std::vector<int> c;
        for (const auto& p : batch) {
            x.push_back(p.x_t);
            t.push_back(p.t);
            c.push_back(p.fed_condition());
        }
        const auto strong = columns(forward(st.strong, x, t, c).velocity);
        CHECK(weak_velocity(cfg, st, batch, nullptr) == strong);
    }
    SUBCASE("missing sources") {
        auto cfg = tiny_config(Variant::ag);
        auto st = init_train_state(cfg, 12);
        st.weak.reset();
        Rng rng(4);
        CHECK_THROWS_AS(weak_velocity(cfg, st, draw_batch(&spec, cfg, rng), nullptr), std::invalid_argument);
        const auto base = tiny_config(Variant::baseline);
        CHECK_THROWS_AS(weak_velocity(base, init_train_state(base, 12), draw_batch(&spec, base, rng), nullptr),
                        std::invalid_argument);
    }
}

TEST_CASE("w = 0 reproduces the baseline trajectory bit for bit") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    for (Variant v : {Variant::mg, Variant::ag, Variant::slg_warm}) {
        auto base = tiny_config(Variant::baseline, 11);
        auto cfg = tiny_config(v, 11);
        cfg.w = 0.0;
        base.iters = cfg.iters = 25;
        base.co_train_weak = cfg.uses_weak_net();
        base.weak_arch = cfg.weak_arch;
        const auto a = train_loop(base, &spec, 12);
        const auto b = train_loop(cfg, &spec, 12);
        CHECK(same_params(a.state.strong, b.state.strong));
    }
    // With a branch head on both sides, br and sgg at w = 0 match too.
    for (Variant v : {Variant::br, Variant::sgg}) {
        auto base = tiny_config(Variant::baseline, 12);
        base.arch.branch = true;
        auto cfg = tiny_config(v, 12);
        cfg.w = 0.0;
        base.iters = cfg.iters = 25;
        const auto a = train_loop(base, &spec, 12);
        const auto b = train_loop(cfg, &spec, 12);
        CHECK(same_params(a.state.strong, b.state.strong));
    }
}

TEST_CASE("slg warm-up is plain regression until warmup_iters") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    auto base = tiny_config(Variant::baseline, 21);
    auto slg = tiny_config(Variant::slg_warm, 21);
    slg.w = 0.5;
    slg.warmup_iters = 6;
    base.iters = slg.iters = 6;
    CHECK(same_params(train_loop(base, &spec, 12).state.strong, train_loop(slg, &spec, 12).state.strong));
    base.iters = slg.iters = 7;
    CHECK(!same_params(train_loop(base, &spec, 12).state.strong, train_loop(slg, &spec, 12).state.strong));
    CHECK(slg.effective_skip_blocks() == std::vector<int>{1});
    slg.warmup_iters = -1;
    slg.iters = 400;
    CHECK(slg.effective_warmup() == 100);
}

TEST_CASE("one step lowers the batch loss at lr 1e-4 (3-seed majority)") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    int wins = 0;
    for (std::uint64_t seed : {1, 2, 3}) {
        auto cfg = TrainConfig::defaults(Variant::baseline);
        cfg.lr = 1e-4;
        cfg.seed = seed;
        auto st = init_train_state(cfg, 12);
        // A fresh net has zero heads; give it a nonzero output so every layer gets gradient.
        randomize_heads(st.strong, seed);
        Rng rng = substream(mix_seed(seed, 1), 0);
        const auto batch = draw_batch(&spec, cfg, rng);
        std::vector<Vec2> x;
        std::vector<double> t;
        std::vector<int> c;
        for (const auto& p : batch) {
            x.push_back(p.x_t);
            t.push_back(p.t);
            c.push_back(p.fed_condition());
        }
        auto loss = [&](const NetParams& p) {
            const auto v = forward(p, x, t, c).velocity;
            double s = 0.0;
            for (std::size_t i = 0; i < batch.size(); ++i) {
                s += (Vec2(v.col(static_cast<Eigen::Index>(i))) - batch[i].u).squaredNorm();
            }
            return s / static_cast<double>(batch.size());
        };
        const double before = loss(st.strong);
        const auto rec = train_step(st, cfg, &spec);
        CHECK(rec.loss == doctest::Approx(before).epsilon(1e-12));
        wins += loss(st.strong) < before ? 1 : 0;
    }
    CHECK(wins >= 2);
}

TEST_CASE("stop-gradient: injecting g as a constant gives the same update") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    for (Variant v : {Variant::mg, Variant::ag, Variant::br, Variant::sgg}) {
        CAPTURE(to_string(v));
        auto cfg = tiny_config(v, 31);
        auto st = init_train_state(cfg, 12);
        randomize_heads(st.strong, 5);
        if (st.weak) {
            randomize_heads(*st.weak, 6);
        }
        auto manual = st;

        train_step(st, cfg, &spec);

        // Second pass: the weak signal is computed first and frozen, then the
        // strong objective is differentiated against the constant target.
        Rng rng = substream(mix_seed(cfg.seed, 1), 0);
        const auto batch = draw_batch(&spec, cfg, rng);
        std::vector<Vec2> x;
        std::vector<double> t;
        std::vector<int> c;
        for (const auto& p : batch) {
            x.push_back(p.x_t);
            t.push_back(p.t);
            c.push_back(p.fed_condition());
        }
        ForwardOptions o;
        o.want_branch = cfg.arch.branch;
        const auto plain = forward(manual.strong, x, t, c, o);
        const auto weak = weak_velocity(cfg, manual, batch, o.want_branch ? &plain.branch : nullptr);
        std::vector<Vec2> g(batch.size());
        for (std::size_t i = 0; i < batch.size(); ++i) {
            g[i] = Vec2(plain.velocity.col(static_cast<Eigen::Index>(i))) - weak[i];
        }
        // Perturbing the weak source after g is frozen must not matter.
        if (manual.weak) {
            randomize_heads(*manual.weak, 99);
        }
        ForwardTrace tr;
        const auto r = forward(manual.strong, x, t, c, o, &tr);
        const auto B = static_cast<Eigen::Index>(batch.size());
        Matrix gv(2, B);
        Matrix gbr(2, B);
        for (Eigen::Index i = 0; i < B; ++i) {
            const auto& p = batch[static_cast<std::size_t>(i)];
            const bool cag = v == Variant::sgg && p.t <= cfg.tau;
            const Vec2 target = cag ? w2s_target(p.u, g[static_cast<std::size_t>(i)], cfg.w, p.t, 0.0, 1.0)
                                    : w2s_target(p.u, g[static_cast<std::size_t>(i)], cfg.w, p.t, cfg.t_lo, cfg.t_hi);
            gv.col(i) = (2.0 / static_cast<double>(B)) * (Vec2(r.velocity.col(i)) - target);
            if (o.want_branch) {
                gbr.col(i) = (2.0 / static_cast<double>(B)) * (Vec2(r.branch.col(i)) - p.u);
            }
        }
        auto grads = manual.strong.zeros_like();
        backward(manual.strong, tr, gv, o.want_branch ? &gbr : nullptr, grads);
        adam_step(manual.strong, grads, manual.opt);
        CHECK(same_params(st.strong, manual.strong));
    }
}

TEST_CASE("branch head never receives gradient from g") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    // Two br runs that differ only in w: the branch head update is identical on step 0.
    auto a_cfg = tiny_config(Variant::br, 41);
    auto b_cfg = a_cfg;
    b_cfg.w = 0.9;
    auto a = init_train_state(a_cfg, 12);
    randomize_heads(a.strong, 7);
    auto b = a;
    train_step(a, a_cfg, &spec);
    train_step(b, b_cfg, &spec);
    CHECK(a.strong.w_br() == b.strong.w_br());
    CHECK(a.strong.b_br() == b.strong.b_br());
    CHECK(a.strong.w_out() != b.strong.w_out());
}

TEST_CASE("ag cadence and budgets") {
    const auto spec = build_recursive_mixture(preset_config(Preset::A));
    auto cfg = tiny_config(Variant::ag, 3);
    cfg.batch = 4;
    cfg.iters = 400;
    cfg.weak_update_ratio = 4;
    const auto r = train_loop(cfg, &spec, 4);
    CHECK(r.log.strong_iters == 400);
    CHECK(r.log.weak_iters == 100);
    CHECK(r.state.weak_opt->step == 100);

    const auto bud = toy_budget(Preset::A);
    CHECK(bud.iters_main == (1 << 15));
    CHECK(bud.iters_weak == (1 << 11));
    CHECK(bud.tau == 0.5);
    CHECK(toy_budget(Preset::B).iters_main == (1 << 12));
    CHECK(toy_budget(Preset::B).iters_weak == (1 << 10));
    CHECK(toy_budget(Preset::B).tau == 0.1);
    CHECK(toy_budget(Preset::C).tau == 0.3);

    // Config A's full budget on a minimal net: 2^15 strong and 2^11 weak steps.
    auto full = TrainConfig::defaults(Variant::baseline);
    full.arch = tiny_arch(false);
    full.arch.d_h = 2;
    full.arch.n_blocks = 1;
    full.weak_arch = full.arch;
    full.batch = 1;
    full.co_train_weak = true;
    full.iters = bud.iters_main;
    full.weak_update_ratio = bud.weak_update_ratio();
    full.log_every = 1 << 12;
    const auto fr = train_loop(full, &spec, 4);
    CHECK(fr.log.strong_iters == (1 << 15));
    CHECK(fr.log.weak_iters == (1 << 11));
    CHECK(fr.log.records.back().iter == (1 << 15) - 1);
}

TEST_CASE("zero iterations leave the initial parameters") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    auto cfg = tiny_config(Variant::mg, 5);
    cfg.iters = 0;
    const auto r = train_loop(cfg, &spec, 12);
    CHECK(same_params(r.state.strong, init_train_state(cfg, 12).strong));
    CHECK(r.log.records.empty());
}

TEST_CASE("training is deterministic and seed-sensitive") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    const auto data = sample_dataset(spec, 500, 2);
    auto cfg = tiny_config(Variant::sgg, 8);
    cfg.iters = 20;
    const auto a = train_loop(cfg, &data, 12);
    const auto b = train_loop(cfg, &data, 12);
    CHECK(same_params(a.state.strong, b.state.strong));
    CHECK(a.log.to_csv() == b.log.to_csv());
    cfg.seed = 9;
    CHECK(!same_params(a.state.strong, train_loop(cfg, &data, 12).state.strong));
}

TEST_CASE("checkpoint hook cadence") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    auto cfg = tiny_config(Variant::baseline, 5);
    cfg.iters = 10;
    std::vector<std::int64_t> seen;
    train_loop(cfg, &spec, 12, [&](const TrainState& s) { seen.push_back(s.iter); }, 4);
    CHECK(seen == std::vector<std::int64_t>{4, 8});
}

TEST_CASE("config validation") {
    auto cfg = TrainConfig::defaults(Variant::mg);
    cfg.unconditional = true;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig::defaults(Variant::sgg);
    cfg.cond_dropout = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig::defaults(Variant::br);
    cfg.arch.branch = false;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig::defaults(Variant::baseline);
    cfg.w = -1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = TrainConfig::defaults(Variant::baseline);
    cfg.t_lo = 0.9;
    cfg.t_hi = 0.1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_variant("cfg"), std::invalid_argument);
    for (Variant v : {Variant::baseline, Variant::mg, Variant::ag, Variant::br, Variant::sgg, Variant::slg_warm}) {
        CHECK(parse_variant(to_string(v)) == v);
        CHECK_NOTHROW(TrainConfig::defaults(v).validate());
    }
    CHECK(TrainConfig::defaults(Variant::sgg).w == 0.6);
    CHECK(TrainConfig::defaults(Variant::sgg).t_lo == 0.2);
    CHECK(TrainConfig::defaults(Variant::sgg).t_hi == 0.8);
    CHECK(TrainConfig::defaults(Variant::mg).w == 0.5);
    CHECK(TrainConfig::defaults(Variant::ag).w == 0.3);
    CHECK(TrainConfig::defaults(Variant::br).w == 0.3);
}

TEST_CASE("non-finite loss aborts with diagnostics") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    auto cfg = tiny_config(Variant::baseline, 5);
    auto st = init_train_state(cfg, 12);
    st.strong.w_out()(0, 0) = NAN;
    CHECK_THROWS_WITH_AS(train_step(st, cfg, &spec), doctest::Contains("non-finite training loss at iteration 0"),
                         std::runtime_error);
}
