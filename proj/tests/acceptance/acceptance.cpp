// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and runtime
// limits are pinned below; runs go through the same subcommands as the CLI.

#include "w2s/checkpoint.hpp"
#include "w2s/guidance.hpp"
#include "w2s/metrics.hpp"
#include "w2s/net.hpp"
#include "w2s/oracle.hpp"
#include "w2s/runner.hpp"
#include "w2s/sampler.hpp"
#include "w2s/textio.hpp"
#include "w2s/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

namespace {

using namespace w2s;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// --- Pinned tolerances and limits ------------------------------------------

constexpr double kOracleRelTol = 1e-9;
constexpr double kClosedFormRelTol = 1e-12;
constexpr double kOracleSeconds = 1.0;
constexpr double kConsistencyMsd = 1e-3;
constexpr double kConsistencySeconds = 30.0;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 10.0;
constexpr double kMeanTol = 0.05;
constexpr double kBayesFraction = 0.99;
constexpr double kSamplerSeconds = 120.0;
constexpr double kTrainSecondsPerConfig = 600.0;
constexpr double kCurveSeconds = 300.0;
constexpr double kHighBandLo = 0.7, kHighBandHi = 0.95;
constexpr double kLowBandLo = 0.05, kLowBandHi = 0.3;
constexpr std::int64_t kVariantIters = 1 << 14;
constexpr double kVariantSeconds = 2400.0;
constexpr std::size_t kVariantStates = 10000;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

double median_of(std::vector<double> v) { return median(std::move(v)); }

// --- 1. Oracle exactness -----------------------------------------------------

// Unnormalized Gaussian sums in extended precision, no max shift.
Vec2 brute_empirical(const Dataset& d, const Vec2& x, double t, Condition c) {
    long double z = 0.0L, ex = 0.0L, ey = 0.0L;
    const long double lt = t;
    for (const auto& p : d.points) {
        if (!c.is_null() && p.class_label != c.value()) {
            continue;
        }
        const long double dx = static_cast<long double>(x.x()) - (1.0L - lt) * p.x0.x();
        const long double dy = static_cast<long double>(x.y()) - (1.0L - lt) * p.x0.y();
        const long double w = std::exp(-(dx * dx + dy * dy) / (2.0L * lt * lt));
        z += w;
        ex += w * (static_cast<long double>(x.x()) - p.x0.x());
        ey += w * (static_cast<long double>(x.y()) - p.x0.y());
    }
    return {static_cast<double>(ex / (z * lt)), static_cast<double>(ey / (z * lt))};
}

Outcome criterion1() {
    const auto t0 = Clock::now();
    Rng rng(2026);
    std::uniform_real_distribution<double> ut(0.05, 1.0);
    double worst = 0.0;
    int queries = 0;
    while (queries < 100) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 64);
        Dataset d;
        for (std::size_t i = 0; i < n; ++i) {
            d.points.push_back({standard_normal2(rng), 1 + static_cast<int>(i % 3)});
        }
        for (int k = 0; k < 10 && queries < 100; ++k, ++queries) {
            const Vec2 x = 1.5 * standard_normal2(rng);
            const double t = ut(rng);
            Condition c = Condition::null();
            if (k % 4 != 0 && n >= 3) {
                c = Condition::label(1 + k % 3);
            }
            const Vec2 ref = brute_empirical(d, x, t, c);
            const Vec2 v = optimal_velocity_empirical(d, {x, t, c});
            worst = std::max(worst, (v - ref).norm() / std::max(ref.norm(), 1e-300));
        }
    }
    double worst1 = 0.0;
    std::uniform_real_distribution<double> ut1(1e-3, 1.0);
    for (int k = 0; k < 100; ++k) {
        Dataset one;
        one.points.push_back({standard_normal2(rng), 1});
        const Vec2 x = standard_normal2(rng);
        const double t = ut1(rng);
        const Vec2 ref = (x - one.points[0].x0) / t;
        const Vec2 v = optimal_velocity_empirical(one, {x, t, k % 2 ? Condition::null() : Condition::label(1)});
        worst1 = std::max(worst1, (v - ref).norm() / ref.norm());
    }
    const double s = seconds_since(t0);
    return {worst < kOracleRelTol && worst1 <= kClosedFormRelTol && s < kOracleSeconds,
            "max rel err " + fmt(worst) + " (N<=64), " + fmt(worst1) + " (N=1), " + fmt(s) + " s"};
}

// --- 2. Mixture / empirical consistency --------------------------------------

Outcome criterion2() {
    const auto t0 = Clock::now();
    const auto spec = build_recursive_mixture(preset_config(Preset::B));
    const auto data = sample_dataset(spec, 100000, 202);
    const MixtureOracle mix(spec);
    const EmpiricalOracle emp(data, spec.num_classes());
    double worst = 0.0;
    std::size_t stream = 0;
    for (double t : {0.2, 0.5, 0.8}) {
        std::vector<Vec2> x;
        std::vector<Condition> c;
        draw_noised_states(&spec, t, 200, 203, stream++, false, x, c);
        std::vector<Vec2> a(x.size()), b(x.size());
        mix.eval(x, t, c, a);
        emp.eval(x, t, c, b);
        double msd = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            msd += (a[i] - b[i]).squaredNorm();
        }
        worst = std::max(worst, msd / static_cast<double>(x.size()));
    }
    const double s = seconds_since(t0);
    return {worst < kConsistencyMsd && s < kConsistencySeconds,
            "max MSD over t " + fmt(worst) + ", " + fmt(s) + " s"};
}

// --- 3. Gradients ------------------------------------------------------------

Outcome criterion3() {
    const auto t0 = Clock::now();
    NetArch arch;
    arch.d_h = 8;
    arch.branch = true;
    auto p = init_params(arch, 3, 31);
    Rng rng(32);
    std::normal_distribution<double> n01(0.0, 1.0);
    for (auto& t : p.tensors) {
        for (Eigen::Index i = 0; i < t.value.size(); ++i) {
            t.value.data()[i] = 0.3 * n01(rng);  // O(1) activations keep the loss well conditioned
        }
    }
    std::uniform_real_distribution<double> ut(0.01, 0.99);
    const std::size_t n = 6;
    std::vector<Vec2> x;
    std::vector<double> tt;
    std::vector<int> c;
    Matrix y(2, static_cast<Eigen::Index>(n)), yb(2, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        x.push_back(standard_normal2(rng));
        tt.push_back(ut(rng));
        c.push_back(static_cast<int>(i % 4));
        y.col(static_cast<Eigen::Index>(i)) = standard_normal2(rng);
        yb.col(static_cast<Eigen::Index>(i)) = standard_normal2(rng);
    }
    ForwardOptions o;
    o.want_branch = true;
    auto loss = [&](const NetParams& q) {
        const auto r = forward(q, x, tt, c, o);
        return (r.velocity - y).squaredNorm() + (r.branch - yb).squaredNorm();
    };
    ForwardTrace tr;
    const auto r = forward(p, x, tt, c, o, &tr);
    const Matrix gv = 2.0 * (r.velocity - y);
    const Matrix gb = 2.0 * (r.branch - yb);
    NetParams g = p.zeros_like();
    backward(p, tr, gv, &gb, g);

    const double h = 1e-4;
    double worst = 0.0;
    std::size_t checked = 0;
    for (std::size_t k = 0; k < p.tensors.size(); ++k) {
        for (Eigen::Index i = 0; i < p.tensors[k].value.size(); ++i) {
            NetParams q = p;
            q.tensors[k].value.data()[i] += h;
            const double lp = loss(q);
            q.tensors[k].value.data()[i] -= 2 * h;
            const double lm = loss(q);
            const double fd = (lp - lm) / (2 * h);
            const double an = g.tensors[k].value.data()[i];
            worst = std::max(worst, std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6}));
            ++checked;
        }
    }
    const double s = seconds_since(t0);
    return {worst < kGradRelTol && s < kGradSeconds,
            std::to_string(checked) + " parameters, max rel err " + fmt(worst) + ", " + fmt(s) + " s"};
}

// --- 4. Guidance identities --------------------------------------------------

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

std::shared_ptr<NetParams> random_net(std::uint64_t seed, int d_h) {
    NetArch arch;
    arch.d_h = d_h;
    arch.n_blocks = 3;
    auto p = std::make_shared<NetParams>(init_params(arch, 4, seed));
    Rng rng(seed + 1);
    std::normal_distribution<double> n01(0.0, 0.4);
    for (auto& t : p->tensors) {
        for (Eigen::Index i = 0; i < t.value.size(); ++i) {
            t.value.data()[i] = n01(rng);
        }
    }
    return p;
}

Outcome criterion4() {
    const NetField strong(random_net(41, 16));
    const NetField weak(random_net(43, 8));
    const GuidanceModels m{&strong, &weak};
    Rng rng(44);
    std::vector<std::string> failed;

    // (a) unit scales
    bool a = true;
    for (const auto& g : {GuidanceSpec::unguided(), GuidanceSpec::cfg(1.0), GuidanceSpec::ag(1.0),
                          GuidanceSpec::skip(1.0, {1}), GuidanceSpec::segmented(1.0, 1.0, 0.3)}) {
        std::vector<Vec2> x;
        std::vector<Condition> c;
        for (int k = 0; k < 64; ++k) {
            x.push_back(standard_normal2(rng));
            c.push_back(Condition::label(1 + k % 4));
        }
        const GuidedField f(m, g);
        for (double t : {0.01, 0.3, 0.5, 0.99}) {
            std::vector<Vec2> got(x.size()), ref(x.size());
            f.eval(x, t, c, got);
            strong.eval(x, t, c, ref);
            a = a && got == ref;
        }
    }
    if (!a) {
        failed.push_back("a");
    }

    // (b) SGG on every sampler grid point
    bool b = true;
    SamplerSpec sp;
    sp.steps = 128;
    const double tau = 0.3;
    for (auto source : {CagSource::weak_model, CagSource::skip_blocks}) {
        auto sgg = GuidanceSpec::segmented(2.0, 1.5, tau);
        sgg.sgg_cag = source;
        sgg.skip_blocks = {1};
        const auto cag = source == CagSource::weak_model ? GuidanceSpec::ag(1.5) : GuidanceSpec::skip(1.5, {1});
        for (double t : sp.grid()) {
            const Vec2 x = standard_normal2(rng);
            const Condition c = Condition::label(2);
            const Vec2 v = guided_velocity(m, sgg, x, t, c);
            b = b && v == guided_velocity(m, t > tau ? GuidanceSpec::cfg(2.0) : cag, x, t, c);
        }
    }
    if (!b) {
        failed.push_back("b");
    }

    // (c) interval gating
    bool cgate = true;
    for (auto g : {GuidanceSpec::cfg(3.0), GuidanceSpec::ag(2.0), GuidanceSpec::skip(2.0, {0}),
                   GuidanceSpec::segmented(2.0, 2.0, 0.5)}) {
        g.t_lo = 0.3;
        g.t_hi = 0.7;
        for (double t : sp.grid()) {
            const Vec2 x = standard_normal2(rng);
            const Vec2 v = guided_velocity(m, g, x, t, Condition::label(3));
            const bool outside = t < g.t_lo || t > g.t_hi;
            cgate = cgate && (v == strong.at(x, t, Condition::label(3))) == outside;
        }
    }
    if (!cgate) {
        failed.push_back("c");
    }

    // (d) w = 0 training equals baseline under shared seeds
    bool d = true;
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    for (Variant v : {Variant::mg, Variant::ag, Variant::br, Variant::sgg, Variant::slg_warm}) {
        auto cfg = TrainConfig::defaults(v);
        auto base = TrainConfig::defaults(Variant::baseline);
        for (auto* t : {&cfg, &base}) {
            t->arch.d_h = 16;
            t->weak_arch.d_h = 8;
            t->batch = 32;
            t->iters = 40;
            t->seed = 45;
        }
        base.arch.branch = cfg.arch.branch;
        base.co_train_weak = cfg.uses_weak_net();
        cfg.co_train_weak = cfg.uses_weak_net();
        cfg.w = 0.0;
        const auto ra = train_loop(base, &spec, spec.num_classes());
        const auto rb = train_loop(cfg, &spec, spec.num_classes());
        d = d && same_params(ra.state.strong, rb.state.strong);
    }
    if (!d) {
        failed.push_back("d");
    }
    std::string detail = failed.empty() ? "(a)-(d) bit-exact" : "failed:";
    for (const auto& f : failed) {
        detail += " (" + f + ")";
    }
    return {failed.empty(), detail};
}

// --- 5. Sampler fidelity with the exact oracle -------------------------------

Outcome criterion5() {
    const auto t0 = Clock::now();
    const auto spec = build_recursive_mixture(preset_config(Preset::B));
    const MixtureOracle oracle(spec);

    // Bayes rate E[max_c p(c | x)] from ground-truth draws.
    const auto gt = sample_dataset(spec, 100000, 501);
    std::vector<Vec2> gx;
    for (const auto& p : gt.points) {
        gx.push_back(p.x0);
    }
    const auto& classes = spec.selected_classes();
    std::vector<std::vector<double>> ll(classes.size());
    for (std::size_t k = 0; k < classes.size(); ++k) {
        for (const auto& x : gx) {
            ll[k].push_back(log_density(spec, x, Condition::label(classes[k]), 0.0));
        }
    }
    double bayes = 0.0;
    for (std::size_t i = 0; i < gx.size(); ++i) {
        double mx = -INFINITY;
        for (const auto& l : ll) {
            mx = std::max(mx, l[i]);
        }
        double z = 0.0;
        for (const auto& l : ll) {
            z += std::exp(l[i] - mx);
        }
        bayes += 1.0 / z;
    }
    bayes /= static_cast<double>(gx.size());

    double worst_mean = 0.0;
    double worst_acc = 1.0;
    const auto prompts = uniform_class_prompts(classes, 4096);
    for (auto kind : {SamplerKind::ode_euler, SamplerKind::sde_euler_maruyama}) {
        SamplerSpec sp;
        sp.kind = kind;
        sp.steps = kind == SamplerKind::ode_euler ? 128 : 256;
        sp.seed = 502;
        const auto b = sample(oracle, sp, prompts);
        std::map<int, Vec2> sum;
        std::map<int, int> n;
        for (std::size_t i = 0; i < b.finals.size(); ++i) {
            sum.try_emplace(b.classes[i].raw(), Vec2::Zero());
            sum[b.classes[i].raw()] += b.finals[i];
            ++n[b.classes[i].raw()];
        }
        for (const auto& [c, s] : sum) {
            worst_mean = std::max(worst_mean, (s / n[c] - spec.class_mean(Condition::label(c))).norm());
        }
        worst_acc = std::min(worst_acc, class_accuracy(spec, b.finals, b.classes));
    }
    const double s = seconds_since(t0);
    return {worst_mean < kMeanTol && worst_acc >= kBayesFraction * bayes && s < kSamplerSeconds,
            "max class-mean error " + fmt(worst_mean) + ", accuracy " + fmt(worst_acc) + " vs Bayes " + fmt(bayes) +
                " (ODE 128 / SDE 256 steps), " + fmt(s) + " s"};
}

// --- Trained runs ------------------------------------------------------------

double timing_stage(const fs::path& timing_file, const std::string& stage) {
    const auto j = nlohmann::json::parse(text::read_file(timing_file));
    return j.at("wall_seconds").at(stage).get<double>();
}

class Runs {
public:
    Runs(fs::path work, int seeds) : work_(std::move(work)), seeds_(seeds) {}

    int seeds() const { return seeds_; }
    const fs::path& work() const { return work_; }

    struct Repro {
        ReproResult result;
        fs::path dir;
        double train_s = 0.0;
        double curve_s = 0.0;
    };

    const Repro& repro(const std::string& preset, int seed, const std::string& tag = "") {
        const auto key = preset + std::to_string(seed) + tag;
        if (auto it = repro_.find(key); it != repro_.end()) {
            return it->second;
        }
        Config cfg;
        cfg.apply_overrides({"mixture.preset=" + preset, "run.seed=" + std::to_string(seed)});
        Repro r;
        r.dir = work_ / ("repro_" + key);
        fs::remove_all(r.dir);
        std::cerr << "[acceptance] repro " << preset << " seed " << seed << tag << "\n";
        r.result = run_repro(cfg, r.dir, &std::cerr);
        r.train_s = timing_stage(timing_path(r.dir / "repro"), "train");
        r.curve_s = timing_stage(timing_path(r.dir / "repro"), "error_curve");
        return repro_.emplace(key, std::move(r)).first->second;
    }

private:
    fs::path work_;
    int seeds_;
    std::map<std::string, Repro> repro_;
};

const EvalReport& report(const ReproResult& r, GuidanceKind k) {
    static const std::map<GuidanceKind, std::size_t> index = {
        {GuidanceKind::none, 0}, {GuidanceKind::cdg_cfg, 1}, {GuidanceKind::cag_ag, 2}, {GuidanceKind::sgg, 3}};
    return r.reports.at(index.at(k));
}

struct Medians {
    std::map<GuidanceKind, double> outlier, coverage;
    double max_train_s = 0.0;
    std::string per_seed;
};

Medians regime_medians(Runs& runs, const std::string& preset) {
    std::map<GuidanceKind, std::vector<double>> o, c;
    Medians m;
    for (int s = 0; s < runs.seeds(); ++s) {
        const auto& r = runs.repro(preset, s);
        for (auto k : {GuidanceKind::none, GuidanceKind::cdg_cfg, GuidanceKind::cag_ag, GuidanceKind::sgg}) {
            o[k].push_back(report(r.result, k).outlier_rate);
            c[k].push_back(report(r.result, k).mode_coverage);
        }
        m.max_train_s = std::max(m.max_train_s, r.train_s);
    }
    for (auto& [k, v] : o) {
        m.outlier[k] = median_of(v);
        m.coverage[k] = median_of(c[k]);
    }
    return m;
}

Outcome criterion6(Runs& runs) {
    const auto a = regime_medians(runs, "A");
    const auto b = regime_medians(runs, "B");
    const auto c = regime_medians(runs, "C");
    using K = GuidanceKind;
    const bool pa = b.outlier.at(K::cdg_cfg) < b.outlier.at(K::none);
    const bool pb = a.coverage.at(K::cag_ag) >= a.coverage.at(K::cdg_cfg) &&
                    a.coverage.at(K::cdg_cfg) < a.coverage.at(K::none);
    const bool pc = c.outlier.at(K::sgg) <= c.outlier.at(K::cag_ag) && c.coverage.at(K::sgg) >= c.coverage.at(K::cdg_cfg);
    const double train = std::max({a.max_train_s, b.max_train_s, c.max_train_s});
    const bool pt = train < kTrainSecondsPerConfig;
    std::string d = std::string("(a) ") + (pa ? "ok" : "FAIL") + " B outlier cfg " + fmt(b.outlier.at(K::cdg_cfg)) +
                    " vs unguided " + fmt(b.outlier.at(K::none)) + "; (b) " + (pb ? "ok" : "FAIL") +
                    " A coverage ag " + fmt(a.coverage.at(K::cag_ag)) + " cfg " + fmt(a.coverage.at(K::cdg_cfg)) +
                    " unguided " + fmt(a.coverage.at(K::none)) + "; (c) " + (pc ? "ok" : "FAIL") +
                    " C outlier sgg " + fmt(c.outlier.at(K::sgg)) + " ag " + fmt(c.outlier.at(K::cag_ag)) +
                    ", coverage sgg " + fmt(c.coverage.at(K::sgg)) + " cfg " + fmt(c.coverage.at(K::cdg_cfg)) +
                    "; max train " + fmt(train) + " s";
    return {pa && pb && pc && pt, d};
}

double band_mean(const ErrorCurve& base, const ErrorCurve& g, double lo, double hi) {
    double s = 0.0;
    int n = 0;
    for (std::size_t j = 0; j < base.t_grid.size(); ++j) {
        if (base.t_grid[j] >= lo && base.t_grid[j] <= hi) {
            s += base.values[j] - g.values[j];
            ++n;
        }
    }
    if (n == 0) {
        throw std::logic_error("empty t band");
    }
    return s / n;
}

Outcome criterion7(Runs& runs) {
    std::vector<double> high, low;
    double curve_s = 0.0;
    for (int s = 0; s < runs.seeds(); ++s) {
        const auto& r = runs.repro("C", s);
        const auto& cv = r.result.curves;  // unguided, cfg, ag, sgg
        if (cv.at(0).n_states < 10000) {
            throw std::logic_error("error curves need 10^4 states per t");
        }
        high.push_back(band_mean(cv[0], cv[1], kHighBandLo, kHighBandHi) -
                       band_mean(cv[0], cv[2], kHighBandLo, kHighBandHi));
        low.push_back(band_mean(cv[0], cv[1], kLowBandLo, kLowBandHi) - band_mean(cv[0], cv[2], kLowBandLo, kLowBandHi));
        curve_s = std::max(curve_s, r.curve_s);
    }
    const double h = median_of(high), l = median_of(low);
    return {h > 0.0 && l < 0.0 && curve_s < kCurveSeconds,
            "median (cfg - ag reduction) on [0.7,0.95] " + fmt(h) + " (> 0), on [0.05,0.3] " + fmt(l) +
                " (< 0); curves " + fmt(curve_s) + " s"};
}

Outcome criterion8(Runs& runs) {
    const std::vector<std::string> variants = {"baseline", "mg", "ag", "br", "sgg"};
    std::map<std::string, std::vector<double>> per;
    double train_s = 0.0;
    for (int s = 0; s < runs.seeds(); ++s) {
        Config base;
        base.apply_overrides({"mixture.preset=C", "run.seed=" + std::to_string(s)});
        const auto dir = runs.work() / ("variants_C" + std::to_string(s));
        fs::remove_all(dir);
        const auto dp = run_dataset(base, dir);
        const auto spec = build_spec(base);
        const MixtureOracle oracle(spec);
        for (const auto& v : variants) {
            Config cfg;
            cfg.apply_overrides({"mixture.preset=C", "run.seed=" + std::to_string(s), "train.variant=" + v,
                                 "train.iters=" + std::to_string(kVariantIters)});
            std::cerr << "[acceptance] train " << v << " C seed " << s << "\n";
            const auto tp = run_train(cfg, dp.spec, dp.data, dir / v);
            train_s += timing_stage(timing_path(tp.strong), "train");
            const NetField net(std::make_shared<NetParams>(load_checkpoint(tp.strong)));
            const auto mse = velocity_field_mse(net, oracle, &spec, midpoint_grid(), kVariantStates,
                                                mix_seed(static_cast<std::uint64_t>(s), kCurveStream));
            per[v].push_back(median_of(mse));
        }
    }
    std::map<std::string, double> med;
    std::string d;
    for (const auto& v : variants) {
        med[v] = median_of(per[v]);
        d += v + " " + fmt(med[v]) + ", ";
    }
    bool ok = med["sgg"] <= med["mg"] && med["sgg"] <= med["br"];
    for (const auto& v : {"mg", "ag", "br", "sgg"}) {
        ok = ok && med[v] <= med["baseline"];
    }
    ok = ok && train_s < kVariantSeconds;
    return {ok, "median velocity MSE: " + d + "total train " + fmt(train_s) + " s"};
}

Outcome criterion9(Runs& runs) {
    const std::vector<std::string> variants = {"baseline", "br", "ag"};
    std::map<std::string, std::vector<double>> per;
    for (int s = 0; s < runs.seeds(); ++s) {
        Config base;
        base.apply_overrides({"mixture.preset=A", "run.seed=" + std::to_string(s), "train.unconditional=true"});
        const auto dir = runs.work() / ("uncond_A" + std::to_string(s));
        fs::remove_all(dir);
        const auto dp = run_dataset(base, dir);
        for (const auto& v : variants) {
            Config cfg;
            cfg.apply_overrides({"mixture.preset=A", "run.seed=" + std::to_string(s), "train.unconditional=true",
                                 "train.variant=" + v, "guidance.kind=none"});
            std::cerr << "[acceptance] train unconditional " << v << " A seed " << s << "\n";
            const auto tp = run_train(cfg, dp.spec, dp.data, dir / v);
            run_sample(cfg, dp.spec, tp.strong, {}, dir / v / "samples.csv");
            per[v].push_back(run_eval(cfg, dp.spec, dir / v / "samples.csv", dir / v / "eval").outlier_rate);
        }
    }
    const double b = median_of(per["baseline"]), br = median_of(per["br"]), ag = median_of(per["ag"]);
    return {br < b && ag < b,
            "median unguided outlier rate: baseline " + fmt(b) + ", br " + fmt(br) + ", ag " + fmt(ag)};
}

Outcome criterion10(Runs& runs) {
    const auto& a = runs.repro("C", 0);
    const auto& b = runs.repro("C", 0, "_rerun");
    std::set<std::string> names;
    for (const auto& e : fs::directory_iterator(a.dir)) {
        const auto n = e.path().filename().string();
        const bool is_csv = e.path().extension() == ".csv";
        const bool is_manifest = n.size() > 14 && n.ends_with(".manifest.json");
        if (is_csv || is_manifest) {
            names.insert(n);
        }
    }
    std::vector<std::string> differ;
    for (const auto& n : names) {
        if (!fs::exists(b.dir / n) || text::read_file(a.dir / n) != text::read_file(b.dir / n)) {
            differ.push_back(n);
        }
    }
    std::string d = std::to_string(names.size()) + " CSVs and manifests compared";
    for (const auto& n : differ) {
        d += "; differs: " + n;
    }
    return {differ.empty() && names.size() >= 10, d};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"w2sflow acceptance suite"};
    std::string work = "acceptance_work";
    std::vector<int> only;
    int seeds = 3;
    app.add_option("--work", work, "scratch directory for trained runs");
    app.add_option("--only", only, "run only these criteria (1-10)")->check(CLI::Range(1, 10));
    app.add_option("--seeds", seeds, "seeds per regime (3 for the real check)")->check(CLI::Range(1, 9));
    CLI11_PARSE(app, argc, argv);

    Runs runs(work, seeds);
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
        {"oracle exactness", criterion1},
        {"mixture/empirical oracle consistency", criterion2},
        {"gradient correctness", criterion3},
        {"guidance identities", criterion4},
        {"sampler fidelity with the exact oracle", criterion5},
        {"regime reproduction", [&] { return criterion6(runs); }},
        {"error-curve temporal separation", [&] { return criterion7(runs); }},
        {"training-time W2S benefit", [&] { return criterion8(runs); }},
        {"unconditional W2S", [&] { return criterion9(runs); }},
        {"reproducibility of repro C", [&] { return criterion10(runs); }},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = static_cast<int>(i) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) {
            continue;
        }
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first
                  << "): " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
