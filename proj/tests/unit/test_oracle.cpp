// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/oracle.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace w2s;

namespace {

// Brute force: unnormalized Gaussian sums in extended precision, no max shift.
Vec2 brute_empirical(const Dataset& d, const Vec2& x, double t, Condition c) {
    long double z = 0.0L;
    long double ex = 0.0L;
    long double ey = 0.0L;
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

Dataset random_dataset(std::size_t n, int classes, Rng& rng) {
    Dataset d;
    for (std::size_t i = 0; i < n; ++i) {
        d.points.push_back({standard_normal2(rng), 1 + static_cast<int>(i % static_cast<std::size_t>(classes))});
    }
    return d;
}

}  // namespace

TEST_CASE("single point: v = (x_t - x0) / t") {
    Dataset d;
    d.points.push_back({Vec2(0.0, 0.0), 1});
    const Vec2 v = optimal_velocity_empirical(d, {Vec2(0.5, 0.5), 0.5, Condition::label(1)});
    CHECK((v - Vec2(1.0, 1.0)).norm() < 1e-12);

    Rng rng(3);
    for (int k = 0; k < 50; ++k) {
        Dataset one;
        one.points.push_back({standard_normal2(rng), 1});
        const Vec2 x = standard_normal2(rng);
        const double t = std::uniform_real_distribution<double>(1e-3, 1.0)(rng);
        const Vec2 ref = (x - one.points[0].x0) / t;
        CHECK((optimal_velocity_empirical(one, {x, t, Condition::null()}) - ref).norm() <= 1e-12 * ref.norm());
    }
}

TEST_CASE("two symmetric points cancel") {
    Dataset d;
    d.points.push_back({Vec2(-1.0, 0.0), 1});
    d.points.push_back({Vec2(1.0, 0.0), 1});
    CHECK(optimal_velocity_empirical(d, {Vec2::Zero(), 0.5, Condition::label(1)}).norm() < 1e-15);
}

TEST_CASE("empirical oracle matches an extended-precision brute force") {
    Rng rng(42);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t n = 1 + static_cast<std::size_t>(rng() % 64);
        const auto d = random_dataset(n, 3, rng);
        for (int k = 0; k < 10; ++k) {
            const Vec2 x = 1.5 * standard_normal2(rng);
            const double t = std::uniform_real_distribution<double>(0.05, 1.0)(rng);
            const Condition c = k % 4 == 0 ? Condition::null() : Condition::label(1 + k % 3);
            if (!c.is_null() && n < 3 && c.value() > static_cast<int>(n)) {
                continue;
            }
            const Vec2 v = optimal_velocity_empirical(d, {x, t, c});
            const Vec2 ref = brute_empirical(d, x, t, c);
            CHECK((v - ref).norm() <= 1e-9 * ref.norm() + 1e-300);
        }
    }
}

TEST_CASE("empirical oracle: shifting data by a and the query by (1 - t) a shifts v by -a") {
    Rng rng(5);
    const auto d = random_dataset(40, 2, rng);
    const Vec2 a(3.0, -2.0);
    Dataset shifted = d;
    for (auto& p : shifted.points) {
        p.x0 += a;
    }
    for (int k = 0; k < 20; ++k) {
        const Vec2 x = standard_normal2(rng);
        const double t = 0.1 + 0.04 * k;
        const Condition c = Condition::label(1 + k % 2);
        const Vec2 v = optimal_velocity_empirical(d, {x, t, c});
        const Vec2 vs = optimal_velocity_empirical(shifted, {x + (1.0 - t) * a, t, c});
        CHECK((vs - (v - a)).norm() < 1e-12 * (1.0 + v.norm() + a.norm()) * 10);
    }
}

TEST_CASE("small t: the nearest atom dominates") {
    Dataset d;
    for (int i = 0; i < 5; ++i) {
        d.points.push_back({Vec2(0.1 * i, 0.05 * i * i), 1});
    }
    const double t = 1e-3;
    Rng rng(8);
    for (std::size_t k = 0; k < d.points.size(); ++k) {
        const Vec2 eps = standard_normal2(rng);
        const Vec2 x = (1.0 - t) * d.points[k].x0 + t * eps;
        const Vec2 ref = (x - d.points[k].x0) / t;
        const Vec2 v = optimal_velocity_empirical(d, {x, t, Condition::label(1)});
        CHECK((v - ref).norm() <= 1e-6 * ref.norm());
    }
}

TEST_CASE("empirical oracle is stable at t = 1e-4") {
    Rng rng(9);
    const auto d = random_dataset(64, 1, rng);
    for (int k = 0; k < 20; ++k) {
        const Vec2 v = optimal_velocity_empirical(d, {standard_normal2(rng), 1e-4, Condition::null()});
        CHECK(v.allFinite());
    }
}

TEST_CASE("empirical oracle errors") {
    Dataset d;
    d.points.push_back({Vec2::Zero(), 1});
    CHECK_THROWS_AS(optimal_velocity_empirical(d, {Vec2::Zero(), 0.0, Condition::label(1)}), std::domain_error);
    CHECK_THROWS_AS(optimal_velocity_empirical(d, {Vec2::Zero(), 0.5, Condition::label(2)}), std::invalid_argument);
    CHECK_THROWS(EmpiricalOracle(Dataset{}, 1));
}

TEST_CASE("mixture oracle: single isotropic Gaussian") {
    const MixtureSpec spec({GaussianComponent::make(1.0, Vec2::Zero(), Mat2::Identity(), 1)}, 1);
    const Vec2 v = optimal_velocity_mixture(spec, {Vec2(1.0, 0.0), 0.5, Condition::label(1)});
    CHECK(v.norm() < 1e-15);
    // General isotropic case: E[x0|x_t] = (1-t) x_t / ((1-t)^2 + t^2).
    Rng rng(1);
    for (int k = 0; k < 20; ++k) {
        const Vec2 x = standard_normal2(rng);
        const double t = 0.05 + 0.045 * k;
        const Vec2 ref = (x - (1 - t) * x / ((1 - t) * (1 - t) + t * t)) / t;
        CHECK((optimal_velocity_mixture(spec, {x, t, Condition::null()}) - ref).norm() < 1e-12 * (1 + ref.norm()));
    }
}

TEST_CASE("mixture posterior weights sum to one") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    Rng rng(4);
    for (int k = 0; k < 50; ++k) {
        const Condition c = k % 5 == 0 ? Condition::null() : Condition::label(1 + k % 12);
        const auto w = mixture_posterior_weights(spec, {standard_normal2(rng), 0.01 + 0.019 * k, c});
        double s = 0.0;
        for (double x : w) {
            CHECK(x >= 0.0);
            s += x;
        }
        CHECK(std::abs(s - 1.0) < 1e-12);
        CHECK(w.size() == (c.is_null() ? spec.components().size() : spec.class_components(c.value()).size()));
    }
}

TEST_CASE("mixture and empirical oracles agree in the large-sample limit") {
    const auto spec = build_recursive_mixture(preset_config(Preset::B));
    const auto data = sample_dataset(spec, 100000, 21);
    const MixtureOracle mix(spec);
    const EmpiricalOracle emp(data, spec.num_classes());
    for (double t : {0.2, 0.5, 0.8}) {
        std::vector<Vec2> x;
        std::vector<Condition> c;
        draw_noised_states(&spec, t, 200, 3, 0, false, x, c);
        std::vector<Vec2> a(x.size());
        std::vector<Vec2> b(x.size());
        mix.eval(x, t, c, a);
        emp.eval(x, t, c, b);
        double msd = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            msd += (a[i] - b[i]).squaredNorm();
        }
        msd /= static_cast<double>(x.size());
        CHECK(msd < 1e-3);
    }
}

TEST_CASE("error curve: the oracle itself has zero error at unit scale") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    const MixtureOracle oracle(spec);
    ErrorCurveOptions opts;
    opts.n_states = 500;
    opts.t_grid = midpoint_grid(8);
    for (const auto& g : {GuidanceSpec::unguided(), GuidanceSpec::cfg(1.0), GuidanceSpec::ag(1.0),
                          GuidanceSpec::segmented(1.0, 1.0, 0.3)}) {
        const auto curve = guidance_error_curve({&oracle, &oracle}, g, oracle, &spec, opts);
        REQUIRE(curve.values.size() == opts.t_grid.size());
        for (double v : curve.values) {
            CHECK(v <= 1e-12);
        }
    }
}

TEST_CASE("error curve: unguided equals the raw model MSE") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    const MixtureOracle oracle(spec);
    const FunctionField zero([](const Vec2&, double, Condition) { return Vec2(0.0, 0.0); });
    ErrorCurveOptions opts;
    opts.n_states = 400;
    opts.t_grid = {0.25, 0.75};
    const auto curve = guidance_error_curve({&zero, nullptr}, GuidanceSpec::unguided(), oracle, &spec, opts);
    for (std::size_t j = 0; j < opts.t_grid.size(); ++j) {
        std::vector<Vec2> x;
        std::vector<Condition> c;
        draw_noised_states(&spec, opts.t_grid[j], opts.n_states, opts.seed, j, false, x, c);
        std::vector<Vec2> v(x.size());
        oracle.eval(x, opts.t_grid[j], c, v);
        double s = 0.0;
        for (const auto& e : v) {
            s += e.squaredNorm();
        }
        CHECK(curve.values[j] == doctest::Approx(s / static_cast<double>(x.size())).epsilon(1e-12));
    }
}

TEST_CASE("error curve: sample sizes agree within Monte Carlo error") {
    const auto spec = build_recursive_mixture(preset_config(Preset::C));
    const MixtureOracle oracle(spec);
    const FunctionField zero([](const Vec2&, double, Condition) { return Vec2(0.0, 0.0); });
    ErrorCurveOptions small;
    small.t_grid = {0.1, 0.4, 0.7, 0.95};
    small.n_states = 10000;
    small.seed = 1;
    ErrorCurveOptions large = small;
    large.n_states = 100000;
    large.seed = 2;
    const auto a = guidance_error_curve({&zero, nullptr}, GuidanceSpec::unguided(), oracle, &spec, small);
    const auto b = guidance_error_curve({&zero, nullptr}, GuidanceSpec::unguided(), oracle, &spec, large);
    for (std::size_t j = 0; j < small.t_grid.size(); ++j) {
        CHECK(std::abs(a.values[j] - b.values[j]) < 3.0 * std::hypot(a.stderr_[j], b.stderr_[j]));
    }
}

TEST_CASE("error curve is invariant to dataset point order") {
    const auto spec = build_recursive_mixture(preset_config(Preset::A));
    auto data = sample_dataset(spec, 2000, 6);
    const FunctionField zero([](const Vec2&, double, Condition) { return Vec2(0.0, 0.0); });
    ErrorCurveOptions opts;
    opts.n_states = 300;
    opts.t_grid = {0.3, 0.6};
    const EmpiricalOracle o1(data, 4);
    const auto a = guidance_error_curve({&zero, nullptr}, GuidanceSpec::unguided(), o1, &data, opts);
    Rng rng(1);
    std::shuffle(data.points.begin(), data.points.end(), rng);
    const EmpiricalOracle o2(data, 4);
    const auto b = guidance_error_curve({&zero, nullptr}, GuidanceSpec::unguided(), o2, &data, opts);
    CHECK(a.values == b.values);
}

TEST_CASE("midpoint grid") {
    const auto g = midpoint_grid();
    REQUIRE(g.size() == 28);
    CHECK(g.front() == doctest::Approx(0.5 / 28));
    CHECK(g.back() == doctest::Approx(1.0 - 0.5 / 28));
    CHECK(std::is_sorted(g.begin(), g.end()));
}
