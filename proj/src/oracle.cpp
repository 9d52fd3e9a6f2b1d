// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace w2s {

namespace {

void check_time(double t) {
    if (!(t > 0.0 && t <= 1.0)) {
        throw std::domain_error("optimal velocity needs t in (0, 1]");
    }
}

// Canonical (class, x, y) order makes results independent of point order.
std::vector<std::size_t> canonical_order(const Dataset& data) {
    std::vector<std::size_t> idx(data.points.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        const auto& p = data.points[a];
        const auto& q = data.points[b];
        return std::tuple(p.class_label, p.x0.x(), p.x0.y()) < std::tuple(q.class_label, q.x0.x(), q.x0.y());
    });
    return idx;
}

kernels::PackedPoints pack_dataset(const Dataset& data, int num_classes) {
    std::vector<Vec2> pts;
    std::vector<int> labels;
    for (std::size_t i : canonical_order(data)) {
        pts.push_back(data.points[i].x0);
        labels.push_back(data.points[i].class_label);
    }
    return kernels::pack_points(pts, labels, num_classes);
}

int max_label(const Dataset& data) {
    int m = 0;
    for (const auto& p : data.points) {
        m = std::max(m, p.class_label);
    }
    return m;
}

}  // namespace

Vec2 optimal_velocity_empirical(const Dataset& data, const VelocityQuery& q) {
    return EmpiricalOracle(data, std::max(max_label(data), q.c.raw())).at(q.x_t, q.t, q.c);
}

Vec2 optimal_velocity_mixture(const MixtureSpec& spec, const VelocityQuery& q) {
    return MixtureOracle(spec).at(q.x_t, q.t, q.c);
}

std::vector<double> mixture_posterior_weights(const MixtureSpec& spec, const VelocityQuery& q) {
    check_time(q.t);
    if (!q.c.is_null() && !spec.is_selected(q.c.value())) {
        throw std::invalid_argument("condition " + std::to_string(q.c.raw()) + " is not a selected class");
    }
    const auto m = kernels::pack(spec, q.t);
    const int raw = q.c.raw();
    std::vector<double> w(static_cast<std::size_t>(m.end(raw) - m.begin(raw)));
    kernels::mixture_posterior(m, q.x_t, raw, w);
    return w;
}

EmpiricalOracle::EmpiricalOracle(const Dataset& data, int num_classes) : points_(pack_dataset(data, num_classes)) {
    if (data.points.empty()) {
        throw std::invalid_argument("empirical oracle needs a non-empty dataset");
    }
}

void EmpiricalOracle::eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const {
    check_time(t);
    const auto raw = raw_conditions(c);
    for (int r : raw) {
        if (r > points_.num_classes || points_.end(r) == points_.begin(r)) {
            throw std::invalid_argument("no dataset points carry condition " + std::to_string(r));
        }
    }
    kernels::parallel::empirical_velocity(points_, t, x, raw, out);
}

void MixtureOracle::eval(std::span<const Vec2> x, double t, std::span<const Condition> c, std::span<Vec2> out) const {
    check_time(t);
    const auto raw = raw_conditions(c);
    for (int r : raw) {
        if (r != 0 && !spec_.is_selected(r)) {
            throw std::invalid_argument("condition " + std::to_string(r) + " is not a selected class");
        }
    }
    const auto m = kernels::pack(spec_, t);
    kernels::parallel::mixture_velocity(m, x, raw, out);
}

std::vector<double> midpoint_grid(std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("time grid needs at least one point");
    }
    std::vector<double> g(n);
    for (std::size_t j = 0; j < n; ++j) {
        g[j] = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
    }
    return g;
}

void draw_noised_states(const StateSource& source, double t, std::size_t n, std::uint64_t seed, std::size_t stream,
                        bool unconditional, std::vector<Vec2>& x_t, std::vector<Condition>& c) {
    Rng rng = substream(seed, stream);
    x_t.resize(n);
    c.resize(n);

    // Classes are stratified: state k gets the (k mod |C|)-th class.
    std::vector<int> classes;
    std::vector<std::vector<std::size_t>> by_class;  // dataset source only
    const Dataset* data = nullptr;
    const MixtureSpec* spec = nullptr;
    if (std::holds_alternative<const MixtureSpec*>(source)) {
        spec = std::get<const MixtureSpec*>(source);
        classes = spec->selected_classes();
    } else {
        data = std::get<const Dataset*>(source);
        const int k = max_label(*data);
        by_class.resize(static_cast<std::size_t>(k) + 1);
        for (std::size_t i : canonical_order(*data)) {
            by_class[static_cast<std::size_t>(data->points[i].class_label)].push_back(i);
        }
        for (int cl = 1; cl <= k; ++cl) {
            if (!by_class[static_cast<std::size_t>(cl)].empty()) {
                classes.push_back(cl);
            }
        }
    }
    if (classes.empty()) {
        throw std::invalid_argument("state source has no classes");
    }

    for (std::size_t k = 0; k < n; ++k) {
        const int cl = classes[k % classes.size()];
        Vec2 x0;
        if (spec != nullptr) {
            x0 = sample_point(*spec, rng, cl).x0;
        } else {
            const auto& idx = by_class[static_cast<std::size_t>(cl)];
            std::uniform_int_distribution<std::size_t> pick(0, idx.size() - 1);
            x0 = data->points[idx[pick(rng)]].x0;
        }
        const Vec2 eps = standard_normal2(rng);
        x_t[k] = (1.0 - t) * x0 + t * eps;
        c[k] = unconditional ? Condition::null() : Condition::label(cl);
    }
}

ErrorCurve guidance_error_curve(const GuidanceModels& models, const GuidanceSpec& spec, const VelocityField& oracle,
                                const StateSource& source, const ErrorCurveOptions& opts) {
    if (opts.n_states < 2) {
        throw std::invalid_argument("error curve needs at least two states per time");
    }
    const GuidedField field(models, spec);
    ErrorCurve curve;
    curve.t_grid = opts.t_grid;
    curve.guidance_label = spec.label();
    curve.w = spec.kind == GuidanceKind::sgg ? spec.w_cdg : spec.w;
    curve.n_states = opts.n_states;

    std::vector<Vec2> x;
    std::vector<Condition> c;
    std::vector<Vec2> v(opts.n_states);
    std::vector<Vec2> v_star(opts.n_states);
    for (std::size_t j = 0; j < opts.t_grid.size(); ++j) {
        const double t = opts.t_grid[j];
        draw_noised_states(source, t, opts.n_states, opts.seed, j, opts.unconditional, x, c);
        field.eval(x, t, c, v);
        oracle.eval(x, t, c, v_star);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t k = 0; k < opts.n_states; ++k) {
            const double e = (v[k] - v_star[k]).squaredNorm();
            sum += e;
            sum_sq += e * e;
        }
        const double nn = static_cast<double>(opts.n_states);
        const double mean = sum / nn;
        const double var = std::max(0.0, (sum_sq - nn * mean * mean) / (nn - 1.0));
        curve.values.push_back(mean);
        curve.stderr_.push_back(std::sqrt(var / nn));
    }
    return curve;
}

}  // namespace w2s
