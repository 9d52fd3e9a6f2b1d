// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/metrics.hpp"

#include "w2s/kernels.hpp"
#include "w2s/textio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace w2s {

namespace {

constexpr std::size_t kFloorSamples = 100000;
constexpr double kFloorQuantile = 0.001;
constexpr std::uint64_t kFloorSeed = 0x6f75746c69657273ULL;  // fixed: the floor is a property of the spec

void check_batch(std::span<const Vec2> x, std::span<const Condition> c) {
    if (x.size() != c.size()) {
        throw std::invalid_argument("metrics: points and conditions differ in length");
    }
}

void check_conditions(const MixtureSpec& spec, std::span<const Condition> c) {
    for (const auto& ci : c) {
        if (!ci.is_null() && !spec.is_selected(ci.value())) {
            throw std::invalid_argument("metrics: condition " + std::to_string(ci.raw()) + " is not a selected class");
        }
    }
}

std::vector<double> log_densities(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c) {
    const auto m = kernels::pack(spec, 0.0);
    const auto raw = raw_conditions(c);
    std::vector<double> out(x.size());
    kernels::parallel::mixture_log_density(m, x, raw, out);
    return out;
}

// Slot of a class in the per-class table; the null row comes last.
std::size_t class_slot(const MixtureSpec& spec, int raw) {
    const auto& sel = spec.selected_classes();
    if (raw == 0) {
        return sel.size();
    }
    return static_cast<std::size_t>(std::lower_bound(sel.begin(), sel.end(), raw) - sel.begin());
}

}  // namespace

double outlier_floor_from(const MixtureSpec& spec, const Dataset& gt, double quantile, bool unconditional) {
    if (gt.points.empty() || !(quantile > 0.0 && quantile < 1.0)) {
        throw std::invalid_argument("outlier floor needs a non-empty sample and a quantile in (0, 1)");
    }
    std::vector<Vec2> x;
    std::vector<Condition> c;
    for (const auto& p : gt.points) {
        x.push_back(p.x0);
        c.push_back(unconditional ? Condition::null() : Condition::label(p.class_label));
    }
    auto ld = log_densities(spec, x, c);
    const auto k = static_cast<std::size_t>(std::ceil(quantile * static_cast<double>(ld.size()))) - 1;
    std::nth_element(ld.begin(), ld.begin() + static_cast<std::ptrdiff_t>(k), ld.end());
    return ld[k];
}

double default_outlier_floor(const MixtureSpec& spec, bool unconditional) {
    static std::mutex mu;
    static std::map<std::pair<std::string, bool>, double> cache;
    const auto key = std::make_pair(spec.digest(), unconditional);
    {
        const std::lock_guard<std::mutex> lock(mu);
        if (const auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
    }
    const double floor =
        outlier_floor_from(spec, sample_dataset(spec, kFloorSamples, kFloorSeed), kFloorQuantile, unconditional);
    const std::lock_guard<std::mutex> lock(mu);
    cache.emplace(key, floor);
    return floor;
}

double outlier_rate(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c, double floor) {
    check_batch(x, c);
    check_conditions(spec, c);
    if (!std::isfinite(floor)) {
        throw std::invalid_argument("outlier_rate: log-density floor must be finite");
    }
    if (x.empty()) {
        return 0.0;
    }
    const auto ld = log_densities(spec, x, c);
    const auto n = std::count_if(ld.begin(), ld.end(), [&](double v) { return v < floor; });
    return static_cast<double>(n) / static_cast<double>(x.size());
}

namespace {

std::vector<std::uint8_t> coverage_hits(const MixtureSpec& spec, const kernels::PackedMixture& m,
                                        std::span<const Vec2> x, std::span<const Condition> c, double radius) {
    if (!(radius > 0.0)) {
        throw std::invalid_argument("mode_coverage: radius must be > 0");
    }
    const auto raw = raw_conditions(c);
    const auto pts = kernels::pack_points(x, raw, spec.num_classes());
    std::vector<std::uint8_t> hit(m.size(), 0);
    kernels::parallel::coverage_hits(m, pts, radius, hit);
    return hit;
}

}  // namespace

double mode_coverage(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c,
                     double radius_sigmas) {
    check_batch(x, c);
    check_conditions(spec, c);
    const auto m = kernels::pack(spec, 0.0);
    const auto hit = coverage_hits(spec, m, x, c, radius_sigmas);
    if (hit.empty()) {
        return 0.0;
    }
    const auto n = std::count(hit.begin(), hit.end(), std::uint8_t{1});
    return static_cast<double>(n) / static_cast<double>(hit.size());
}

std::vector<int> predicted_classes(const MixtureSpec& spec, std::span<const Vec2> x) {
    const auto m = kernels::pack(spec, 0.0);
    std::vector<int> best(x.size(), 0);
    std::vector<double> best_ld(x.size(), -INFINITY);
    std::vector<int> cond(x.size());
    std::vector<double> ld(x.size());
    for (int cls : spec.selected_classes()) {  // ascending, so strict '>' keeps the lower class on ties
        std::fill(cond.begin(), cond.end(), cls);
        kernels::parallel::mixture_log_density(m, x, cond, ld);
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (best[i] == 0 || ld[i] > best_ld[i]) {
                best[i] = cls;
                best_ld[i] = ld[i];
            }
        }
    }
    return best;
}

double class_accuracy(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c) {
    check_batch(x, c);
    check_conditions(spec, c);
    const auto pred = predicted_classes(spec, x);
    std::size_t labeled = 0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!c[i].is_null()) {
            ++labeled;
            correct += pred[i] == c[i].value() ? 1 : 0;
        }
    }
    return labeled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(labeled);
}

double ClassBreakdown::outlier_rate() const {
    return n_samples == 0 ? 0.0 : static_cast<double>(n_outliers) / static_cast<double>(n_samples);
}
double ClassBreakdown::coverage() const {
    return n_components == 0 ? 0.0 : static_cast<double>(n_covered) / static_cast<double>(n_components);
}
double ClassBreakdown::accuracy() const {
    return n_samples == 0 || class_label == 0 ? 0.0 : static_cast<double>(n_correct) / static_cast<double>(n_samples);
}

EvalReport evaluate(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c,
                    const EvalOptions& opts, const std::string& guidance_label) {
    check_batch(x, c);
    check_conditions(spec, c);
    const bool all_null = !c.empty() && std::all_of(c.begin(), c.end(), [](Condition ci) { return ci.is_null(); });

    EvalReport r;
    r.guidance_label = guidance_label;
    r.radius_sigmas = opts.radius_sigmas;
    r.log_density_floor = opts.floor_from_spec ? default_outlier_floor(spec, all_null) : opts.log_density_floor;
    if (!std::isfinite(r.log_density_floor)) {
        throw std::invalid_argument("evaluate: log-density floor must be finite");
    }
    r.n_samples = x.size();

    const auto& sel = spec.selected_classes();
    r.per_class.resize(sel.size() + 1);
    for (std::size_t k = 0; k < sel.size(); ++k) {
        r.per_class[k].class_label = sel[k];
        r.per_class[k].n_components = spec.class_components(sel[k]).size();
    }

    const auto ld = log_densities(spec, x, c);
    const auto pred = predicted_classes(spec, x);
    std::vector<std::vector<double>> class_ld(r.per_class.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto slot = class_slot(spec, c[i].raw());
        auto& row = r.per_class[slot];
        ++row.n_samples;
        row.n_outliers += ld[i] < r.log_density_floor ? 1 : 0;
        class_ld[slot].push_back(ld[i]);
        if (!c[i].is_null()) {
            row.n_correct += pred[i] == c[i].value() ? 1 : 0;
        }
    }
    // Sorted summation keeps the NLL independent of batch order.
    for (std::size_t k = 0; k < class_ld.size(); ++k) {
        std::sort(class_ld[k].begin(), class_ld[k].end());
        for (double v : class_ld[k]) {
            r.per_class[k].sum_nll -= v;
        }
    }

    const auto m = kernels::pack(spec, 0.0);
    const auto hit = coverage_hits(spec, m, x, c, opts.radius_sigmas);
    for (std::size_t i = 0; i < m.size(); ++i) {
        r.per_class[class_slot(spec, m.label[i])].n_covered += hit[i];
    }
    if (r.per_class.back().n_samples == 0) {
        r.per_class.pop_back();
    }

    std::size_t outliers = 0;
    std::size_t correct = 0;
    std::size_t covered = 0;
    double nll = 0.0;
    for (const auto& row : r.per_class) {
        outliers += row.n_outliers;
        correct += row.n_correct;
        covered += row.n_covered;
        nll += row.sum_nll;
        if (row.class_label != 0) {
            r.n_labeled += row.n_samples;
        }
    }
    const double n = static_cast<double>(std::max<std::size_t>(r.n_samples, 1));
    r.outlier_rate = static_cast<double>(outliers) / n;
    r.mean_nll = nll / n;
    r.class_accuracy = r.n_labeled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.n_labeled);
    r.mode_coverage = m.size() == 0 ? 0.0 : static_cast<double>(covered) / static_cast<double>(m.size());
    return r;
}

std::string EvalReport::csv_header() {
    return "guidance,n_samples,n_labeled,outlier_rate,mode_coverage,class_accuracy,mean_nll,log_density_floor,"
           "radius_sigmas";
}

std::string EvalReport::csv_row() const {
    std::ostringstream os;
    os << guidance_label << ',' << n_samples << ',' << n_labeled << ',' << text::fmt(outlier_rate) << ','
       << text::fmt(mode_coverage) << ',' << text::fmt(class_accuracy) << ',' << text::fmt(mean_nll) << ','
       << text::fmt(log_density_floor) << ',' << text::fmt(radius_sigmas);
    return std::move(os).str();
}

std::string EvalReport::pretty() const {
    std::ostringstream os;
    os << "guidance        " << (guidance_label.empty() ? "-" : guidance_label) << "\n"
       << "samples         " << n_samples << " (" << n_labeled << " labeled)\n"
       << "outlier_rate    " << text::fmt(outlier_rate) << "  (log density < " << text::fmt(log_density_floor) << ")\n"
       << "mode_coverage   " << text::fmt(mode_coverage) << "  (radius " << text::fmt(radius_sigmas) << " sigma)\n"
       << "class_accuracy  " << text::fmt(class_accuracy) << "\n"
       << "mean_nll        " << text::fmt(mean_nll) << "\n"
       << "class  samples  outlier_rate  coverage  accuracy\n";
    for (const auto& row : per_class) {
        os << (row.class_label == 0 ? std::string("null") : std::to_string(row.class_label)) << "  " << row.n_samples
           << "  " << text::fmt(row.outlier_rate()) << "  " << text::fmt(row.coverage()) << "  "
           << text::fmt(row.accuracy()) << "\n";
    }
    return std::move(os).str();
}

std::vector<double> velocity_field_mse(const VelocityField& model, const VelocityField& oracle,
                                       const StateSource& source, const std::vector<double>& t_list, std::size_t n,
                                       std::uint64_t seed, bool unconditional) {
    if (n < 1) {
        throw std::invalid_argument("velocity_field_mse needs n >= 1");
    }
    std::vector<double> out;
    std::vector<Vec2> x;
    std::vector<Condition> c;
    std::vector<Vec2> v(n);
    std::vector<Vec2> v_star(n);
    for (std::size_t j = 0; j < t_list.size(); ++j) {
        const double t = t_list[j];
        draw_noised_states(source, t, n, seed, j, unconditional, x, c);
        model.eval(x, t, c, v);
        oracle.eval(x, t, c, v_star);
        double sum = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            sum += (v[k] - v_star[k]).squaredNorm();
        }
        out.push_back(sum / static_cast<double>(n));
    }
    return out;
}

double median(std::vector<double> v) {
    if (v.empty()) {
        throw std::invalid_argument("median of an empty list");
    }
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace w2s
