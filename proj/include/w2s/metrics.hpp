// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Sample-quality metrics against a known mixture:
//   outlier_rate   fraction of samples below a log-density floor (own class, t = 0)
//   mode_coverage  fraction of components with a same-class sample within a
//                  Mahalanobis radius
//   class_accuracy fraction of labeled samples whose density-argmax class is
//                  their prompt (ties go to the lower class)
// and the Monte Carlo velocity-field MSE against an oracle.
//
// Null-prompted (unconditional) samples are scored under the marginal density,
// count toward every component's coverage and are excluded from accuracy.

#pragma once

#include "w2s/field.hpp"
#include "w2s/mixture.hpp"
#include "w2s/oracle.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace w2s {

/// 0.1% quantile of the log density of 10^5 fresh ground-truth samples,
/// conditional (own class) or marginal. Cached per (spec digest, mode).
double default_outlier_floor(const MixtureSpec& spec, bool unconditional = false);

/// Quantile floor from an explicit sample (k-th smallest, k = ceil(q n)).
double outlier_floor_from(const MixtureSpec& spec, const Dataset& ground_truth, double quantile, bool unconditional);

double outlier_rate(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c,
                    double log_density_floor);
double mode_coverage(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c,
                     double radius_sigmas = 2.0);
/// Labeled samples only; 0 when there are none.
double class_accuracy(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c);

/// Predicted class (density argmax, lowest label on ties) of each point.
std::vector<int> predicted_classes(const MixtureSpec& spec, std::span<const Vec2> x);

struct ClassBreakdown {
    int class_label = 0;  // 0: null-prompted samples
    std::size_t n_samples = 0;
    std::size_t n_outliers = 0;
    std::size_t n_correct = 0;
    std::size_t n_components = 0;
    std::size_t n_covered = 0;
    double sum_nll = 0.0;

    double outlier_rate() const;
    double coverage() const;
    double accuracy() const;
};

struct EvalOptions {
    double log_density_floor = 0.0;
    bool floor_from_spec = true;  // use default_outlier_floor instead of the field above
    double radius_sigmas = 2.0;
};

struct EvalReport {
    double outlier_rate = 0.0;
    double mode_coverage = 0.0;
    double class_accuracy = 0.0;
    double mean_nll = 0.0;
    std::size_t n_samples = 0;
    std::size_t n_labeled = 0;
    double log_density_floor = 0.0;
    double radius_sigmas = 2.0;
    std::string guidance_label;
    std::vector<ClassBreakdown> per_class;  // selected classes in order, then null (if present)

    static std::string csv_header();
    std::string csv_row() const;
    std::string pretty() const;
};

EvalReport evaluate(const MixtureSpec& spec, std::span<const Vec2> x, std::span<const Condition> c,
                    const EvalOptions& opts = {}, const std::string& guidance_label = {});

/// Per-t mean squared error between `model` and `oracle` over forward-noised
/// ground-truth states (stratified over classes, one substream per t).
std::vector<double> velocity_field_mse(const VelocityField& model, const VelocityField& oracle,
                                       const StateSource& source, const std::vector<double>& t_list, std::size_t n,
                                       std::uint64_t seed, bool unconditional = false);

double median(std::vector<double> v);

}  // namespace w2s
