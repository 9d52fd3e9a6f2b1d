// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels on Config C at realistic batch sizes.
// Run with OMP_NUM_THREADS=k to see the scaling; outputs are bit-identical.

#include "w2s/kernels.hpp"
#include "w2s/mixture.hpp"

#include <benchmark/benchmark.h>

namespace {

using namespace w2s;

struct Inputs {
    MixtureSpec spec;
    kernels::PackedMixture at_half;
    kernels::PackedMixture at_zero;
    kernels::PackedPoints data;
    std::vector<Vec2> x;
    std::vector<int> cond;
};

const Inputs& inputs() {
    static const Inputs in = [] {
        Inputs r{build_recursive_mixture(preset_config(Preset::C)), {}, {}, {}, {}, {}};
        r.at_half = kernels::pack(r.spec, 0.5);
        r.at_zero = kernels::pack(r.spec, 0.0);
        const auto d = sample_dataset(r.spec, 20000, 1);
        std::vector<Vec2> pts;
        std::vector<int> labels;
        for (const auto& p : d.points) {
            pts.push_back(p.x0);
            labels.push_back(p.class_label);
        }
        r.data = kernels::pack_points(pts, labels, r.spec.num_classes());
        Rng rng(2);
        const auto& cls = r.spec.selected_classes();
        for (std::size_t i = 0; i < 8192; ++i) {
            r.x.push_back(standard_normal2(rng));
            r.cond.push_back(i % 5 == 0 ? 0 : cls[i % cls.size()]);
        }
        return r;
    }();
    return in;
}

template <bool Parallel>
void BM_mixture_velocity(benchmark::State& state) {
    const auto& in = inputs();
    std::vector<Vec2> out(in.x.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::mixture_velocity(in.at_half, in.x, in.cond, out);
        } else {
            kernels::serial::mixture_velocity(in.at_half, in.x, in.cond, out);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.x.size()));
}

template <bool Parallel>
void BM_mixture_log_density(benchmark::State& state) {
    const auto& in = inputs();
    std::vector<double> out(in.x.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::mixture_log_density(in.at_zero, in.x, in.cond, out);
        } else {
            kernels::serial::mixture_log_density(in.at_zero, in.x, in.cond, out);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(in.x.size()));
}

template <bool Parallel>
void BM_empirical_velocity(benchmark::State& state) {
    const auto& in = inputs();
    const std::span<const Vec2> x(in.x.data(), 1024);
    const std::span<const int> c(in.cond.data(), 1024);
    std::vector<Vec2> out(x.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::empirical_velocity(in.data, 0.3, x, c, out);
        } else {
            kernels::serial::empirical_velocity(in.data, 0.3, x, c, out);
        }
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}

template <bool Parallel>
void BM_coverage_hits(benchmark::State& state) {
    const auto& in = inputs();
    std::vector<std::uint8_t> hit(in.at_zero.size());
    for (auto _ : state) {
        if constexpr (Parallel) {
            kernels::parallel::coverage_hits(in.at_zero, in.data, 2.0, hit);
        } else {
            kernels::serial::coverage_hits(in.at_zero, in.data, 2.0, hit);
        }
        benchmark::DoNotOptimize(hit.data());
    }
}

BENCHMARK(BM_mixture_velocity<false>)->Name("mixture_velocity/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mixture_velocity<true>)->Name("mixture_velocity/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mixture_log_density<false>)->Name("mixture_log_density/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mixture_log_density<true>)->Name("mixture_log_density/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_empirical_velocity<false>)->Name("empirical_velocity/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_empirical_velocity<true>)->Name("empirical_velocity/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_coverage_hits<false>)->Name("coverage_hits/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_coverage_hits<true>)->Name("coverage_hits/parallel")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
