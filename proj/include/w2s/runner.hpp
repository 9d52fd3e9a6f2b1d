// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Subcommand implementations behind the `w2sflow` binary. Each writes its
// outputs with sibling manifests and a timing file; `repro` chains
// dataset -> train (strong + weak) -> sample (unguided, CFG, AG, SGG) -> eval
// -> error curves for one toy regime.

#pragma once

#include "w2s/config.hpp"
#include "w2s/guidance.hpp"
#include "w2s/manifest.hpp"
#include "w2s/metrics.hpp"
#include "w2s/mixture.hpp"
#include "w2s/oracle.hpp"
#include "w2s/sampler.hpp"
#include "w2s/training.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace w2s {

// Seeds of each stage, derived from run.seed.
inline constexpr std::uint64_t kDatasetStream = 10;
inline constexpr std::uint64_t kSampleStream = 20;
inline constexpr std::uint64_t kCurveStream = 30;

// --- Config -> domain objects (derived values are written back) ---------

Preset config_preset(const Config& cfg);
ToyConfig build_toy_config(Config& cfg);
MixtureSpec build_spec(Config& cfg);
TrainConfig build_train_config(Config& cfg);
SamplerSpec build_sampler(Config& cfg);
/// guidance.* with the kind given by `kind` (empty: guidance.kind).
GuidanceSpec build_guidance(Config& cfg, std::string kind = {});
EvalOptions build_eval_options(const Config& cfg);

// --- Subcommands ---------------------------------------------------------

struct DatasetPaths {
    std::filesystem::path spec;
    std::filesystem::path data;
};
DatasetPaths run_dataset(Config& cfg, const std::filesystem::path& out_dir);

struct TrainPaths {
    std::filesystem::path strong;
    std::optional<std::filesystem::path> weak;
    std::filesystem::path log;
};
/// Trains on the dataset CSV (or on fresh mixture draws when `data` is empty).
TrainPaths run_train(Config& cfg, const std::filesystem::path& spec_path, const std::filesystem::path& data,
                     const std::filesystem::path& out_dir);

void run_sample(Config& cfg, const std::filesystem::path& spec_path, const std::filesystem::path& strong,
                const std::filesystem::path& weak, const std::filesystem::path& out_csv);

/// Evaluates a sample CSV. Throws DigestMismatch when the samples' manifest
/// names a different spec. Writes `<out_prefix>.csv` and `<out_prefix>.txt`.
EvalReport run_eval(Config& cfg, const std::filesystem::path& spec_path, const std::filesystem::path& samples,
                    const std::filesystem::path& out_prefix);

/// Unguided, CFG, AG and SGG error curves against the mixture oracle.
std::vector<ErrorCurve> run_error_curve(Config& cfg, const std::filesystem::path& spec_path,
                                        const std::filesystem::path& strong, const std::filesystem::path& weak,
                                        const std::filesystem::path& out_csv);

/// Guidance-scale grid for guidance.kind; one EvalReport row per scale.
std::vector<EvalReport> run_sweep(Config& cfg, const std::filesystem::path& spec_path,
                                  const std::filesystem::path& strong, const std::filesystem::path& weak,
                                  const std::filesystem::path& out_csv);

struct ReproResult {
    std::vector<EvalReport> reports;  // unguided, cfg, ag, sgg
    std::vector<ErrorCurve> curves;   // unguided, cfg, ag, sgg
    std::filesystem::path manifest;
};

/// Full regime reproduction into `out_dir`. `log` (optional) receives progress lines.
ReproResult run_repro(Config& cfg, const std::filesystem::path& out_dir, std::ostream* log = nullptr);

}  // namespace w2s
