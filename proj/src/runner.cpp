// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/runner.hpp"

#include "w2s/checkpoint.hpp"
#include "w2s/digest.hpp"
#include "w2s/io.hpp"
#include "w2s/net.hpp"
#include "w2s/textio.hpp"

#include <json.hpp>

#include <chrono>
#include <ostream>

namespace w2s {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

class Timing {
public:
    void add(std::string stage, double s) { stages_[std::move(stage)] = s; }
    void write(const fs::path& output) const {
        nlohmann::json j;
        j["wall_seconds"] = stages_;
        text::write_file_atomic(timing_path(output), j.dump(2) + "\n");
    }

private:
    std::map<std::string, double> stages_;
};

std::uint64_t run_seed(const Config& cfg) { return static_cast<std::uint64_t>(cfg.get_int("run.seed")); }

RunManifest base_manifest(const Config& cfg, std::string subcommand) {
    RunManifest m;
    m.subcommand = std::move(subcommand);
    m.seed = run_seed(cfg);
    m.config = cfg.values();
    return m;
}

MixtureSpec load_spec(const fs::path& p) {
    if (!fs::exists(p)) {
        throw std::runtime_error("spec file not found: " + p.string());
    }
    return MixtureSpec::parse(text::read_file(p));
}

std::shared_ptr<const NetParams> load_net(const fs::path& p) {
    if (!fs::exists(p)) {
        throw std::runtime_error("checkpoint not found: " + p.string());
    }
    return std::make_shared<const NetParams>(load_checkpoint(p));
}

/// Fails when `file`'s manifest records a spec other than `spec`.
void require_same_spec(const fs::path& file, const MixtureSpec& spec) {
    RunManifest m;
    if (!read_manifest(file, m)) {
        return;
    }
    const auto it = m.facts.find("spec_sha256");
    if (it != m.facts.end() && it->second != spec.digest()) {
        throw DigestMismatch("spec digest mismatch: " + file.string() + " was produced from spec " + it->second +
                             ", but the given spec has digest " + spec.digest());
    }
}

bool model_is_unconditional(const Config& cfg, const fs::path& strong) {
    RunManifest m;
    if (read_manifest(strong, m)) {
        const auto it = m.config.find("train.unconditional");
        if (it != m.config.end() && text::to_bool(it->second)) {
            return true;
        }
    }
    return cfg.get_bool("train.unconditional");
}

std::vector<Condition> prompts_for(const MixtureSpec& spec, std::size_t n, bool unconditional) {
    return unconditional ? null_prompts(n) : uniform_class_prompts(spec.selected_classes(), n);
}

void add_budget_facts(RunManifest& m, const Config& cfg) {
    const auto iters = cfg.get_int("train.iters");
    const auto ratio = cfg.get_int("train.weak_update_ratio");
    m.facts["T_main"] = std::to_string(iters);
    m.facts["T_weak"] = std::to_string(ratio > 0 ? iters / ratio : 0);
    m.facts["tau"] = cfg.get("guidance.tau");
    m.facts["w_cfg"] = cfg.get("guidance.w_cdg");
    m.facts["w_ag"] = cfg.get("guidance.w_cag");
}

struct Models {
    std::shared_ptr<const NetParams> strong_p, weak_p;
    std::unique_ptr<NetField> strong, weak;

    GuidanceModels view() const { return {strong.get(), weak.get()}; }
};

Models load_models(const fs::path& strong, const fs::path& weak) {
    Models m;
    m.strong_p = load_net(strong);
    m.strong = std::make_unique<NetField>(m.strong_p);
    if (!weak.empty()) {
        m.weak_p = load_net(weak);
        m.weak = std::make_unique<NetField>(m.weak_p);
    }
    return m;
}

void require_weak(const GuidanceSpec& g, const Models& m) {
    if (g.needs_weak_model() && !m.weak) {
        throw std::invalid_argument("guidance '" + g.label() + "' needs a weak model (--weak)");
    }
}

std::string eval_csv(const std::vector<EvalReport>& reports) {
    std::string out = EvalReport::csv_header() + "\n";
    for (const auto& r : reports) {
        out += r.csv_row() + "\n";
    }
    return out;
}

std::string_view panel_title(GuidanceKind k) {
    switch (k) {
        case GuidanceKind::none: return "Unguided";
        case GuidanceKind::cdg_cfg: return "CFG";
        case GuidanceKind::cag_ag: return "AG";
        case GuidanceKind::cag_skip: return "Skip";
        case GuidanceKind::sgg: return "SGG";
    }
    return "?";
}

}  // namespace

// --- Config -> domain objects --------------------------------------------

Preset config_preset(const Config& cfg) { return parse_preset(cfg.get("mixture.preset")); }

ToyConfig build_toy_config(Config& cfg) {
    ToyConfig t = preset_config(config_preset(cfg));
    cfg.derive("mixture.num_classes", std::to_string(t.num_classes));
    cfg.derive("mixture.max_depth", std::to_string(t.max_depth));
    cfg.derive("mixture.branch_factor", std::to_string(t.branch_factor));
    t.num_classes = static_cast<int>(cfg.get_int("mixture.num_classes"));
    t.max_depth = static_cast<int>(cfg.get_int("mixture.max_depth"));
    t.branch_factor = static_cast<int>(cfg.get_int("mixture.branch_factor"));
    t.seed = static_cast<std::uint64_t>(cfg.get_int("mixture.geometry_seed"));
    t.main_angle_deg = cfg.get_double("mixture.main_angle_deg");
    t.depth_decay = cfg.get_double("mixture.depth_decay");
    t.points_per_branch = static_cast<int>(cfg.get_int("mixture.points_per_branch"));
    t.root_length = cfg.get_double("mixture.root_length");
    t.class_angle_deg = cfg.get_double("mixture.class_angle_deg");
    t.child_angle_deg = cfg.get_double("mixture.child_angle_deg");
    t.child_length_ratio = cfg.get_double("mixture.child_length_ratio");
    t.thickness_across = cfg.get_double("mixture.thickness_across");
    t.thickness_along = cfg.get_double("mixture.thickness_along");
    t.angle_jitter_deg = cfg.get_double("mixture.angle_jitter_deg");
    t.validate();
    return t;
}

MixtureSpec build_spec(Config& cfg) { return build_recursive_mixture(build_toy_config(cfg)); }

TrainConfig build_train_config(Config& cfg) {
    const auto budget = toy_budget(config_preset(cfg));
    TrainConfig tc = TrainConfig::defaults(parse_variant(cfg.get("train.variant")));
    cfg.derive("train.w", text::fmt(tc.w));
    cfg.derive("train.t_lo", text::fmt(tc.t_lo));
    cfg.derive("train.t_hi", text::fmt(tc.t_hi));
    cfg.derive("train.iters", std::to_string(budget.iters_main));
    cfg.derive("train.weak_update_ratio", std::to_string(budget.weak_update_ratio()));
    tc.w = cfg.get_double("train.w");
    tc.tau = cfg.get_double("train.tau");
    tc.t_lo = cfg.get_double("train.t_lo");
    tc.t_hi = cfg.get_double("train.t_hi");
    tc.cond_dropout = cfg.get_double("train.cond_dropout");
    tc.iters = cfg.get_int("train.iters");
    tc.batch = static_cast<int>(cfg.get_int("train.batch"));
    tc.lr = cfg.get_double("train.lr");
    tc.lognormal_loc = cfg.get_double("train.lognormal_loc");
    tc.lognormal_scale = cfg.get_double("train.lognormal_scale");
    tc.co_train_weak = cfg.get_bool("train.co_train_weak");
    tc.weak_update_ratio = static_cast<int>(cfg.get_int("train.weak_update_ratio"));
    tc.warmup_iters = cfg.get_int("train.warmup_iters");
    tc.slg_skip_blocks = cfg.get_ints("train.slg_skip_blocks");
    tc.unconditional = cfg.get_bool("train.unconditional");
    tc.log_every = static_cast<int>(cfg.get_int("train.log_every"));
    tc.seed = run_seed(cfg);
    tc.arch.d_h = static_cast<int>(cfg.get_int("net.d_h"));
    tc.arch.d_c = static_cast<int>(cfg.get_int("net.d_c"));
    tc.arch.n_blocks = static_cast<int>(cfg.get_int("net.n_blocks"));
    tc.arch.n_freqs = static_cast<int>(cfg.get_int("net.n_freqs"));
    tc.arch.branch_index = static_cast<int>(cfg.get_int("net.branch_index"));
    tc.weak_arch = tc.arch;
    tc.weak_arch.branch = false;
    tc.weak_arch.d_h = static_cast<int>(cfg.get_int("weak.d_h"));
    tc.weak_arch.n_blocks = static_cast<int>(cfg.get_int("weak.n_blocks"));
    tc.validate();
    return tc;
}

SamplerSpec build_sampler(Config& cfg) {
    SamplerSpec s;
    s.kind = parse_sampler_kind(cfg.get("sample.kind"));
    s.steps = static_cast<int>(cfg.get_int("sample.steps"));
    s.t_end = cfg.get_double("sample.t_end");
    s.churn = cfg.get_double("sample.churn");
    s.seed = mix_seed(run_seed(cfg), kSampleStream);
    s.validate();
    return s;
}

GuidanceSpec build_guidance(Config& cfg, std::string kind) {
    const auto budget = toy_budget(config_preset(cfg));
    cfg.derive("guidance.w_cdg", text::fmt(budget.w_cfg));
    cfg.derive("guidance.w_cag", text::fmt(budget.w_ag));
    cfg.derive("guidance.tau", text::fmt(budget.tau));
    if (kind.empty()) {
        kind = cfg.get("guidance.kind");
    }
    const double w = cfg.get_double("guidance.w");
    GuidanceSpec g;
    switch (parse_guidance_kind(kind)) {
        case GuidanceKind::none: g = GuidanceSpec::unguided(); break;
        case GuidanceKind::cdg_cfg: g = GuidanceSpec::cfg(w); break;
        case GuidanceKind::cag_ag: g = GuidanceSpec::ag(w); break;
        case GuidanceKind::cag_skip: g = GuidanceSpec::skip(w, cfg.get_ints("guidance.skip_blocks")); break;
        case GuidanceKind::sgg:
            g = GuidanceSpec::segmented(cfg.get_double("guidance.w_cdg"), cfg.get_double("guidance.w_cag"),
                                        cfg.get_double("guidance.tau"));
            g.sgg_cag = parse_cag_source(cfg.get("guidance.sgg_cag"));
            g.skip_blocks = cfg.get_ints("guidance.skip_blocks");
            break;
    }
    g.t_lo = cfg.get_double("guidance.t_lo");
    g.t_hi = cfg.get_double("guidance.t_hi");
    g.validate();
    return g;
}

EvalOptions build_eval_options(const Config& cfg) {
    EvalOptions o;
    o.radius_sigmas = cfg.get_double("eval.radius_sigmas");
    if (cfg.has_value("eval.floor")) {
        o.floor_from_spec = false;
        o.log_density_floor = cfg.get_double("eval.floor");
    }
    return o;
}

namespace {

/// Expands every preset- and variant-derived key so manifests list concrete values.
void resolve_derived(Config& cfg) {
    build_toy_config(cfg);
    build_train_config(cfg);
    build_guidance(cfg);
}

}  // namespace

// --- Subcommands -----------------------------------------------------------

DatasetPaths run_dataset(Config& cfg, const fs::path& out_dir) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    fs::create_directories(out_dir);
    const auto spec = build_spec(cfg);
    const auto n = cfg.get_int("dataset.n");
    if (n < 1) {
        throw std::invalid_argument("dataset.n must be >= 1");
    }
    const auto data = sample_dataset(spec, static_cast<std::size_t>(n), mix_seed(run_seed(cfg), kDatasetStream));
    DatasetPaths p{out_dir / "spec.txt", out_dir / "dataset.csv"};
    auto m = base_manifest(cfg, "dataset");
    m.facts["spec_sha256"] = spec.digest();
    m.facts["preset"] = cfg.get("mixture.preset");
    write_with_manifest(p.spec, spec.serialize(), m);
    m.inputs.push_back(digest_entry("spec", p.spec, out_dir));
    write_with_manifest(p.data, io::dataset_csv(data), m);
    Timing timing;
    timing.add("dataset", seconds_since(t0));
    timing.write(p.data);
    return p;
}

TrainPaths run_train(Config& cfg, const fs::path& spec_path, const fs::path& data, const fs::path& out_dir) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    fs::create_directories(out_dir);
    const auto spec = load_spec(spec_path);
    const auto tc = build_train_config(cfg);

    auto m = base_manifest(cfg, "train");
    m.facts["spec_sha256"] = spec.digest();
    add_budget_facts(m, cfg);
    m.inputs.push_back(digest_entry("spec", spec_path, out_dir));

    Dataset dataset;
    TrainSource source = &spec;
    if (!data.empty()) {
        if (!fs::exists(data)) {
            throw std::runtime_error("dataset not found: " + data.string());
        }
        require_same_spec(data, spec);
        dataset = io::parse_dataset_csv(text::read_file(data), spec.digest());
        source = &dataset;
        m.inputs.push_back(digest_entry("dataset", data, out_dir));
    }

    const auto every = cfg.get_int("train.checkpoint_every");
    CheckpointHook hook;
    if (every > 0) {
        hook = [&](const TrainState& s) {
            const auto p = out_dir / ("strong_iter" + std::to_string(s.iter) + ".ckpt");
            save_checkpoint(p, s.strong);
            write_manifest_for(p, m);
        };
    }
    const auto result = train_loop(tc, source, spec.num_classes(), hook, every);

    TrainPaths p{out_dir / "strong.ckpt", std::nullopt, out_dir / "train_log.csv"};
    m.facts["strong_iters"] = std::to_string(result.log.strong_iters);
    m.facts["weak_iters"] = std::to_string(result.log.weak_iters);
    save_checkpoint(p.strong, result.state.strong);
    write_manifest_for(p.strong, m);
    if (result.state.weak) {
        p.weak = out_dir / "weak.ckpt";
        save_checkpoint(*p.weak, *result.state.weak);
        write_manifest_for(*p.weak, m);
    }
    write_with_manifest(p.log, result.log.to_csv(), m);
    Timing timing;
    timing.add("train", seconds_since(t0));
    timing.write(p.strong);
    return p;
}

void run_sample(Config& cfg, const fs::path& spec_path, const fs::path& strong, const fs::path& weak,
                const fs::path& out_csv) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    const auto spec = load_spec(spec_path);
    require_same_spec(strong, spec);
    const auto g = build_guidance(cfg);
    const auto ss = build_sampler(cfg);
    const auto models = load_models(strong, weak);
    require_weak(g, models);
    const bool uncond = model_is_unconditional(cfg, strong);
    const auto n = static_cast<std::size_t>(cfg.get_int("sample.n"));

    GuidedField field(models.view(), g);
    const auto batch = sample(field, ss, prompts_for(spec, n, uncond));

    const auto dir = out_csv.has_parent_path() ? out_csv.parent_path() : fs::path(".");
    fs::create_directories(dir);
    auto m = base_manifest(cfg, "sample");
    m.facts["spec_sha256"] = spec.digest();
    m.facts["guidance"] = g.label();
    m.inputs.push_back(digest_entry("spec", spec_path, dir));
    m.inputs.push_back(digest_entry("strong", strong, dir));
    if (!weak.empty()) {
        m.inputs.push_back(digest_entry("weak", weak, dir));
    }
    write_with_manifest(out_csv, io::points_csv(batch.finals, batch.classes), m);
    Timing timing;
    timing.add("sample", seconds_since(t0));
    timing.write(out_csv);
}

EvalReport run_eval(Config& cfg, const fs::path& spec_path, const fs::path& samples, const fs::path& out_prefix) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    const auto spec = load_spec(spec_path);
    if (!fs::exists(samples)) {
        throw std::runtime_error("samples not found: " + samples.string());
    }
    require_same_spec(samples, spec);
    std::vector<Vec2> x;
    std::vector<Condition> c;
    io::parse_points_csv(text::read_file(samples), x, c);
    std::string label;
    RunManifest sm;
    if (read_manifest(samples, sm) && sm.facts.count("guidance")) {
        label = sm.facts.at("guidance");
    }
    const auto report = evaluate(spec, x, c, build_eval_options(cfg), label);
    cfg.derive("eval.floor", text::fmt(report.log_density_floor));

    const fs::path csv = out_prefix.string() + ".csv";
    const fs::path txt = out_prefix.string() + ".txt";
    const auto dir = csv.has_parent_path() ? csv.parent_path() : fs::path(".");
    fs::create_directories(dir);
    auto m = base_manifest(cfg, "eval");
    m.facts["spec_sha256"] = spec.digest();
    m.inputs.push_back(digest_entry("spec", spec_path, dir));
    m.inputs.push_back(digest_entry("samples", samples, dir));
    write_with_manifest(csv, eval_csv({report}), m);
    write_with_manifest(txt, report.pretty(), m);
    Timing timing;
    timing.add("eval", seconds_since(t0));
    timing.write(csv);
    return report;
}

namespace {

std::vector<ErrorCurve> compute_curves(Config& cfg, const MixtureSpec& spec, const Models& models, bool uncond) {
    const MixtureOracle oracle(spec);
    ErrorCurveOptions opts;
    opts.t_grid = midpoint_grid(static_cast<std::size_t>(cfg.get_int("curve.n_t")));
    opts.n_states = static_cast<std::size_t>(cfg.get_int("curve.n_states"));
    opts.seed = mix_seed(run_seed(cfg), kCurveStream);
    opts.unconditional = uncond;
    std::vector<GuidanceSpec> specs = {GuidanceSpec::unguided()};
    if (!uncond) {
        specs.push_back(build_guidance(cfg, "cfg"));
        specs.back().w = cfg.get_double("guidance.w_cdg");
    }
    if (models.weak) {
        specs.push_back(build_guidance(cfg, "ag"));
        specs.back().w = cfg.get_double("guidance.w_cag");
        if (!uncond) {
            specs.push_back(build_guidance(cfg, "sgg"));
        }
    }
    std::vector<ErrorCurve> curves;
    for (const auto& g : specs) {
        curves.push_back(guidance_error_curve(models.view(), g, oracle, &spec, opts));
    }
    return curves;
}

}  // namespace

std::vector<ErrorCurve> run_error_curve(Config& cfg, const fs::path& spec_path, const fs::path& strong,
                                        const fs::path& weak, const fs::path& out_csv) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    const auto spec = load_spec(spec_path);
    require_same_spec(strong, spec);
    const auto models = load_models(strong, weak);
    const auto curves = compute_curves(cfg, spec, models, model_is_unconditional(cfg, strong));

    const auto dir = out_csv.has_parent_path() ? out_csv.parent_path() : fs::path(".");
    fs::create_directories(dir);
    auto m = base_manifest(cfg, "error-curve");
    m.facts["spec_sha256"] = spec.digest();
    m.inputs.push_back(digest_entry("spec", spec_path, dir));
    m.inputs.push_back(digest_entry("strong", strong, dir));
    if (!weak.empty()) {
        m.inputs.push_back(digest_entry("weak", weak, dir));
    }
    write_with_manifest(out_csv, io::error_curves_csv(curves), m);
    const fs::path svg = out_csv.string() + ".svg";
    write_with_manifest(svg, io::curves_figure(curves, "Distance to the optimal velocity"), m);
    Timing timing;
    timing.add("error_curve", seconds_since(t0));
    timing.write(out_csv);
    return curves;
}

std::vector<EvalReport> run_sweep(Config& cfg, const fs::path& spec_path, const fs::path& strong, const fs::path& weak,
                                  const fs::path& out_csv) {
    resolve_derived(cfg);
    const auto t0 = Clock::now();
    const auto spec = load_spec(spec_path);
    require_same_spec(strong, spec);
    const auto models = load_models(strong, weak);
    const auto ss = build_sampler(cfg);
    const bool uncond = model_is_unconditional(cfg, strong);
    const auto prompts = prompts_for(spec, static_cast<std::size_t>(cfg.get_int("sample.n")), uncond);
    auto kind = cfg.get("guidance.kind");
    if (kind == "none") {
        kind = "cfg";
    }
    const auto opts = build_eval_options(cfg);
    std::vector<EvalReport> reports;
    io::CsvTable table;
    for (double w : cfg.get_doubles("sweep.w")) {
        auto g = build_guidance(cfg, kind);
        g.w = w;
        g.w_cdg = w;
        g.w_cag = w;
        g.validate();
        require_weak(g, models);
        GuidedField field(models.view(), g);
        const auto batch = sample(field, ss, prompts);
        reports.push_back(evaluate(spec, batch.finals, batch.classes, opts, g.label()));
    }
    std::string csv = "w," + EvalReport::csv_header() + "\n";
    const auto ws = cfg.get_doubles("sweep.w");
    for (std::size_t k = 0; k < reports.size(); ++k) {
        csv += text::fmt(ws[k]) + "," + reports[k].csv_row() + "\n";
    }
    const auto dir = out_csv.has_parent_path() ? out_csv.parent_path() : fs::path(".");
    fs::create_directories(dir);
    auto m = base_manifest(cfg, "sweep");
    m.facts["spec_sha256"] = spec.digest();
    m.inputs.push_back(digest_entry("spec", spec_path, dir));
    m.inputs.push_back(digest_entry("strong", strong, dir));
    if (!weak.empty()) {
        m.inputs.push_back(digest_entry("weak", weak, dir));
    }
    write_with_manifest(out_csv, csv, m);
    Timing timing;
    timing.add("sweep", seconds_since(t0));
    timing.write(out_csv);
    return reports;
}

ReproResult run_repro(Config& cfg, const fs::path& out_dir, std::ostream* log) {
    auto say = [&](const std::string& s) {
        if (log) {
            *log << s << std::endl;
        }
    };
    Timing timing;
    fs::create_directories(out_dir);
    const auto preset = cfg.get("mixture.preset");

    // Resolve everything up front so every manifest records the same config.
    const auto spec = build_spec(cfg);
    build_train_config(cfg);
    build_guidance(cfg);
    build_sampler(cfg);
    const bool uncond = cfg.get_bool("train.unconditional");
    cfg.derive("eval.floor", text::fmt(default_outlier_floor(spec, uncond)));
    if (!cfg.get_bool("train.co_train_weak") && cfg.get("train.variant") != "ag") {
        throw std::invalid_argument("repro needs the weak net (train.co_train_weak = true)");
    }

    auto t0 = Clock::now();
    say("[" + preset + "] dataset");
    const auto dp = run_dataset(cfg, out_dir);
    timing.add("dataset", seconds_since(t0));

    t0 = Clock::now();
    say("[" + preset + "] train " + cfg.get("train.iters") + " iterations");
    const auto tp = run_train(cfg, dp.spec, dp.data, out_dir);
    timing.add("train", seconds_since(t0));

    t0 = Clock::now();
    const auto models = load_models(tp.strong, tp.weak ? *tp.weak : fs::path{});
    std::vector<std::string> kinds = {"none", "cfg", "ag", "sgg"};
    if (uncond) {
        kinds = {"none", "ag"};
    }
    const auto ss = build_sampler(cfg);
    const auto prompts = prompts_for(spec, static_cast<std::size_t>(cfg.get_int("sample.n")), uncond);
    ReproResult res;
    std::vector<io::ScatterPanel> panels;
    std::vector<Vec2> all_points;
    const auto opts = build_eval_options(cfg);
    auto m = base_manifest(cfg, "repro");
    m.facts["spec_sha256"] = spec.digest();
    m.facts["preset"] = preset;
    add_budget_facts(m, cfg);
    auto stage_manifest = m;
    stage_manifest.inputs.push_back(digest_entry("spec", dp.spec, out_dir));
    stage_manifest.inputs.push_back(digest_entry("strong", tp.strong, out_dir));
    if (tp.weak) {
        stage_manifest.inputs.push_back(digest_entry("weak", *tp.weak, out_dir));
    }
    std::vector<fs::path> outputs = {dp.spec, dp.data, tp.strong, tp.log};
    if (tp.weak) {
        outputs.push_back(*tp.weak);
    }
    for (const auto& kind : kinds) {
        auto g = build_guidance(cfg, kind);
        if (g.kind == GuidanceKind::cdg_cfg) {
            g.w = cfg.get_double("guidance.w_cdg");
        } else if (g.kind == GuidanceKind::cag_ag) {
            g.w = cfg.get_double("guidance.w_cag");
        }
        require_weak(g, models);
        say("[" + preset + "] sample " + g.label());
        GuidedField field(models.view(), g);
        const auto batch = sample(field, ss, prompts);
        const auto path = out_dir / ("samples_" + kind + ".csv");
        auto sm = stage_manifest;
        sm.facts["guidance"] = g.label();
        write_with_manifest(path, io::points_csv(batch.finals, batch.classes), sm);
        outputs.push_back(path);
        res.reports.push_back(evaluate(spec, batch.finals, batch.classes, opts, g.label()));
        panels.push_back({std::string(panel_title(g.kind)), batch.finals, batch.classes});
    }
    timing.add("sample_eval", seconds_since(t0));

    t0 = Clock::now();
    say("[" + preset + "] error curves");
    res.curves = compute_curves(cfg, spec, models, uncond);
    timing.add("error_curve", seconds_since(t0));

    const auto eval_path = out_dir / "eval.csv";
    write_with_manifest(eval_path, eval_csv(res.reports), stage_manifest);
    std::string pretty;
    for (const auto& r : res.reports) {
        pretty += r.pretty() + "\n";
    }
    write_with_manifest(out_dir / "eval.txt", pretty, stage_manifest);
    write_with_manifest(out_dir / "error_curve.csv", io::error_curves_csv(res.curves), stage_manifest);
    write_with_manifest(out_dir / "error_curve.svg",
                        io::curves_figure(res.curves, "Config " + preset + ": distance to the optimal velocity"),
                        stage_manifest);
    // Panels share the ground-truth bounds so guidance effects are comparable.
    std::vector<Vec2> gt;
    for (const auto& g : spec.components()) {
        gt.push_back(g.mean);
    }
    const auto bounds = io::Bounds::of(gt, 0.25);
    write_with_manifest(out_dir / "figure.svg", io::scatter_figure(panels, bounds), stage_manifest);
    for (const char* f : {"eval.csv", "eval.txt", "error_curve.csv", "error_curve.svg", "figure.svg"}) {
        outputs.push_back(out_dir / f);
    }

    m.config = cfg.values();
    for (const auto& o : outputs) {
        m.outputs.push_back(digest_entry(o.filename().string(), o, out_dir));
    }
    res.manifest = out_dir / "repro.manifest.json";
    text::write_file_atomic(res.manifest, m.to_json());
    timing.write(out_dir / "repro");
    say("[" + preset + "] done: " + res.manifest.string());
    return res;
}

}  // namespace w2s
