// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// w2sflow: dataset / train / sample / eval / error-curve / sweep / repro.
//
// Every configuration key is also a flag (--train.lr 3e-4); precedence is
// command line > W2SFLOW_* environment > --config file > built-in default.

#include "w2s/config.hpp"
#include "w2s/manifest.hpp"
#include "w2s/runner.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <map>

extern char** environ;

namespace {

using namespace w2s;
namespace fs = std::filesystem;

struct Inputs {
    std::string spec, data, model, weak, samples, out;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"w2sflow: flow matching on 2D recursive Gaussian mixtures with weak-to-strong guidance"};
    app.set_version_flag("--version", std::string(tool_version()));
    app.require_subcommand(0, 1);
    app.fallthrough();

    std::string config_file;
    std::vector<std::string> sets;
    std::vector<std::string> checks;
    app.add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    app.add_option("--set", sets, "key=value override (repeatable)");
    app.add_option("--check", checks, "verify the digests recorded in manifests (output or .manifest.json)");

    // Every key as a flag, listed in --help with its default and environment name.
    std::map<std::string, std::string> key_flags;
    for (const auto& k : config_keys()) {
        std::string desc = k.help + " [default: " + (k.default_value.empty() ? "derived" : k.default_value) +
                           "; env " + env_name(k.name) + "]";
        app.add_option("--" + k.name, key_flags[k.name], desc)->group("Configuration keys");
    }

    // Short aliases.
    std::string a_preset, a_seed, a_n, a_variant, a_iters, a_guidance, a_w;
    Inputs in;
    auto with_common = [&](CLI::App* sc) {
        sc->add_option("--seed", a_seed, "run.seed");
        return sc;
    };

    auto* ds = with_common(app.add_subcommand("dataset", "write the mixture spec and a labeled point set"));
    ds->add_option("--preset", a_preset, "mixture.preset (A, B, C)");
    ds->add_option("--n", a_n, "dataset.n");
    ds->add_option("--out", in.out, "output directory")->required();

    auto* tr = with_common(app.add_subcommand("train", "train the strong net (and the weak net)"));
    tr->add_option("--spec", in.spec, "mixture spec file")->required();
    tr->add_option("--data", in.data, "dataset CSV (default: fresh draws from the spec)");
    tr->add_option("--preset", a_preset, "mixture.preset (selects the budget)");
    tr->add_option("--variant", a_variant, "train.variant");
    tr->add_option("--iters", a_iters, "train.iters");
    tr->add_option("--out", in.out, "output directory")->required();

    auto* sa = with_common(app.add_subcommand("sample", "draw samples with a guidance setting"));
    sa->add_option("--spec", in.spec, "mixture spec file")->required();
    sa->add_option("--model", in.model, "strong checkpoint")->required();
    sa->add_option("--weak", in.weak, "weak checkpoint (ag/sgg)");
    sa->add_option("--preset", a_preset, "mixture.preset (selects default scales)");
    sa->add_option("--guidance", a_guidance, "guidance.kind");
    sa->add_option("--w", a_w, "guidance.w");
    sa->add_option("--n", a_n, "sample.n");
    sa->add_option("--out", in.out, "output CSV")->required();

    auto* ev = app.add_subcommand("eval", "score samples against the mixture");
    ev->add_option("--spec", in.spec, "mixture spec file")->required();
    ev->add_option("--samples", in.samples, "sample CSV")->required();
    ev->add_option("--out", in.out, "output prefix (writes .csv and .txt)")->required();

    auto* ec = with_common(app.add_subcommand("error-curve", "distance to the optimal velocity across t"));
    ec->add_option("--spec", in.spec, "mixture spec file")->required();
    ec->add_option("--model", in.model, "strong checkpoint")->required();
    ec->add_option("--weak", in.weak, "weak checkpoint");
    ec->add_option("--preset", a_preset, "mixture.preset (selects default scales)");
    ec->add_option("--out", in.out, "output CSV")->required();

    auto* sw = with_common(app.add_subcommand("sweep", "guidance-scale grid, one eval row per scale"));
    sw->add_option("--spec", in.spec, "mixture spec file")->required();
    sw->add_option("--model", in.model, "strong checkpoint")->required();
    sw->add_option("--weak", in.weak, "weak checkpoint");
    sw->add_option("--guidance", a_guidance, "guidance.kind");
    sw->add_option("--n", a_n, "sample.n");
    sw->add_option("--out", in.out, "output CSV")->required();

    std::string repro_preset;
    auto* rp = with_common(app.add_subcommand("repro", "end-to-end reproduction of one toy regime"));
    rp->add_option("preset", repro_preset, "A, B or C")->required()->check(CLI::IsMember({"A", "B", "C"}));
    rp->add_option("--out", in.out, "output directory (default: repro_<preset>)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!checks.empty()) {
            bool ok = true;
            for (const auto& c : checks) {
                const auto r = check_manifest(c);
                for (const auto& p : r.problems) {
                    std::cerr << "w2sflow: check: " << p << "\n";
                }
                std::cout << (r.ok ? "OK   " : "FAIL ") << c << "\n";
                ok = ok && r.ok;
            }
            if (app.get_subcommands().empty()) {
                return ok ? 0 : 3;
            }
            if (!ok) {
                return 3;
            }
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help();
            return 2;
        }

        Config cfg;
        if (!config_file.empty()) {
            cfg.load_file(config_file);
        }
        cfg.load_env(environ);
        cfg.apply_overrides(sets);
        for (const auto& [k, v] : key_flags) {
            if (!v.empty()) {
                cfg.set(k, v, ConfigSource::cli);
            }
        }
        auto* sc = app.get_subcommands().front();
        const std::string name = sc->get_name();
        auto alias = [&](const std::string& v, const char* key) {
            if (!v.empty()) {
                cfg.set(key, v, ConfigSource::cli);
            }
        };
        alias(a_seed, "run.seed");
        alias(a_preset, "mixture.preset");
        alias(a_n, name == "dataset" ? "dataset.n" : "sample.n");
        alias(a_variant, "train.variant");
        alias(a_iters, "train.iters");
        alias(a_guidance, "guidance.kind");
        alias(a_w, "guidance.w");

        if (name == "dataset") {
            const auto p = run_dataset(cfg, in.out);
            std::cout << p.spec.string() << "\n" << p.data.string() << "\n";
        } else if (name == "train") {
            const auto p = run_train(cfg, in.spec, in.data, in.out);
            std::cout << p.strong.string() << "\n";
            if (p.weak) {
                std::cout << p.weak->string() << "\n";
            }
        } else if (name == "sample") {
            run_sample(cfg, in.spec, in.model, in.weak, in.out);
            std::cout << in.out << "\n";
        } else if (name == "eval") {
            const auto r = run_eval(cfg, in.spec, in.samples, in.out);
            std::cout << EvalReport::csv_header() << "\n" << r.csv_row() << "\n\n" << r.pretty();
        } else if (name == "error-curve") {
            run_error_curve(cfg, in.spec, in.model, in.weak, in.out);
            std::cout << in.out << "\n";
        } else if (name == "sweep") {
            run_sweep(cfg, in.spec, in.model, in.weak, in.out);
            std::cout << in.out << "\n";
        } else if (name == "repro") {
            cfg.set("mixture.preset", repro_preset, ConfigSource::cli);
            const fs::path out = in.out.empty() ? fs::path("repro_" + repro_preset) : fs::path(in.out);
            const auto r = run_repro(cfg, out, &std::cerr);
            std::cout << EvalReport::csv_header() << "\n";
            for (const auto& rep : r.reports) {
                std::cout << rep.csv_row() << "\n";
            }
        }
        return 0;
    } catch (const DigestMismatch& e) {
        std::cerr << "w2sflow: error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "w2sflow: error: " << e.what() << "\n";
        return 1;
    }
}
