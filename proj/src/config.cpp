// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/config.hpp"

#include "w2s/textio.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

namespace w2s {

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"run.seed", "0", "master seed; every stage derives its own substream"},

        {"mixture.preset", "C", "toy regime A, B or C"},
        {"mixture.num_classes", "", "classes (preset)"},
        {"mixture.max_depth", "", "recursion depth (preset)"},
        {"mixture.branch_factor", "", "children per split (preset)"},
        {"mixture.geometry_seed", "0", "seed of the branch-angle jitter"},
        {"mixture.main_angle_deg", "85", "trunk angle"},
        {"mixture.depth_decay", "0.6", "weight decay per depth"},
        {"mixture.points_per_branch", "3", "components along each branch"},
        {"mixture.root_length", "0.5", "length of each class subbranch"},
        {"mixture.class_angle_deg", "60", "class subbranch offset from the trunk"},
        {"mixture.child_angle_deg", "35", "child spread"},
        {"mixture.child_length_ratio", "0.55", "child length ratio"},
        {"mixture.thickness_across", "0.03", "std across a branch, relative to its length"},
        {"mixture.thickness_along", "0.08", "std along a branch, relative to its length"},
        {"mixture.angle_jitter_deg", "8", "uniform jitter on branch angles"},

        {"dataset.n", "100000", "points in the training set"},

        {"train.variant", "baseline", "baseline|mg|ag|br|sgg|slg_warm"},
        {"train.w", "", "training guidance weight (variant default)"},
        {"train.tau", "0.2", "sgg switch time"},
        {"train.t_lo", "", "guidance interval lower end (variant default)"},
        {"train.t_hi", "", "guidance interval upper end (variant default)"},
        {"train.cond_dropout", "0.1", "probability of feeding the null condition"},
        {"train.iters", "", "strong-net iterations (preset budget)"},
        {"train.batch", "256", "batch size"},
        {"train.lr", "1e-3", "Adam learning rate"},
        {"train.lognormal_loc", "-1.2", "logit-normal timestep location"},
        {"train.lognormal_scale", "1.8", "logit-normal timestep scale"},
        {"train.co_train_weak", "true", "train the smaller weak net alongside any variant"},
        {"train.weak_update_ratio", "", "strong steps per weak step (preset budget)"},
        {"train.warmup_iters", "-1", "slg_warm plain-regression steps (<0: a quarter)"},
        {"train.slg_skip_blocks", "", "slg_warm skipped blocks (empty: middle block)"},
        {"train.unconditional", "false", "train without class input"},
        {"train.log_every", "256", "loss-record cadence"},
        {"train.checkpoint_every", "0", "intermediate checkpoint cadence (0: none)"},

        {"net.d_h", "128", "hidden width"},
        {"net.d_c", "16", "class-embedding width"},
        {"net.n_blocks", "4", "residual blocks"},
        {"net.n_freqs", "16", "time-encoding frequencies"},
        {"net.branch_index", "1", "block after which the branch head reads (br/sgg)"},
        {"weak.d_h", "64", "hidden width of the weak net"},
        {"weak.n_blocks", "4", "residual blocks of the weak net"},

        {"sample.n", "8192", "samples per guidance setting"},
        {"sample.kind", "ode", "ode|sde"},
        {"sample.steps", "128", "integration steps"},
        {"sample.t_end", "0.001", "final time"},
        {"sample.churn", "1", "SDE noise level"},

        {"guidance.kind", "none", "none|cfg|ag|skip|sgg"},
        {"guidance.w", "2", "scale of single-scale kinds"},
        {"guidance.w_cdg", "", "sgg scale above tau (preset w_cfg)"},
        {"guidance.w_cag", "", "sgg scale at or below tau (preset w_ag)"},
        {"guidance.tau", "", "sgg switch time (preset)"},
        {"guidance.t_lo", "0", "guidance active from"},
        {"guidance.t_hi", "1", "guidance active until"},
        {"guidance.skip_blocks", "", "blocks bypassed by skip guidance"},
        {"guidance.sgg_cag", "weak_model", "sgg weak source below tau: weak_model|skip_blocks"},

        {"eval.radius_sigmas", "2", "coverage Mahalanobis radius"},
        {"eval.floor", "", "outlier log-density floor (0.1% ground-truth quantile)"},

        {"curve.n_states", "10000", "states per t"},
        {"curve.n_t", "28", "midpoint t-grid size"},

        {"sweep.w", "1,1.5,2,3,4", "guidance scales of the sweep"},
    };
    return keys;
}

std::string env_name(std::string_view key) {
    std::string out(kEnvPrefix);
    for (char ch : key) {
        out += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    }
    return out;
}

namespace {

const ConfigKey* find_key(std::string_view name) {
    for (const auto& k : config_keys()) {
        if (k.name == name) {
            return &k;
        }
    }
    return nullptr;
}

std::string unknown_message(const std::string& key, const std::string& nearest) {
    return "unknown config key '" + key + "' (nearest valid key: '" + nearest + "')";
}

}  // namespace

UnknownConfigKey::UnknownConfigKey(const std::string& key, const std::string& nearest)
    : std::invalid_argument(unknown_message(key, nearest)), key_(key), nearest_(nearest) {}

std::string nearest_key(std::string_view key) {
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& k : config_keys()) {
        const auto d = text::edit_distance(key, k.name);
        if (d < best_d) {
            best_d = d;
            best = k.name;
        }
    }
    return best;
}

std::string_view to_string(ConfigSource s) {
    switch (s) {
        case ConfigSource::default_value: return "default";
        case ConfigSource::file: return "file";
        case ConfigSource::env: return "env";
        case ConfigSource::cli: return "cli";
        case ConfigSource::derived: return "derived";
    }
    return "?";
}

Config::Config() {
    for (const auto& k : config_keys()) {
        values_[k.name] = k.default_value;
        sources_[k.name] = ConfigSource::default_value;
    }
}

void Config::set(std::string_view key, std::string value, ConfigSource source) {
    if (!find_key(key)) {
        throw UnknownConfigKey(std::string(key), nearest_key(key));
    }
    const std::string k(key);
    values_[k] = std::string(text::trim(value));
    sources_[k] = source;
}

void Config::derive(std::string_view key, std::string value) {
    if (!find_key(key)) {
        throw UnknownConfigKey(std::string(key), nearest_key(key));
    }
    const std::string k(key);
    const auto s = sources_.at(k);
    if ((s == ConfigSource::default_value || s == ConfigSource::derived) && values_.at(k).empty()) {
        values_[k] = std::move(value);
        sources_[k] = ConfigSource::derived;
    }
}

void Config::load_file(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) {
        throw std::runtime_error("config file not found: " + path.string());
    }
    try {
        load_text(text::read_file(path), ConfigSource::file);
    } catch (const UnknownConfigKey&) {
        throw;
    } catch (const std::exception& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

void Config::load_text(std::string_view body, ConfigSource source) {
    std::size_t line_no = 0;
    for (auto raw : text::lines(body)) {
        ++line_no;
        auto line = text::trim(raw);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected key = value");
        }
        set(text::trim(line.substr(0, eq)), std::string(text::trim(line.substr(eq + 1))), source);
    }
}

void Config::load_env(char** envp) {
    if (!envp) {
        return;
    }
    for (char** e = envp; *e; ++e) {
        const std::string_view entry(*e);
        if (entry.substr(0, kEnvPrefix.size()) != kEnvPrefix) {
            continue;
        }
        const auto eq = entry.find('=');
        const auto name = entry.substr(0, eq);
        const auto value = eq == std::string_view::npos ? std::string_view{} : entry.substr(eq + 1);
        const ConfigKey* match = nullptr;
        for (const auto& k : config_keys()) {
            if (env_name(k.name) == name) {
                match = &k;
                break;
            }
        }
        if (!match) {
            std::string best;
            std::size_t best_d = std::numeric_limits<std::size_t>::max();
            for (const auto& k : config_keys()) {
                const auto d = text::edit_distance(name, env_name(k.name));
                if (d < best_d) {
                    best_d = d;
                    best = env_name(k.name);
                }
            }
            throw UnknownConfigKey(std::string(name), best);
        }
        set(match->name, std::string(value), ConfigSource::env);
    }
}

void Config::apply_overrides(const std::vector<std::string>& assignments) {
    for (const auto& a : assignments) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("expected key=value, got '" + a + "'");
        }
        set(text::trim(std::string_view(a).substr(0, eq)), a.substr(eq + 1), ConfigSource::cli);
    }
}

const std::string& Config::get(std::string_view key) const {
    const auto it = values_.find(std::string(key));
    if (it == values_.end()) {
        throw UnknownConfigKey(std::string(key), nearest_key(key));
    }
    return it->second;
}

double Config::get_double(std::string_view key) const {
    try {
        return text::to_double(get(key));
    } catch (const UnknownConfigKey&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(key) + ": " + e.what());
    }
}

std::int64_t Config::get_int(std::string_view key) const {
    try {
        return text::to_int(get(key));
    } catch (const UnknownConfigKey&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(key) + ": " + e.what());
    }
}

bool Config::get_bool(std::string_view key) const {
    try {
        return text::to_bool(get(key));
    } catch (const UnknownConfigKey&) {
        throw;
    } catch (const std::exception& e) {
        throw std::invalid_argument(std::string(key) + ": " + e.what());
    }
}

std::vector<double> Config::get_doubles(std::string_view key) const {
    std::vector<double> out;
    for (auto tok : text::split(get(key), ',')) {
        if (!text::trim(tok).empty()) {
            out.push_back(text::to_double(tok));
        }
    }
    return out;
}

std::vector<int> Config::get_ints(std::string_view key) const {
    std::vector<int> out;
    for (auto tok : text::split(get(key), ',')) {
        if (!text::trim(tok).empty()) {
            out.push_back(static_cast<int>(text::to_int(tok)));
        }
    }
    return out;
}

ConfigSource Config::source(std::string_view key) const {
    const auto it = sources_.find(std::string(key));
    if (it == sources_.end()) {
        throw UnknownConfigKey(std::string(key), nearest_key(key));
    }
    return it->second;
}

std::map<std::string, std::string> Config::section(std::string_view ns) const {
    std::map<std::string, std::string> out;
    const std::string prefix = std::string(ns) + ".";
    for (const auto& [k, v] : values_) {
        if (k.compare(0, prefix.size(), prefix) == 0) {
            out[k] = v;
        }
    }
    return out;
}

std::string Config::dump() const {
    std::string out;
    for (const auto& [k, v] : values_) {
        out += k + " = " + v + "\n";
    }
    return out;
}

}  // namespace w2s
