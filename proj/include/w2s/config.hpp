// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Flat key=value configuration with dotted namespaces (train.lr, guidance.tau).
//
// Layers, lowest to highest precedence:
//   built-in default < config file < environment (W2SFLOW_<KEY>) < command line
// where the environment name of `train.cond_dropout` is W2SFLOW_TRAIN_COND_DROPOUT.
// An empty default means "derived" (from the preset or the variant); the runner
// writes the derived value back so manifests list every value actually used.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace w2s {

inline constexpr std::string_view kEnvPrefix = "W2SFLOW_";

struct ConfigKey {
    std::string name;
    std::string default_value;
    std::string help;
};

/// Every recognised key, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// W2SFLOW_ + upper-cased key with '.' replaced by '_'.
std::string env_name(std::string_view key);

class UnknownConfigKey : public std::invalid_argument {
public:
    UnknownConfigKey(const std::string& key, const std::string& nearest);
    const std::string& key() const { return key_; }
    const std::string& nearest() const { return nearest_; }

private:
    std::string key_, nearest_;
};

/// The valid key with the smallest edit distance.
std::string nearest_key(std::string_view key);

enum class ConfigSource { default_value, file, env, cli, derived };
std::string_view to_string(ConfigSource s);

class Config {
public:
    /// All keys at their built-in defaults.
    Config();

    /// Throws UnknownConfigKey for keys outside the registry.
    void set(std::string_view key, std::string value, ConfigSource source);
    /// Fills a derived value unless a user layer already set the key.
    void derive(std::string_view key, std::string value);

    /// `key = value` lines; '#' comments and blank lines ignored.
    void load_file(const std::filesystem::path& path);
    void load_text(std::string_view text, ConfigSource source = ConfigSource::file);
    /// Reads W2SFLOW_* variables from the given environment block (null-terminated
    /// "NAME=value" strings, as in `environ`). Unknown W2SFLOW_ names are errors.
    void load_env(char** envp);
    /// "key=value" overrides from the command line.
    void apply_overrides(const std::vector<std::string>& assignments);

    const std::string& get(std::string_view key) const;
    bool has_value(std::string_view key) const { return !get(key).empty(); }
    double get_double(std::string_view key) const;
    std::int64_t get_int(std::string_view key) const;
    bool get_bool(std::string_view key) const;
    std::vector<double> get_doubles(std::string_view key) const;
    std::vector<int> get_ints(std::string_view key) const;
    ConfigSource source(std::string_view key) const;

    /// Every key and its current value.
    const std::map<std::string, std::string>& values() const { return values_; }
    /// Keys of one namespace ("train" -> train.*).
    std::map<std::string, std::string> section(std::string_view ns) const;

    /// Canonical `key = value` text (sorted); parses back to the same values.
    std::string dump() const;

private:
    std::map<std::string, std::string> values_;
    std::map<std::string, ConfigSource> sources_;
};

}  // namespace w2s
