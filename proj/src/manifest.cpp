// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "w2s/manifest.hpp"

#include "w2s/digest.hpp"
#include "w2s/textio.hpp"

#include <json.hpp>

namespace w2s {

namespace fs = std::filesystem;
using nlohmann::json;

#ifndef W2S_VERSION
#define W2S_VERSION "0.0.0"
#endif

std::string_view tool_version() { return W2S_VERSION; }

namespace {

json files_json(const std::vector<FileDigest>& files) {
    json arr = json::array();
    for (const auto& f : files) {
        arr.push_back({{"role", f.role}, {"path", f.path}, {"sha256", f.sha256}});
    }
    return arr;
}

std::vector<FileDigest> files_from(const json& arr) {
    std::vector<FileDigest> out;
    for (const auto& f : arr) {
        out.push_back({f.at("role").get<std::string>(), f.at("path").get<std::string>(),
                       f.at("sha256").get<std::string>()});
    }
    return out;
}

fs::path absolute_clean(const fs::path& p) { return fs::weakly_canonical(fs::absolute(p)); }

}  // namespace

std::string RunManifest::to_json() const {
    // nlohmann::json objects are key-sorted, so the bytes are deterministic.
    json j;
    j["tool"] = "w2sflow";
    j["version"] = version;
    j["subcommand"] = subcommand;
    j["seed"] = seed;
    j["config"] = config;
    j["facts"] = facts;
    j["inputs"] = files_json(inputs);
    j["outputs"] = files_json(outputs);
    return j.dump(2) + "\n";
}

RunManifest RunManifest::parse(std::string_view text) {
    RunManifest m;
    try {
        const auto j = json::parse(text);
        if (j.value("tool", "") != "w2sflow") {
            throw std::runtime_error("not a w2sflow manifest");
        }
        m.version = j.at("version").get<std::string>();
        m.subcommand = j.at("subcommand").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.config = j.at("config").get<std::map<std::string, std::string>>();
        m.facts = j.at("facts").get<std::map<std::string, std::string>>();
        m.inputs = files_from(j.at("inputs"));
        m.outputs = files_from(j.at("outputs"));
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

fs::path manifest_path(const fs::path& output) { return fs::path(output.string() + ".manifest.json"); }
fs::path timing_path(const fs::path& output) { return fs::path(output.string() + ".timing.json"); }

FileDigest digest_entry(std::string role, const fs::path& file, const fs::path& base_dir) {
    if (!fs::exists(file)) {
        throw std::runtime_error("file not found: " + file.string());
    }
    const auto rel = absolute_clean(file).lexically_relative(absolute_clean(base_dir));
    return {std::move(role), rel.generic_string(), sha256_file(file)};
}

void write_with_manifest(const fs::path& output, std::string_view bytes, RunManifest m) {
    text::write_file_atomic(output, bytes);
    write_manifest_for(output, std::move(m));
}

void write_manifest_for(const fs::path& output, RunManifest m) {
    const auto dir = absolute_clean(output).parent_path();
    m.outputs.push_back(digest_entry("output", output, dir));
    text::write_file_atomic(manifest_path(output), m.to_json());
}

bool read_manifest(const fs::path& output, RunManifest& out) {
    const auto p = manifest_path(output);
    if (!fs::exists(p)) {
        return false;
    }
    out = RunManifest::parse(text::read_file(p));
    return true;
}

ManifestCheck check_manifest(const fs::path& manifest_or_output) {
    fs::path mp = manifest_or_output;
    const std::string suffix = ".manifest.json";
    const auto s = mp.string();
    if (s.size() < suffix.size() || s.compare(s.size() - suffix.size(), suffix.size(), suffix) != 0) {
        mp = manifest_path(mp);
    }
    if (!fs::exists(mp)) {
        throw std::runtime_error("manifest not found: " + mp.string());
    }
    const auto m = RunManifest::parse(text::read_file(mp));
    const auto dir = absolute_clean(mp).parent_path();
    ManifestCheck out;
    auto verify = [&](const FileDigest& f, std::string_view kind) {
        const auto p = dir / f.path;
        if (!fs::exists(p)) {
            out.ok = false;
            out.problems.push_back(std::string(kind) + " '" + f.role + "' missing: " + p.string());
            return;
        }
        const auto got = sha256_file(p);
        if (got != f.sha256) {
            out.ok = false;
            out.problems.push_back(std::string(kind) + " '" + f.role + "' digest mismatch: " + p.string() +
                                   " (recorded " + f.sha256 + ", found " + got + ")");
        }
    };
    for (const auto& f : m.inputs) {
        verify(f, "input");
    }
    for (const auto& f : m.outputs) {
        verify(f, "output");
    }
    return out;
}

}  // namespace w2s
