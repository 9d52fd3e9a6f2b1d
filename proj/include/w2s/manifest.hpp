// Copyright (C) 2026 The w2sflow Authors
// SPDX-License-Identifier: Apache-2.0

// Run manifests: a deterministic JSON sibling `<output>.manifest.json` for
// every output file, recording the subcommand, the fully resolved
// configuration, the tool version, and SHA-256 digests of inputs and outputs.
// Paths are stored relative to the manifest's directory so a run directory can
// be moved or compared against another. Wall time is not part of the manifest
// (it would break byte-identical reruns); it goes to `<output>.timing.json`.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace w2s {

std::string_view tool_version();

struct FileDigest {
    std::string role;  // e.g. "spec", "samples", "strong"
    std::string path;  // relative to the manifest's directory
    std::string sha256;
};

struct RunManifest {
    std::string subcommand;
    std::string version{tool_version()};
    std::uint64_t seed = 0;
    std::map<std::string, std::string> config;  // every key, defaults expanded
    std::map<std::string, std::string> facts;   // derived run facts (budgets, digests of specs)
    std::vector<FileDigest> inputs;
    std::vector<FileDigest> outputs;

    std::string to_json() const;
    static RunManifest parse(std::string_view json);
};

std::filesystem::path manifest_path(const std::filesystem::path& output);
std::filesystem::path timing_path(const std::filesystem::path& output);

/// Digest entry for an existing file, relative to `base_dir`.
FileDigest digest_entry(std::string role, const std::filesystem::path& file, const std::filesystem::path& base_dir);

/// Writes `bytes` to `output` and its sibling manifest (with `output` as the
/// sole output entry appended to `m.outputs`).
void write_with_manifest(const std::filesystem::path& output, std::string_view bytes, RunManifest m);
/// Same for a file already written by someone else (e.g. a checkpoint).
void write_manifest_for(const std::filesystem::path& output, RunManifest m);

/// Reads `<output>.manifest.json` if present.
bool read_manifest(const std::filesystem::path& output, RunManifest& out);

struct ManifestCheck {
    bool ok = true;
    std::vector<std::string> problems;  // one line per mismatch or missing file
};

/// Re-derives every recorded digest. Accepts a manifest or the output it describes.
ManifestCheck check_manifest(const std::filesystem::path& manifest_or_output);

class DigestMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace w2s
