// Copyright 2026 csvmasr authors
// Content hashing and run manifests. Every run output directory gets exactly
// one manifest.json recording the resolved configuration and input hashes.
//
// Licensed under the Apache License, Version 2.0

#pragma once

#include <string>

#include <json.hpp>

namespace csvmasr {

std::string sha256_hex(const std::string& data);
std::string sha256_file_hex(const std::string& path);

// Writes <out_dir>/manifest.json with the given content plus a timestamp.
// Outputs other than the manifest must be byte-deterministic; the manifest
// is the one file allowed to differ between reruns (by its timestamp only).
void write_manifest(const std::string& out_dir,
                    const nlohmann::ordered_json& content);

}  // namespace csvmasr
