#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "h2dispatch/config.hpp"

namespace h2d {

inline constexpr const char* kToolVersion = "1.0.0";

std::uint64_t fnv1a64(const void* data, std::size_t n);
std::uint64_t fnv1a64_file(const std::string& path); // throws IoError

// Provenance record written next to every command's outputs. Digests are
// computed over the final bytes of each listed output file.
struct RunManifest {
    std::string command;
    std::string version = kToolVersion;
    std::vector<std::pair<std::string, std::string>> inputs; // label -> path
    std::uint64_t seed = 0;
    bool seed_used = false;
    GridSpec gspec;
    bool gspec_used = false;
    double duration_seconds = 0;
    std::vector<std::string> outputs;
    nlohmann::json* extra = nullptr; // optional command-specific payload
};

// Serializes the manifest (computing output digests) to <out_dir>/manifest.json.
void write_manifest(const RunManifest& m, const std::string& out_dir);

} // namespace h2d
