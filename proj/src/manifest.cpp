#include "h2dispatch/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <vector>

#include <nlohmann/json.hpp>

#include "h2dispatch/errors.hpp"

namespace h2d {

std::uint64_t fnv1a64(const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t fnv1a64_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void write_manifest(const RunManifest& m, const std::string& out_dir) {
    nlohmann::json j;
    j["command"] = m.command;
    j["version"] = m.version;
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [label, path] : m.inputs) inputs[label] = path;
    j["inputs"] = inputs;
    if (m.seed_used) j["seed"] = m.seed;
    if (m.gspec_used) j["grid"] = m.gspec;
    j["duration_seconds"] = m.duration_seconds;
    nlohmann::json outs = nlohmann::json::array();
    for (const auto& path : m.outputs) {
        char hex[20];
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(fnv1a64_file(path)));
        outs.push_back({{"path", path}, {"fnv1a64", hex}});
    }
    j["outputs"] = outs;
    if (m.extra) j["details"] = *m.extra;

    std::string path = out_dir + "/manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

} // namespace h2d
