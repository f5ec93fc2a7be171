#pragma once

// Reproducibility record written next to every file-producing command's
// primary output as <output>.manifest.json: the exact command, resolved
// configuration, input hashes, seed, tool version, outputs, and wall time.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pairforge {

inline constexpr char kToolVersion[] = "0.1.0";

struct RunManifest {
    std::string command;  // argv, space-joined
    std::string tool_version = kToolVersion;
    bool has_seed = false;
    std::uint64_t seed = 0;
    nlohmann::ordered_json config_snapshot;  // resolved inputs; null if none
    std::vector<std::pair<std::string, std::string>> input_sha256;
    std::vector<std::string> outputs;
    double wall_time_s = 0.0;

    void add_input(const std::string& path);  // records (path, sha256 of file)
    nlohmann::ordered_json to_json() const;
    void write(const std::string& path) const;
};

}  // namespace pairforge
