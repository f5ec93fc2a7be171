#include "pairforge/manifest.hpp"

#include <fstream>

#include "pairforge/errors.hpp"
#include "pairforge/sha256.hpp"

namespace pairforge {

void RunManifest::add_input(const std::string& path) {
    input_sha256.emplace_back(path, sha256_file_hex(path));
}

nlohmann::ordered_json RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["tool_version"] = tool_version;
    if (has_seed)
        j["seed"] = seed;
    else
        j["seed"] = nullptr;
    j["config"] = config_snapshot;
    auto& inputs = j["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [path, hash] : input_sha256) inputs[path] = hash;
    j["outputs"] = outputs;
    j["wall_time_s"] = wall_time_s;
    return j;
}

void RunManifest::write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw SchemaError("cannot open output file: " + path);
    f << to_json().dump(2) << '\n';
}

}  // namespace pairforge
