#include "unwrap/manifest.hpp"

#include "json.hpp"
#include "unwrap/io_util.hpp"

namespace unwrap::manifest {

void RunManifest::add_param(const std::string& name, const std::string& value) {
    params.emplace_back(name, value);
}

void RunManifest::add_param(const std::string& name, double value) {
    params.emplace_back(name, io::format_double(value));
}

void RunManifest::add_param(const std::string& name, long long value) {
    params.emplace_back(name, std::to_string(value));
}

void RunManifest::add_input(const std::filesystem::path& path) {
    inputs.emplace_back(path.string(), io::file_digest(path));
}

std::string RunManifest::to_json() const {
    nlohmann::ordered_json doc;
    doc["tool_version"] = tool_version;
    doc["subcommand"] = subcommand;
    if (seed) doc["seed"] = *seed;
    auto& p = doc["parameters"] = nlohmann::ordered_json::object();
    for (const auto& [name, value] : params) p[name] = value;
    auto& in = doc["inputs"] = nlohmann::ordered_json::object();
    for (const auto& [path, digest] : inputs) in[path] = digest;
    doc["warnings"] = warnings;
    doc["gap_count"] = gap_count;
    return doc.dump(2) + "\n";
}

void RunManifest::write(const std::filesystem::path& file) const {
    auto out = io::open_output(file);
    out << to_json();
}

}  // namespace unwrap::manifest
