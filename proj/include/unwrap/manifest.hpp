#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

// Provenance record for CLI runs: resolved parameters and input digests, no
// timestamps or host state, so identical runs write identical manifests.

namespace unwrap::manifest {

struct RunManifest {
    std::string subcommand;
    std::string tool_version = "0.1.0";
    std::optional<std::uint64_t> seed;
    std::vector<std::pair<std::string, std::string>> params;  // insertion-ordered
    std::vector<std::pair<std::string, std::string>> inputs;  // path -> content digest
    std::vector<std::string> warnings;
    long gap_count = 0;

    void add_param(const std::string& name, const std::string& value);
    void add_param(const std::string& name, double value);
    void add_param(const std::string& name, long long value);
    // Digests the file's bytes (FNV-1a 64).
    void add_input(const std::filesystem::path& path);

    std::string to_json() const;
    void write(const std::filesystem::path& file) const;
};

}  // namespace unwrap::manifest
